//! Closed-form large-N bounds and the large-M variance law, evaluated with
//! empirical sums over the realized distances and noise powers.

use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticInputs {
    pub distances: Vec<f64>,
    pub sensor_noise_powers: Vec<f64>,
    pub fc_noise_power: f64,
    pub path_loss_exp: f64,
    pub n_antennas: usize,
}

impl AsymptoticInputs {
    pub fn new(
        distances: Vec<f64>,
        sensor_noise_powers: Vec<f64>,
        fc_noise_power: f64,
        path_loss_exp: f64,
        n_antennas: usize,
    ) -> Result<Self> {
        let inputs = Self {
            distances,
            sensor_noise_powers,
            fc_noise_power,
            path_loss_exp,
            n_antennas,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() || self.distances.len() != self.sensor_noise_powers.len() {
            return Err(Error::Usage(format!(
                "need matching nonempty distance and noise lists, got {} and {}",
                self.distances.len(),
                self.sensor_noise_powers.len()
            )));
        }
        if self.distances.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Usage("distances must be positive".into()));
        }
        if self.sensor_noise_powers.iter().any(|&s| !(s >= 0.0)) || !(self.fc_noise_power >= 0.0) {
            return Err(Error::Usage("noise powers must be nonnegative".into()));
        }
        if !(self.path_loss_exp >= 0.0) {
            return Err(Error::Usage("path-loss exponent must be nonnegative".into()));
        }
        if self.n_antennas == 0 {
            return Err(Error::Usage("antenna count must be positive".into()));
        }
        Ok(())
    }

    pub fn n_sensors(&self) -> usize {
        self.distances.len()
    }

    /// `d_i^{-alpha}`.
    fn inv_amp(&self) -> impl Iterator<Item = f64> + '_ {
        self.distances.iter().map(move |d| d.powf(-self.path_loss_exp))
    }

    /// `sigma_n^2 + sum_i sigma_{v,i}^2 / d_i^{2 alpha}`.
    fn effective_noise(&self) -> f64 {
        self.fc_noise_power
            + self
                .inv_amp()
                .zip(&self.sensor_noise_powers)
                .map(|(g, s)| s * g * g)
                .sum::<f64>()
    }
}

impl From<&Scenario> for AsymptoticInputs {
    fn from(s: &Scenario) -> Self {
        Self {
            distances: s.distances.clone(),
            sensor_noise_powers: s.sensor_noise_powers.clone(),
            fc_noise_power: s.fc_noise_power,
            path_loss_exp: s.path_loss_exp,
            n_antennas: s.n_antennas,
        }
    }
}

/// `(sigma_n^2 + sum sigma_v^2 / d^{2a}) / (N sum 1 / d^{2a})`.
pub fn large_n_lower_bound(inputs: &AsymptoticInputs) -> f64 {
    let n = inputs.n_sensors() as f64;
    let s2: f64 = inputs.inv_amp().map(|g| g * g).sum();
    inputs.effective_noise() / (n * s2)
}

/// Single-antenna coherent-combining variance
/// `(sigma_n^2 + sum sigma_v^2 / d^{2a}) / (sum 1 / d^a)^2`.
pub fn single_antenna_upper_bound(inputs: &AsymptoticInputs) -> f64 {
    let s1: f64 = inputs.inv_amp().sum();
    inputs.effective_noise() / (s1 * s1)
}

/// Ratio of the large-N lower bound to the single-antenna bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRatio {
    /// `1 - Var{1/d^a} / E{1/d^{2a}}` with population moments. Exactly 1
    /// when all distances are equal.
    pub ratio: f64,
    /// `(sum 1/d^a)^2 / (N sum 1/d^{2a})`.
    pub direct: f64,
}

pub fn bound_ratio(inputs: &AsymptoticInputs) -> BoundRatio {
    let n = inputs.n_sensors() as f64;
    let g: Vec<f64> = inputs.inv_amp().collect();
    let (s1, s2) = g.iter().fold((0.0, 0.0), |(s1, s2), &x| (s1 + x, s2 + x * x));
    // Moments about the first sample, so equal inputs give a variance of
    // exactly zero.
    let (t1, t2) = g.iter().fold((0.0, 0.0), |(t1, t2), &x| {
        let u = x - g[0];
        (t1 + u, t2 + u * u)
    });
    let var = (t2 / n - (t1 / n) * (t1 / n)).max(0.0);
    BoundRatio {
        ratio: 1.0 - var / (s2 / n),
        direct: s1 * s1 / (n * s2),
    }
}

/// Large-antenna variance `1 / (M sum 1 / (d^{2a} sigma_n^2 + M sigma_v^2))`,
/// valid for any phase vector.
pub fn large_m_variance(inputs: &AsymptoticInputs) -> f64 {
    let m = inputs.n_antennas as f64;
    let sum: f64 = inputs
        .distances
        .iter()
        .zip(&inputs.sensor_noise_powers)
        .map(|(d, s)| 1.0 / (d.powf(2.0 * inputs.path_loss_exp) * inputs.fc_noise_power + m * s))
        .sum();
    1.0 / (m * sum)
}
