//! Scenario sampling and path-loss channel generation.
//!
//! Channels follow a constant-amplitude, random-phase model: entry `(m, i)`
//! of `H` is `d_i^{-alpha} * exp(j * gamma)` with `gamma` uniform on `[0, 2pi)`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::PhaseVector;
use crate::linalg::{CMatrix, CVector};

/// Closed sampling interval `[low, high]` with `0 < low <= high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite()) {
            return Err(Error::Config(format!("{name}: endpoints must be finite")));
        }
        if self.low <= 0.0 {
            return Err(Error::Config(format!("{name}: low endpoint {} must be positive", self.low)));
        }
        if self.low > self.high {
            return Err(Error::Config(format!(
                "{name}: low endpoint {} exceeds high endpoint {}",
                self.low, self.high
            )));
        }
        Ok(())
    }

    /// Uniform draw; returns `low` exactly for a degenerate interval.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.low + (self.high - self.low) * u
    }
}

/// The fixed part of a scenario plus the ranges its per-sensor values are
/// drawn from. Defaults are the desk-scale experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub path_loss_exp: f64,
    pub fc_noise_power: f64,
    pub distance_range: Interval,
    pub sensor_noise_range: Interval,
    pub theta: Complex64,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        Self {
            path_loss_exp: 1.0,
            fc_noise_power: 0.1,
            distance_range: Interval::new(2.0, 7.0),
            sensor_noise_range: Interval::new(0.001, 0.01),
            theta: Complex64::new(1.0, 0.0),
        }
    }
}

impl ScenarioTemplate {
    pub fn validate(&self) -> Result<()> {
        self.distance_range.validate("distance range")?;
        self.sensor_noise_range.validate("sensor noise range")?;
        if !(self.path_loss_exp >= 0.0 && self.path_loss_exp.is_finite()) {
            return Err(Error::Config(format!(
                "path-loss exponent {} must be finite and nonnegative",
                self.path_loss_exp
            )));
        }
        if !(self.fc_noise_power > 0.0 && self.fc_noise_power.is_finite()) {
            return Err(Error::Config(format!(
                "fusion-center noise power {} must be positive",
                self.fc_noise_power
            )));
        }
        Ok(())
    }
}

/// One static problem instance: sensor geometry and noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_sensors: usize,
    pub n_antennas: usize,
    pub path_loss_exp: f64,
    pub fc_noise_power: f64,
    pub distances: Vec<f64>,
    pub sensor_noise_powers: Vec<f64>,
    pub distance_range: Interval,
    pub sensor_noise_range: Interval,
    pub theta: Complex64,
}

impl Scenario {
    /// Checks the positivity and length invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 || self.n_antennas == 0 {
            return Err(Error::Usage("sensor and antenna counts must be positive".into()));
        }
        if self.distances.len() != self.n_sensors || self.sensor_noise_powers.len() != self.n_sensors {
            return Err(Error::Usage(format!(
                "expected {} distances and noise powers, got {} and {}",
                self.n_sensors,
                self.distances.len(),
                self.sensor_noise_powers.len()
            )));
        }
        if self.distances.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Usage("distances must be positive".into()));
        }
        if self.sensor_noise_powers.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Usage("sensor noise powers must be positive".into()));
        }
        if !(self.fc_noise_power > 0.0) {
            return Err(Error::Usage("fusion-center noise power must be positive".into()));
        }
        Ok(())
    }

    /// Channel amplitude `d_i^{-alpha}` for every sensor.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.distances.iter().map(|d| d.powf(-self.path_loss_exp)).collect()
    }
}

/// Draws per-sensor distances and noise powers for an `n_sensors` x
/// `n_antennas` instance. Distances are drawn first, then noise powers.
pub fn sample_scenario<R: Rng + ?Sized>(
    template: &ScenarioTemplate,
    n_sensors: usize,
    n_antennas: usize,
    rng: &mut R,
) -> Result<Scenario> {
    template.validate()?;
    if n_sensors == 0 || n_antennas == 0 {
        return Err(Error::Config("sensor and antenna counts must be positive".into()));
    }
    let distances = (0..n_sensors).map(|_| template.distance_range.sample(rng)).collect();
    let sensor_noise_powers = (0..n_sensors).map(|_| template.sensor_noise_range.sample(rng)).collect();
    Ok(Scenario {
        n_sensors,
        n_antennas,
        path_loss_exp: template.path_loss_exp,
        fc_noise_power: template.fc_noise_power,
        distances,
        sensor_noise_powers,
        distance_range: template.distance_range,
        sensor_noise_range: template.sensor_noise_range,
        theta: template.theta,
    })
}

/// One draw of the `M x N` channel matrix together with its phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub matrix: CMatrix,
    pub phases: DMatrix<f64>,
}

impl ChannelRealization {
    pub fn n_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_sensors(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Draws phases sensor by sensor (column-major order).
pub fn generate_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> ChannelRealization {
    let m = scenario.n_antennas;
    let n = scenario.n_sensors;
    let amps = scenario.amplitudes();
    let mut phases = DMatrix::<f64>::zeros(m, n);
    let mut matrix = CMatrix::zeros(m, n);
    for i in 0..n {
        for row in 0..m {
            let u: f64 = rng.random();
            let gamma = TAU * u;
            phases[(row, i)] = gamma;
            matrix[(row, i)] = Complex64::from_polar(amps[i], gamma);
        }
    }
    ChannelRealization { matrix, phases }
}

/// Circularly-symmetric complex Gaussian sample with total variance `power`.
pub fn complex_gaussian<R: Rng + ?Sized>(power: f64, rng: &mut R) -> Complex64 {
    let s = (0.5 * power).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `y = H a theta + H D v + n` for one snapshot. Sensor noise `v` is drawn
/// before the receiver noise `n`.
pub fn synthesize_received_signal<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelRealization,
    a: &PhaseVector,
    rng: &mut R,
) -> Result<CVector> {
    let n = channel.n_sensors();
    let m = channel.n_antennas();
    if a.len() != n || scenario.n_sensors != n || scenario.sensor_noise_powers.len() != n {
        return Err(Error::Usage(format!(
            "phase vector has {} entries, channel has {} sensors, scenario has {}",
            a.len(),
            n,
            scenario.n_sensors
        )));
    }
    let theta = scenario.theta;
    // Encoded sensor outputs: a_i (theta + v_i).
    let tx = CVector::from_iterator(
        n,
        a.values()
            .iter()
            .zip(&scenario.sensor_noise_powers)
            .map(|(&ai, &sv)| ai * (theta + complex_gaussian(sv, rng))),
    );
    let mut y = &channel.matrix * tx;
    for k in 0..m {
        y[k] += complex_gaussian(scenario.fc_noise_power, rng);
    }
    Ok(y)
}
