//! The Fisher-style matrix `B = H^H (H V H^H + sigma_n^2 I)^{-1} H`, the ML
//! estimate of `theta`, its variance `1 / (a^H B a)` and the eigenvalue
//! lower bound `1 / (N lambda_max(B))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};

const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Unit-modulus encoding vector `a`; the encoder is `D = diag(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    values: Vec<Complex64>,
}

impl PhaseVector {
    pub fn from_phases(phases: &[f64]) -> Self {
        Self {
            values: phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
        }
    }

    /// Keeps only the phase of each entry. Entries too small to carry a
    /// phase map to `1`.
    pub fn normalize(raw: &[Complex64]) -> Self {
        let scale = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = scale * 1e-13;
        Self {
            values: raw
                .iter()
                .map(|z| {
                    if z.norm() <= floor || z.norm() == 0.0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::from_polar(1.0, z.arg())
                    }
                })
                .collect(),
        }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    /// Accepts values that are already unit modulus within `1e-12`.
    pub fn try_new(values: Vec<Complex64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|z| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            return Err(Error::Usage(format!("phase entry {bad} is not unit modulus")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn phases(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.arg()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rotate(&self, phi: f64) -> Self {
        let r = Complex64::from_polar(1.0, phi);
        Self {
            values: self.values.iter().map(|z| z * r).collect(),
        }
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_column_slice(&self.values)
    }
}

/// Hermitian PSD matrix whose quadratic form in `a` is the inverse variance.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    matrix: CMatrix,
}

impl FisherMatrix {
    /// Wraps a Hermitian matrix (symmetrized on the way in).
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Usage("Fisher matrix must be square".into()));
        }
        if linalg::hermitian_defect(&matrix) > 1e-12 {
            return Err(Error::Usage("Fisher matrix must be Hermitian".into()));
        }
        Ok(Self {
            matrix: linalg::hermitian_part(&matrix),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `Re(a^H B a)`.
    pub fn quad_form(&self, a: &PhaseVector) -> f64 {
        linalg::quad_form(&self.matrix, a.values())
    }

    pub fn lambda_max(&self) -> f64 {
        linalg::lambda_max(&self.matrix)
    }

    /// Threshold below which a quadratic form or eigenvalue counts as zero.
    pub fn degeneracy_floor(&self) -> f64 {
        1e-14 * linalg::trace_re(&self.matrix).abs() + 1e3 * f64::MIN_POSITIVE
    }
}

fn check_dims(channel: &ChannelRealization, scenario: &Scenario) -> Result<()> {
    if channel.n_sensors() != scenario.sensor_noise_powers.len() {
        return Err(Error::Usage(format!(
            "channel has {} sensors but scenario lists {} noise powers",
            channel.n_sensors(),
            scenario.sensor_noise_powers.len()
        )));
    }
    if !(scenario.fc_noise_power > 0.0) {
        return Err(Error::Usage("fusion-center noise power must be positive".into()));
    }
    Ok(())
}

/// `H V H^H + sigma_n^2 I_M`.
pub fn noise_covariance(channel: &ChannelRealization, scenario: &Scenario) -> Result<CMatrix> {
    check_dims(channel, scenario)?;
    let h = &channel.matrix;
    let mut hv = h.clone();
    for (i, &sv) in scenario.sensor_noise_powers.iter().enumerate() {
        hv.column_mut(i).scale_mut(sv);
    }
    let mut c = hv * h.adjoint();
    for k in 0..c.nrows() {
        c[(k, k)] += scenario.fc_noise_power;
    }
    Ok(linalg::hermitian_part(&c))
}

/// `B` via a Cholesky factor of the `M x M` noise covariance:
/// `B = W^H W` with `L W = H`.
pub fn fisher_matrix_direct(channel: &ChannelRealization, scenario: &Scenario) -> Result<FisherMatrix> {
    let c = noise_covariance(channel, scenario)?;
    let chol = linalg::cholesky(&c, "noise covariance")?;
    let w = chol
        .l_dirty()
        .solve_lower_triangular(&channel.matrix)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    Ok(FisherMatrix {
        matrix: linalg::hermitian_part(&(w.adjoint() * w)),
    })
}

/// `B` through the matrix inversion lemma, factorizing the `N x N` matrix
/// `K = V^{-1} + G / sigma_n^2` with `G = H^H H`:
/// `B = G / sigma_n^2 - G K^{-1} G / sigma_n^4`.
pub fn fisher_matrix_woodbury(channel: &ChannelRealization, scenario: &Scenario) -> Result<FisherMatrix> {
    check_dims(channel, scenario)?;
    if scenario.sensor_noise_powers.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Usage("inversion-lemma form needs positive sensor noise powers".into()));
    }
    let s2 = scenario.fc_noise_power;
    let h = &channel.matrix;
    let g = linalg::hermitian_part(&(h.adjoint() * h));
    let mut k = &g / Complex64::new(s2, 0.0);
    for (i, &sv) in scenario.sensor_noise_powers.iter().enumerate() {
        k[(i, i)] += 1.0 / sv;
    }
    let chol = linalg::cholesky(&linalg::hermitian_part(&k), "inversion-lemma core")?;
    let kinv_g = chol.solve(&g);
    let b = &g / Complex64::new(s2, 0.0) - (&g * kinv_g) / Complex64::new(s2 * s2, 0.0);
    Ok(FisherMatrix {
        matrix: linalg::hermitian_part(&b),
    })
}

/// `B`, factorizing whichever of the `M x M` or `N x N` systems is smaller.
pub fn fisher_matrix(channel: &ChannelRealization, scenario: &Scenario) -> Result<FisherMatrix> {
    let direct_is_smaller = channel.n_antennas() <= channel.n_sensors();
    let has_zero_noise = scenario.sensor_noise_powers.iter().any(|&s| s <= 0.0);
    if direct_is_smaller || has_zero_noise {
        fisher_matrix_direct(channel, scenario)
    } else {
        fisher_matrix_woodbury(channel, scenario)
    }
}

/// `theta_hat = w^H y / (w^H H a)` with `w = C^{-1} H a`.
pub fn ml_estimate(
    y: &CVector,
    channel: &ChannelRealization,
    scenario: &Scenario,
    a: &PhaseVector,
) -> Result<Complex64> {
    MlEstimator::new(channel, scenario, a)?.estimate(y)
}

/// ML combiner with the covariance solve done once, for repeated snapshots
/// over a fixed channel.
#[derive(Debug, Clone)]
pub struct MlEstimator {
    weights: CVector,
    denominator: Complex64,
    noiseless: bool,
}

impl MlEstimator {
    pub fn new(channel: &ChannelRealization, scenario: &Scenario, a: &PhaseVector) -> Result<Self> {
        if a.len() != channel.n_sensors() {
            return Err(Error::Usage(format!(
                "phase vector has {} entries, channel has {} sensors",
                a.len(),
                channel.n_sensors()
            )));
        }
        let ha = &channel.matrix * a.to_vector();
        let noiseless = scenario.fc_noise_power == 0.0 && scenario.sensor_noise_powers.iter().all(|&s| s == 0.0);
        if noiseless {
            // Matched filter; the estimate is exact and the variance is zero.
            let denominator = ha.dotc(&ha);
            if !(denominator.re > 0.0) {
                return Err(Error::Degenerate("a^H H^H H a is zero; the channel carries no signal".into()));
            }
            return Ok(Self {
                weights: ha,
                denominator,
                noiseless: true,
            });
        }
        let c = noise_covariance(channel, scenario)?;
        let chol = linalg::cholesky(&c, "noise covariance")?;
        let weights = chol.solve(&ha);
        let denominator = weights.dotc(&ha);
        let scale = ha.norm_squared() / scenario.fc_noise_power;
        if !(denominator.re > 1e-14 * scale) {
            return Err(Error::Degenerate("a^H B a is zero; the channel carries no signal".into()));
        }
        Ok(Self {
            weights,
            denominator,
            noiseless: false,
        })
    }

    pub fn estimate(&self, y: &CVector) -> Result<Complex64> {
        if y.len() != self.weights.len() {
            return Err(Error::Usage(format!(
                "received vector has {} entries, expected {}",
                y.len(),
                self.weights.len()
            )));
        }
        Ok(self.weights.dotc(y) / self.denominator)
    }

    /// `1 / (a^H B a)` as seen by this combiner.
    pub fn variance(&self) -> f64 {
        if self.noiseless {
            0.0
        } else {
            1.0 / self.denominator.re
        }
    }
}

/// `1 / Re(a^H B a)`.
pub fn estimator_variance(a: &PhaseVector, b: &FisherMatrix) -> Result<f64> {
    if a.len() != b.dim() {
        return Err(Error::Usage(format!(
            "phase vector has {} entries, Fisher matrix is {}x{}",
            a.len(),
            b.dim(),
            b.dim()
        )));
    }
    let q = b.quad_form(a);
    if q <= b.degeneracy_floor() {
        return Err(Error::Degenerate(format!("quadratic form a^H B a = {q:e} is not positive")));
    }
    Ok(1.0 / q)
}

/// `1 / (N lambda_max(B))`.
pub fn variance_lower_bound(b: &FisherMatrix, n_sensors: usize) -> Result<f64> {
    if n_sensors != b.dim() {
        return Err(Error::Usage(format!(
            "{n_sensors} sensors but Fisher matrix is {}x{}",
            b.dim(),
            b.dim()
        )));
    }
    let lmax = b.lambda_max();
    if lmax <= b.degeneracy_floor() {
        return Err(Error::Degenerate(format!("lambda_max(B) = {lmax:e} is not positive")));
    }
    Ok(1.0 / (n_sensors as f64 * lmax))
}
