//! Phase selection front end: two-sensor closed form, SDP relaxation with
//! rounding, the all-ones baseline and an exhaustive grid oracle.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Scenario};
use crate::error::{Error, Result};
use crate::estimator::{self, FisherMatrix, PhaseVector};
use crate::linalg;
use crate::sdp::{self, SdpOptions, SdpProblem, SdpSolution, DEFAULT_ROUNDING_CANDIDATES};

/// Largest sensor count the grid oracle accepts.
pub const GRID_ORACLE_MAX_SENSORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    ClosedFormN2,
    SdpRelaxation,
    AllOnes,
    GridOracle,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::ClosedFormN2 => "closed-form",
            StrategyKind::SdpRelaxation => "sdp",
            StrategyKind::AllOnes => "all-ones",
            StrategyKind::GridOracle => "grid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhaseStrategy {
    ClosedFormN2,
    SdpRelaxation { candidates: usize },
    AllOnes,
    /// Step is in degrees; `None` picks 1 degree for up to three sensors and
    /// 4 degrees for four.
    GridOracle { step_degrees: Option<f64> },
}

impl PhaseStrategy {
    pub fn sdp() -> Self {
        PhaseStrategy::SdpRelaxation {
            candidates: DEFAULT_ROUNDING_CANDIDATES,
        }
    }

    pub fn grid() -> Self {
        PhaseStrategy::GridOracle { step_degrees: None }
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            PhaseStrategy::ClosedFormN2 => StrategyKind::ClosedFormN2,
            PhaseStrategy::SdpRelaxation { .. } => StrategyKind::SdpRelaxation,
            PhaseStrategy::AllOnes => StrategyKind::AllOnes,
            PhaseStrategy::GridOracle { .. } => StrategyKind::GridOracle,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn validate_for(&self, n_sensors: usize) -> Result<()> {
        match *self {
            PhaseStrategy::ClosedFormN2 if n_sensors != 2 => Err(Error::Usage(format!(
                "closed-form strategy needs exactly 2 sensors, got {n_sensors}"
            ))),
            PhaseStrategy::GridOracle { .. } if n_sensors > GRID_ORACLE_MAX_SENSORS => Err(Error::Usage(format!(
                "grid oracle is limited to {GRID_ORACLE_MAX_SENSORS} sensors, got {n_sensors}"
            ))),
            PhaseStrategy::GridOracle {
                step_degrees: Some(step),
            } if !(step > 0.0 && step <= 360.0) => Err(Error::Usage(format!("grid step {step} must lie in (0, 360]"))),
            PhaseStrategy::SdpRelaxation { candidates: 0 } => {
                Err(Error::Usage("SDP rounding needs at least one candidate".into()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PhaseStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhaseStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "closed-form" | "closed-form-n2" | "closedformn2" => Ok(PhaseStrategy::ClosedFormN2),
            "sdp" | "sdp-relaxation" | "sdprelaxation" => Ok(PhaseStrategy::sdp()),
            "all-ones" | "ones" | "allones" => Ok(PhaseStrategy::AllOnes),
            "grid" | "grid-oracle" | "gridoracle" => Ok(PhaseStrategy::grid()),
            other => Err(Error::Usage(format!(
                "unknown strategy '{other}' (expected sdp, all-ones, closed-form or grid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub phases: PhaseVector,
    /// `1 / (a^H B a)` at the chosen phases.
    pub achieved_variance: f64,
    /// `1 / (N lambda_max(B))`.
    pub lower_bound: f64,
    /// `tr(B A*)`, only for the SDP strategy.
    pub relaxation_value: Option<f64>,
    pub strategy: PhaseStrategy,
    /// Solver record, only for the SDP strategy.
    pub sdp: Option<SdpSolution>,
}

/// Two-sensor optimum `a = (exp(j arg B_12), 1)`, giving
/// `a^H B a = B_11 + B_22 + 2 |B_12|`.
pub fn optimize_phases_n2(b: &FisherMatrix) -> Result<PhaseVector> {
    if b.dim() != 2 {
        return Err(Error::Usage(format!(
            "closed form needs a 2x2 matrix, got {}x{}",
            b.dim(),
            b.dim()
        )));
    }
    let b12 = b.matrix()[(0, 1)];
    let beta = if b12.norm() > 0.0 { b12.arg() } else { 0.0 };
    Ok(PhaseVector::from_phases(&[beta, 0.0]))
}

/// Exhaustive search over phases on a uniform grid with the first phase
/// pinned to zero. Returns the best vector and its quadratic form.
pub fn grid_oracle(b: &FisherMatrix, step_degrees: Option<f64>) -> Result<(PhaseVector, f64)> {
    let n = b.dim();
    let strategy = PhaseStrategy::GridOracle { step_degrees };
    strategy.validate_for(n)?;
    let step = step_degrees.unwrap_or(if n <= 3 { 1.0 } else { 4.0 });
    let points = (360.0 / step).round().max(1.0) as usize;
    let table: Vec<Complex64> = (0..points)
        .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / points as f64))
        .collect();

    let m = b.matrix();
    let mut a = vec![Complex64::new(1.0, 0.0); n];
    let mut idx = vec![0usize; n];
    let mut best_idx = idx.clone();
    let mut best = f64::NEG_INFINITY;
    loop {
        for k in 1..n {
            a[k] = table[idx[k]];
        }
        let v = linalg::quad_form(m, &a);
        if v > best {
            best = v;
            best_idx.clone_from(&idx);
        }
        // Odometer over indices 1..n.
        let mut k = n;
        loop {
            if k == 1 || n == 1 {
                let phases: Vec<f64> = best_idx.iter().map(|&i| TAU * i as f64 / points as f64).collect();
                return Ok((PhaseVector::from_phases(&phases), best));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Phases chosen by `strategy` plus their variance and the eigenvalue bound.
pub fn optimize_phases<R: Rng + ?Sized>(
    b: &FisherMatrix,
    strategy: &PhaseStrategy,
    rng: &mut R,
) -> Result<OptimizationReport> {
    let n = b.dim();
    strategy.validate_for(n)?;
    let lower_bound = estimator::variance_lower_bound(b, n)?;
    let report = |phases: PhaseVector, relaxation_value, sdp| -> Result<OptimizationReport> {
        Ok(OptimizationReport {
            achieved_variance: estimator::estimator_variance(&phases, b)?,
            phases,
            lower_bound,
            relaxation_value,
            strategy: *strategy,
            sdp,
        })
    };
    match *strategy {
        PhaseStrategy::ClosedFormN2 => report(optimize_phases_n2(b)?, None, None),
        PhaseStrategy::AllOnes => report(PhaseVector::ones(n), None, None),
        PhaseStrategy::GridOracle { step_degrees } => report(grid_oracle(b, step_degrees)?.0, None, None),
        PhaseStrategy::SdpRelaxation { candidates } => {
            let problem = SdpProblem::from_fisher(b);
            let solution = sdp::solve_with(&problem, &SdpOptions::default())?;
            let rounded = sdp::extract_rank_one(&solution, &problem, rng, candidates);
            report(rounded.phases, Some(solution.objective_value), Some(solution))
        }
    }
}

/// Phases from the leading eigenvector of `B`, or all ones if that is
/// better. Used when the SDP solver fails.
pub fn leading_eigenvector_phases(b: &FisherMatrix) -> PhaseVector {
    let (_, vectors) = linalg::hermitian_eigen_desc(b.matrix());
    let eig = PhaseVector::normalize(vectors.column(0).as_slice());
    let ones = PhaseVector::ones(b.dim());
    if b.quad_form(&ones) > b.quad_form(&eig) {
        ones
    } else {
        eig
    }
}

/// One ideal feedback cycle: the fusion center forms `B` from the known
/// channel, picks phases, and the sensors adopt them.
pub fn feedback_round<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    scenario: &Scenario,
    strategy: &PhaseStrategy,
    rng: &mut R,
) -> Result<OptimizationReport> {
    let b = estimator::fisher_matrix(channel, scenario)?;
    optimize_phases(&b, strategy, rng)
}
