//! Seeded sweeps over the sensor or antenna count, plus the statistical
//! checks behind the estimator and the concentration arguments.
//!
//! Every trial draws from its own [`RngStream`] `(master_seed, point *
//! trials + trial)`, trials run on a rayon pool, and per-point aggregates
//! are pairwise sums in trial order. The result therefore does not depend on
//! the number of worker threads.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, AsymptoticInputs};
use crate::channel::{self, ChannelRealization, Scenario, ScenarioTemplate};
use crate::error::{Error, Result};
use crate::estimator::{self, MlEstimator, PhaseVector};
use crate::linalg::{pairwise_sum, CMatrix};
use crate::phase_opt::{self, PhaseStrategy};
use crate::rng::RngStream;

/// Stream holding the single deployment used when scenarios are not redrawn
/// every trial. Trial streams never reach it.
const FIXED_SCENARIO_STREAM: u64 = 1 << 63;

/// Fraction of failed solves above which a point is marked degraded.
const DEGRADED_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepKind {
    /// Vary `N` with `M` fixed.
    SensorSweep,
    /// Vary `M` with `N` fixed.
    AntennaSweep,
}

impl SweepKind {
    pub fn param_name(&self) -> &'static str {
        match self {
            SweepKind::SensorSweep => "N",
            SweepKind::AntennaSweep => "M",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    pub sweep_values: Vec<usize>,
    /// `M` for a sensor sweep, `N` for an antenna sweep.
    pub fixed_count: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub strategies: Vec<PhaseStrategy>,
    pub scenario_template: ScenarioTemplate,
    pub resample_scenario_per_trial: bool,
    pub include_asymptotics: bool,
}

impl ExperimentConfig {
    /// Variance against `N` for `M = 4`, `N = 2, 4, ..., 30`.
    pub fn fig1() -> Self {
        Self {
            sweep: SweepKind::SensorSweep,
            sweep_values: (1..=15).map(|k| 2 * k).collect(),
            fixed_count: 4,
            trials: 300,
            master_seed: 0,
            strategies: vec![PhaseStrategy::sdp(), PhaseStrategy::AllOnes],
            scenario_template: ScenarioTemplate::default(),
            resample_scenario_per_trial: true,
            include_asymptotics: true,
        }
    }

    /// Variance against `M` for `N = 4`, `M = 1, 2, 4, ..., 128`.
    pub fn fig2() -> Self {
        Self {
            sweep: SweepKind::AntennaSweep,
            sweep_values: (0..8).map(|k| 1 << k).collect(),
            fixed_count: 4,
            ..Self::fig1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.sweep_values.contains(&0) {
            return Err(Error::Config("sweep values must be positive".into()));
        }
        if self.sweep_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep values must be strictly increasing".into()));
        }
        if self.fixed_count == 0 {
            return Err(Error::Config("fixed count must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        self.scenario_template.validate()?;
        for &v in &self.sweep_values {
            let (n, _) = self.counts(v);
            for s in &self.strategies {
                s.validate_for(n).map_err(|e| Error::Config(format!("{s} at N = {n}: {e}")))?;
            }
        }
        Ok(())
    }

    /// `(N, M)` at a sweep value.
    pub fn counts(&self, value: usize) -> (usize, usize) {
        match self.sweep {
            SweepKind::SensorSweep => (value, self.fixed_count),
            SweepKind::AntennaSweep => (self.fixed_count, value),
        }
    }

    pub fn trial_stream(&self, point: usize, trial: usize) -> RngStream {
        RngStream::new(self.master_seed, (point * self.trials + trial) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: PhaseStrategy,
    pub mean_variance: f64,
    pub std_err: f64,
    /// Trials whose SDP solve failed and fell back to eigenvector rounding.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: usize,
    pub n_sensors: usize,
    pub n_antennas: usize,
    pub strategies: Vec<StrategySummary>,
    pub lower_bound_mean: f64,
    pub lower_bound_std_err: f64,
    pub eq11: Option<f64>,
    pub eq12: Option<f64>,
    pub eq17: Option<f64>,
    pub trials: usize,
    pub degraded: bool,
}

impl SweepPoint {
    pub fn strategy(&self, kind: crate::phase_opt::StrategyKind) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy.kind() == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub sweep: SweepKind,
    pub fixed_count: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn degraded(&self) -> bool {
        self.points.iter().any(|p| p.degraded)
    }
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    variances: Vec<f64>,
    failed: Vec<bool>,
    lower_bound: f64,
    eq11: f64,
    eq12: f64,
    eq17: f64,
}

/// One deployment sized for the largest sweep point. Each point uses its
/// first `N` sensors, so the geometries are nested across the sweep.
fn fixed_deployment(config: &ExperimentConfig) -> Result<Scenario> {
    let (n, m) = config
        .sweep_values
        .iter()
        .map(|&v| config.counts(v))
        .fold((0, 0), |(a, b), (n, m)| (a.max(n), b.max(m)));
    let mut rng = RngStream::new(config.master_seed, FIXED_SCENARIO_STREAM).rng();
    channel::sample_scenario(&config.scenario_template, n, m, &mut rng)
}

fn restrict(deployment: &Scenario, n: usize, m: usize) -> Scenario {
    Scenario {
        n_sensors: n,
        n_antennas: m,
        distances: deployment.distances[..n].to_vec(),
        sensor_noise_powers: deployment.sensor_noise_powers[..n].to_vec(),
        ..deployment.clone()
    }
}

fn run_trial(
    config: &ExperimentConfig,
    deployment: Option<&Scenario>,
    point: usize,
    trial: usize,
) -> Result<TrialOutcome> {
    let (n, m) = config.counts(config.sweep_values[point]);
    let mut rng = config.trial_stream(point, trial).rng();
    let scenario = match deployment {
        None => channel::sample_scenario(&config.scenario_template, n, m, &mut rng)?,
        Some(d) => restrict(d, n, m),
    };
    let channel = channel::generate_channel(&scenario, &mut rng);
    let b = estimator::fisher_matrix(&channel, &scenario)?;
    let lower_bound = estimator::variance_lower_bound(&b, n)?;

    let mut variances = Vec::with_capacity(config.strategies.len());
    let mut failed = Vec::with_capacity(config.strategies.len());
    for strategy in &config.strategies {
        match phase_opt::optimize_phases(&b, strategy, &mut rng) {
            Ok(report) => {
                variances.push(report.achieved_variance);
                failed.push(false);
            }
            Err(Error::NotConverged { .. }) => {
                let fallback = phase_opt::leading_eigenvector_phases(&b);
                variances.push(estimator::estimator_variance(&fallback, &b)?);
                failed.push(true);
            }
            Err(e) => return Err(e),
        }
    }

    let inputs = AsymptoticInputs::from(&scenario);
    Ok(TrialOutcome {
        variances,
        failed,
        lower_bound,
        eq11: asymptotics::large_n_lower_bound(&inputs),
        eq12: asymptotics::single_antenna_upper_bound(&inputs),
        eq17: asymptotics::large_m_variance(&inputs),
    })
}

/// Mean and standard error (sample standard deviation over `sqrt(T)`).
pub fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    let mean = pairwise_sum(xs) / t;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (t - 1.0);
    (mean, (var / t).sqrt())
}

fn summarize(config: &ExperimentConfig, point: usize, outcomes: &[TrialOutcome]) -> SweepPoint {
    let value = config.sweep_values[point];
    let (n_sensors, n_antennas) = config.counts(value);
    let column = |f: &dyn Fn(&TrialOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };

    let strategies: Vec<StrategySummary> = config
        .strategies
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let (mean_variance, std_err) = mean_and_std_err(&column(&|o| o.variances[k]));
            StrategySummary {
                strategy: *s,
                mean_variance,
                std_err,
                failures: outcomes.iter().filter(|o| o.failed[k]).count(),
            }
        })
        .collect();
    let (lower_bound_mean, lower_bound_std_err) = mean_and_std_err(&column(&|o| o.lower_bound));
    let asym = |f: &dyn Fn(&TrialOutcome) -> f64| {
        config
            .include_asymptotics
            .then(|| mean_and_std_err(&column(f)).0)
    };
    let worst_failures = strategies.iter().map(|s| s.failures).max().unwrap_or(0);
    SweepPoint {
        value,
        n_sensors,
        n_antennas,
        lower_bound_mean,
        lower_bound_std_err,
        eq11: asym(&|o| o.eq11),
        eq12: asym(&|o| o.eq12),
        eq17: asym(&|o| o.eq17),
        trials: outcomes.len(),
        degraded: worst_failures as f64 > DEGRADED_FAILURE_FRACTION * outcomes.len() as f64,
        strategies,
    }
}

/// Runs the sweep on the current rayon pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let deployment = if config.resample_scenario_per_trial {
        None
    } else {
        Some(fixed_deployment(config)?)
    };
    let jobs: Vec<(usize, usize)> = (0..config.sweep_values.len())
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(config, deployment.as_ref(), p, t))
        .collect::<Result<Vec<_>>>()?;
    let points = outcomes
        .chunks(config.trials)
        .enumerate()
        .map(|(p, chunk)| summarize(config, p, chunk))
        .collect();
    Ok(SweepResult {
        sweep: config.sweep,
        fixed_count: config.fixed_count,
        points,
    })
}

/// Runs the sweep on a dedicated pool of `threads` workers (`None` uses the
/// global pool).
pub fn run_sweep_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepResult> {
    match threads {
        None => run_sweep(config),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build a {k}-thread pool: {e}")))?;
            pool.install(|| run_sweep(config))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub trials: usize,
    pub theta: Complex64,
    pub sample_mean: Complex64,
    /// `sum |theta_hat - mean|^2 / (T - 1)`, real plus imaginary parts.
    pub sample_variance: f64,
    /// `1 / (a^H B a)`.
    pub predicted_variance: f64,
    /// `|mean - theta| / sqrt(predicted / T)`.
    pub mean_z: f64,
    /// Real and imaginary mean errors, each over its own standard error.
    pub z_re: f64,
    pub z_im: f64,
    pub variance_ratio: f64,
}

/// Draws `trials` snapshots over a fixed channel and compares the ML
/// estimates with the predicted variance.
pub fn verify_unbiasedness<R: Rng + ?Sized>(
    scenario: &Scenario,
    channel: &ChannelRealization,
    a: &PhaseVector,
    trials: usize,
    rng: &mut R,
) -> Result<UnbiasednessReport> {
    if trials < 1000 {
        return Err(Error::Usage(format!("unbiasedness check needs at least 1000 trials, got {trials}")));
    }
    let est = MlEstimator::new(channel, scenario, a)?;
    let mut re = Vec::with_capacity(trials);
    let mut im = Vec::with_capacity(trials);
    for _ in 0..trials {
        let y = channel::synthesize_received_signal(scenario, channel, a, rng)?;
        let theta_hat = est.estimate(&y)?;
        re.push(theta_hat.re);
        im.push(theta_hat.im);
    }
    let t = trials as f64;
    let (mean_re, se_re) = mean_and_std_err(&re);
    let (mean_im, se_im) = mean_and_std_err(&im);
    let sample_variance = (se_re * se_re + se_im * se_im) * t;
    let predicted_variance = est.variance();
    let sample_mean = Complex64::new(mean_re, mean_im);
    let err = sample_mean - scenario.theta;
    let z = |e: f64, se: f64| if se > 0.0 { e / se } else if e == 0.0 { 0.0 } else { f64::INFINITY };
    let pred_se = (predicted_variance / t).sqrt();
    Ok(UnbiasednessReport {
        trials,
        theta: scenario.theta,
        sample_mean,
        sample_variance,
        predicted_variance,
        mean_z: z(err.norm(), pred_se),
        z_re: z(err.re, se_re),
        z_im: z(err.im, se_im),
        variance_ratio: if predicted_variance > 0.0 {
            sample_variance / predicted_variance
        } else {
            f64::NAN
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConcentrationMode {
    /// `(1/N) H V H^H` over growing `N` with `M` fixed.
    SensorAveraging,
    /// `(1/M) H^H H` over growing `M` with `N` fixed.
    AntennaAveraging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub mode: ConcentrationMode,
    /// Values of the averaged dimension.
    pub counts: Vec<usize>,
    /// The other dimension.
    pub fixed_count: usize,
    pub draws: usize,
    pub master_seed: u64,
    pub scenario_template: ScenarioTemplate,
    /// Reported fraction is of draws with relative off-diagonal at most this.
    pub threshold: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            mode: ConcentrationMode::SensorAveraging,
            counts: vec![100, 200, 400, 800, 1600],
            fixed_count: 4,
            draws: 200,
            master_seed: 0,
            scenario_template: ScenarioTemplate::default(),
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationPoint {
    pub count: usize,
    /// `false` when the matrix has no off-diagonal entries to average.
    pub applicable: bool,
    /// Per-draw `max |S_mn| / mean_k S_kk` over `m != n`.
    pub relative_off_diagonal: Vec<f64>,
    pub median: Option<f64>,
    pub fraction_within: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub mode: ConcentrationMode,
    pub points: Vec<ConcentrationPoint>,
    /// `median(count) / median(2 count)` for each consecutive pair where the
    /// count doubles.
    pub doubling_factors: Vec<(usize, f64)>,
}

fn relative_off_diagonal(s: &CMatrix) -> f64 {
    let k = s.nrows();
    let mean_diag = (0..k).map(|i| s[(i, i)].re).sum::<f64>() / k as f64;
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                worst = worst.max(s[(i, j)].norm());
            }
        }
    }
    worst / mean_diag
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Measures how fast the off-diagonal part of the averaged Gram matrices
/// vanishes relative to the diagonal.
pub fn verify_diagonal_concentration(config: &ConcentrationConfig) -> Result<ConcentrationReport> {
    config.scenario_template.validate()?;
    if config.draws == 0 || config.counts.is_empty() || config.fixed_count == 0 || config.counts.contains(&0) {
        return Err(Error::Config("concentration check needs positive counts and draws".into()));
    }
    let points = config
        .counts
        .iter()
        .enumerate()
        .map(|(p, &count)| {
            let (n, m) = match config.mode {
                ConcentrationMode::SensorAveraging => (count, config.fixed_count),
                ConcentrationMode::AntennaAveraging => (config.fixed_count, count),
            };
            let side = match config.mode {
                ConcentrationMode::SensorAveraging => m,
                ConcentrationMode::AntennaAveraging => n,
            };
            let applicable = side >= 2
                && !(config.mode == ConcentrationMode::AntennaAveraging && m == 1);
            if !applicable {
                return Ok(ConcentrationPoint {
                    count,
                    applicable,
                    relative_off_diagonal: Vec::new(),
                    median: None,
                    fraction_within: None,
                });
            }
            let rel = (0..config.draws)
                .into_par_iter()
                .map(|k| {
                    let mut rng = RngStream::new(config.master_seed, (p * config.draws + k) as u64).rng();
                    let scenario = channel::sample_scenario(&config.scenario_template, n, m, &mut rng)?;
                    let h = channel::generate_channel(&scenario, &mut rng).matrix;
                    let s = match config.mode {
                        ConcentrationMode::SensorAveraging => {
                            let mut hv = h.clone();
                            for (i, &sv) in scenario.sensor_noise_powers.iter().enumerate() {
                                hv.column_mut(i).scale_mut(sv);
                            }
                            hv * h.adjoint() / Complex64::new(n as f64, 0.0)
                        }
                        ConcentrationMode::AntennaAveraging => {
                            h.adjoint() * &h / Complex64::new(m as f64, 0.0)
                        }
                    };
                    Ok(relative_off_diagonal(&s))
                })
                .collect::<Result<Vec<f64>>>()?;
            let within = rel.iter().filter(|&&r| r <= config.threshold).count() as f64 / rel.len() as f64;
            Ok(ConcentrationPoint {
                count,
                applicable,
                median: Some(median(&rel)),
                fraction_within: Some(within),
                relative_off_diagonal: rel,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let doubling_factors = points
        .windows(2)
        .filter_map(|w| match (w[0].median, w[1].median) {
            (Some(a), Some(b)) if w[1].count == 2 * w[0].count && b > 0.0 => Some((w[0].count, a / b)),
            _ => None,
        })
        .collect();
    Ok(ConcentrationReport {
        mode: config.mode,
        points,
        doubling_factors,
    })
}
