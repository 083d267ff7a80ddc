mod common;

use num_complex::Complex64;
use phasefuse::channel::{self, Interval, ScenarioTemplate};
use phasefuse::estimator::{self, PhaseVector};
use phasefuse::linalg::{self, CMatrix};
use phasefuse::montecarlo::{
    self, ConcentrationConfig, ConcentrationMode, ExperimentConfig, SweepKind,
};
use phasefuse::{PhaseStrategy, RngStream, StrategyKind};
use rand::Rng;

#[test]
fn received_noise_covariance_matches_model() {
    let mut rng = common::rng(21);
    let inst = common::instance(5, 3, &mut rng);
    let a = PhaseVector::from_phases(&[0.3, 1.1, -2.0, 0.0, 2.5]);
    let mean = &inst.channel.matrix * a.to_vector() * inst.scenario.theta;
    let draws = 10_000;
    let mut acc = CMatrix::zeros(3, 3);
    for _ in 0..draws {
        let y = channel::synthesize_received_signal(&inst.scenario, &inst.channel, &a, &mut rng).unwrap();
        let e = y - &mean;
        acc += &e * e.adjoint();
    }
    let sample = acc / Complex64::new(draws as f64, 0.0);
    let model = estimator::noise_covariance(&inst.channel, &inst.scenario).unwrap();
    let eig = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&(&sample - &model)));
    let err = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    assert!(err <= 0.05 * linalg::lambda_max(&model), "spectral error {err}");
}

#[test]
fn noiseless_scenario_recovers_theta_exactly() {
    let mut rng = common::rng(3);
    let mut inst = common::instance(4, 4, &mut rng);
    inst.scenario.fc_noise_power = 0.0;
    inst.scenario.sensor_noise_powers = vec![0.0; 4];
    inst.scenario.theta = Complex64::new(0.7, -1.3);
    let a = PhaseVector::from_phases(&[0.0, 1.0, 2.0, 3.0]);
    let rep = montecarlo::verify_unbiasedness(&inst.scenario, &inst.channel, &a, 1000, &mut rng).unwrap();
    assert_eq!(rep.predicted_variance, 0.0);
    assert!(rep.sample_variance <= 1e-28);
    assert!((rep.sample_mean - inst.scenario.theta).norm() <= 1e-14);
}

#[test]
fn unbiasedness_needs_enough_trials() {
    let mut rng = common::rng(3);
    let inst = common::instance(2, 2, &mut rng);
    let a = PhaseVector::ones(2);
    assert!(montecarlo::verify_unbiasedness(&inst.scenario, &inst.channel, &a, 999, &mut rng).is_err());
}

#[test]
fn ml_estimate_matches_variance_law() {
    let mut rng = common::rng(99);
    let inst = common::instance(3, 2, &mut rng);
    let a = phasefuse::phase_opt::leading_eigenvector_phases(&inst.fisher);
    let rep = montecarlo::verify_unbiasedness(&inst.scenario, &inst.channel, &a, 10_000, &mut rng).unwrap();
    assert!(rep.mean_z <= 4.0, "{rep:?}");
    assert!((rep.variance_ratio - 1.0).abs() <= 0.1, "{rep:?}");
}

#[test]
fn scalar_sweep_matches_closed_form_per_trial() {
    let config = ExperimentConfig {
        sweep: SweepKind::SensorSweep,
        sweep_values: vec![1],
        fixed_count: 1,
        trials: 50,
        master_seed: 17,
        strategies: vec![PhaseStrategy::AllOnes],
        ..ExperimentConfig::fig1()
    };
    let result = montecarlo::run_sweep(&config).unwrap();
    let t = &ScenarioTemplate::default();
    let mut expected = Vec::new();
    for trial in 0..config.trials {
        let mut rng = RngStream::new(17, trial as u64).rng();
        let d = t.distance_range.low + (t.distance_range.high - t.distance_range.low) * rng.random::<f64>();
        let sv = t.sensor_noise_range.low + (t.sensor_noise_range.high - t.sensor_noise_range.low) * rng.random::<f64>();
        expected.push(d * d * t.fc_noise_power + sv);
    }
    let want = expected.iter().sum::<f64>() / expected.len() as f64;
    let got = result.points[0].strategy(StrategyKind::AllOnes).unwrap().mean_variance;
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let config = ExperimentConfig {
        sweep_values: vec![2, 5, 9],
        trials: 12,
        master_seed: 42,
        ..ExperimentConfig::fig1()
    };
    let one = montecarlo::run_sweep_with_threads(&config, Some(1)).unwrap();
    let four = montecarlo::run_sweep_with_threads(&config, Some(4)).unwrap();
    assert_eq!(one, four);
    let mut fixed = config.clone();
    fixed.resample_scenario_per_trial = false;
    assert_eq!(
        montecarlo::run_sweep_with_threads(&fixed, Some(3)).unwrap(),
        montecarlo::run_sweep_with_threads(&fixed, Some(1)).unwrap()
    );
}

#[test]
fn sweep_ordering_holds_per_point() {
    let config = ExperimentConfig {
        sweep: SweepKind::AntennaSweep,
        sweep_values: vec![1, 4, 16],
        fixed_count: 5,
        trials: 40,
        master_seed: 8,
        ..ExperimentConfig::fig1()
    };
    let result = montecarlo::run_sweep(&config).unwrap();
    assert!(!result.degraded());
    for p in &result.points {
        let sdp = p.strategy(StrategyKind::SdpRelaxation).unwrap();
        let ones = p.strategy(StrategyKind::AllOnes).unwrap();
        assert!(p.lower_bound_mean <= sdp.mean_variance);
        assert!(sdp.mean_variance <= ones.mean_variance + 2.0 * ones.std_err);
    }
}

#[test]
fn concentration_at_ten_thousand_sensors() {
    let report = montecarlo::verify_diagonal_concentration(&ConcentrationConfig {
        counts: vec![10_000],
        draws: 50,
        ..ConcentrationConfig::default()
    })
    .unwrap();
    let frac = report.points[0].fraction_within.unwrap();
    assert!(frac >= 0.9, "fraction {frac}");
}

#[test]
fn single_antenna_concentration_is_not_applicable() {
    let report = montecarlo::verify_diagonal_concentration(&ConcentrationConfig {
        mode: ConcentrationMode::AntennaAveraging,
        counts: vec![1, 64, 128],
        fixed_count: 4,
        draws: 40,
        ..ConcentrationConfig::default()
    })
    .unwrap();
    assert!(!report.points[0].applicable);
    assert!(report.points[0].median.is_none());
    assert!(report.points[1].median.unwrap() > report.points[2].median.unwrap());
}

#[test]
fn degenerate_interval_is_allowed() {
    let template = ScenarioTemplate {
        sensor_noise_range: Interval::new(1e-5, 1e-5),
        ..ScenarioTemplate::default()
    };
    let mut rng = common::rng(1);
    let s = channel::sample_scenario(&template, 3, 2, &mut rng).unwrap();
    assert!(s.sensor_noise_powers.iter().all(|&v| v == 1e-5));
}
