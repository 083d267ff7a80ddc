//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on runtime or I/O failure, 2 on usage errors.

pub mod output;
mod selftest;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel::{self, Interval, ScenarioTemplate};
use crate::error::Error;
use crate::estimator;
use crate::montecarlo::{self, ExperimentConfig};
use crate::phase_opt::{self, PhaseStrategy, GRID_ORACLE_MAX_SENSORS};
use crate::rng::RngStream;

pub use output::{emit_plot_script, plot_script, write_csv, write_json, CsvRow, CSV_HEADER};

/// Environment variable overriding the worker count of sweeps.
pub const THREADS_ENV: &str = "PHASEFUSE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "phasefuse",
    version,
    about = "Phase-optimized analog sensor fusion with a multi-antenna receiver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Variance against the number of sensors (M fixed, default 4).
    Fig1(Options),
    /// Variance against the number of antennas (N fixed, default 4).
    Fig2(Options),
    /// Optimize one random instance with every applicable strategy.
    Run(Options),
    /// Compare SDP rounding against the exhaustive phase grid.
    Oracle(Options),
    /// Run the built-in consistency checks.
    Selftest(Options),
}

impl Command {
    pub fn options(&self) -> &Options {
        match self {
            Command::Fig1(o) | Command::Fig2(o) | Command::Run(o) | Command::Oracle(o) | Command::Selftest(o) => o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// `lo,hi` pair of positive reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeArg(pub Interval);

impl FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| format!("expected 'lo,hi', got '{s}'"))?;
        let lo: f64 = lo.trim().parse().map_err(|e| format!("bad low endpoint '{lo}': {e}"))?;
        let hi: f64 = hi.trim().parse().map_err(|e| format!("bad high endpoint '{hi}': {e}"))?;
        let iv = Interval::new(lo, hi);
        iv.validate("range").map_err(|e| e.to_string())?;
        Ok(RangeArg(iv))
    }
}

/// Comma-separated strategy names.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyList(pub Vec<PhaseStrategy>);

/// Comma-separated positive counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountList(pub Vec<usize>);

fn parse_strategies(s: &str) -> Result<StrategyList, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.parse::<PhaseStrategy>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.is_empty() {
                Err("empty strategy list".into())
            } else {
                Ok(StrategyList(v))
            }
        })
}

fn parse_counts(s: &str) -> Result<CountList, String> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(0) => Err("counts must be positive".to_string()),
            Ok(v) => Ok(v),
            Err(e) => Err(format!("bad count '{t}': {e}")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(CountList)
}

fn positive_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn nonnegative_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be nonnegative"))
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct Options {
    /// Number of sensors N.
    #[arg(long, allow_hyphen_values = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub sensors: Option<u64>,
    /// Number of fusion-center antennas M.
    #[arg(long, allow_hyphen_values = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub antennas: Option<u64>,
    /// Trials per sweep point (instances for `oracle`).
    #[arg(long, default_value_t = 300, allow_hyphen_values = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Master seed.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub seed: u64,
    /// Path-loss exponent.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true, value_parser = nonnegative_real)]
    pub alpha: f64,
    /// Fusion-center noise power.
    #[arg(long = "fc-noise", default_value_t = 0.1, allow_hyphen_values = true, value_parser = positive_real)]
    pub fc_noise: f64,
    /// Sensor distance range `lo,hi`.
    #[arg(long = "dist-range", default_value = "2,7", allow_hyphen_values = true)]
    pub dist_range: RangeArg,
    /// Sensor noise power range `lo,hi`.
    #[arg(long = "sensor-noise-range", default_value = "0.001,0.01", allow_hyphen_values = true)]
    pub sensor_noise_range: RangeArg,
    /// Comma-separated strategies: sdp, all-ones, closed-form, grid.
    #[arg(long, value_parser = parse_strategies)]
    pub strategies: Option<StrategyList>,
    /// Redraw distances and noise powers every trial.
    #[arg(long = "resample-per-trial", default_value_t = true, action = clap::ArgAction::Set)]
    pub resample_per_trial: bool,
    /// Comma-separated sweep values (overrides the default grid).
    #[arg(long, value_parser = parse_counts)]
    pub sweep: Option<CountList>,
    /// Output file (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write a plotting script that reads the CSV given by --output.
    #[arg(long = "emit-plot-script")]
    pub emit_plot_script: Option<PathBuf>,
}

impl Options {
    pub fn template(&self) -> ScenarioTemplate {
        ScenarioTemplate {
            path_loss_exp: self.alpha,
            fc_noise_power: self.fc_noise,
            distance_range: self.dist_range.0,
            sensor_noise_range: self.sensor_noise_range.0,
            ..ScenarioTemplate::default()
        }
    }

    /// Sweep configuration for `fig1`/`fig2` with flags applied.
    pub fn experiment(&self, base: ExperimentConfig) -> ExperimentConfig {
        let fixed = match base.sweep {
            montecarlo::SweepKind::SensorSweep => self.antennas,
            montecarlo::SweepKind::AntennaSweep => self.sensors,
        };
        ExperimentConfig {
            sweep_values: self.sweep.clone().map_or(base.sweep_values, |c| c.0),
            fixed_count: fixed.map_or(base.fixed_count, |v| v as usize),
            trials: self.trials as usize,
            master_seed: self.seed,
            strategies: self.strategies.clone().map_or(base.strategies, |s| s.0),
            scenario_template: self.template(),
            resample_scenario_per_trial: self.resample_per_trial,
            ..base
        }
    }
}

/// Parses `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv).map(|c| c.command)
}

/// Failure of a CLI invocation, carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Usage(_) => CliError::usage(e.to_string()),
            _ => CliError::runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::runtime(format!("I/O error: {e}"))
    }
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(CliError::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run_figure(opts: &Options, base: ExperimentConfig) -> Result<(), CliError> {
    if opts.emit_plot_script.is_some() && opts.output.is_none() {
        return Err(CliError::usage("--emit-plot-script needs --output so the script can find the CSV"));
    }
    let config = opts.experiment(base);
    let threads = threads_from_env()?;
    let result = montecarlo::run_sweep_with_threads(&config, threads)?;
    for p in result.points.iter().filter(|p| p.degraded) {
        eprintln!(
            "warning: more than 1% of SDP solves failed at {} = {}",
            result.sweep.param_name(),
            p.value
        );
    }
    let mut out = open_output(opts.output.as_deref())?;
    match opts.format {
        Format::Csv => write_csv(&result, &mut out)?,
        Format::Json => write_json(&result, &mut out)?,
    }
    out.flush()?;
    if let (Some(script), Some(csv)) = (&opts.emit_plot_script, &opts.output) {
        emit_plot_script(&result, csv, script)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunRecord {
    strategy: String,
    achieved_variance: f64,
    lower_bound: f64,
    relaxation_value: Option<f64>,
    phases: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sdp: Option<crate::sdp::SdpSolution>,
}

fn run_single(opts: &Options) -> Result<(), CliError> {
    let n = opts.sensors.unwrap_or(4) as usize;
    let m = opts.antennas.unwrap_or(4) as usize;
    let strategies = match &opts.strategies {
        Some(s) => s.0.clone(),
        None => {
            let mut s = vec![PhaseStrategy::sdp(), PhaseStrategy::AllOnes];
            if n == 2 {
                s.push(PhaseStrategy::ClosedFormN2);
            }
            if n <= GRID_ORACLE_MAX_SENSORS {
                s.push(PhaseStrategy::grid());
            }
            s
        }
    };
    for s in &strategies {
        s.validate_for(n)?;
    }
    let mut rng = RngStream::new(opts.seed, 0).rng();
    let scenario = channel::sample_scenario(&opts.template(), n, m, &mut rng)?;
    let channel = channel::generate_channel(&scenario, &mut rng);
    let b = estimator::fisher_matrix(&channel, &scenario)?;

    let mut records = Vec::new();
    for s in &strategies {
        let report = phase_opt::optimize_phases(&b, s, &mut rng)?;
        records.push(RunRecord {
            strategy: s.name().to_string(),
            achieved_variance: report.achieved_variance,
            lower_bound: report.lower_bound,
            relaxation_value: report.relaxation_value,
            phases: report.phases.phases(),
            sdp: report.sdp,
        });
    }

    let mut out = open_output(opts.output.as_deref())?;
    match opts.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &records).map_err(|e| CliError::runtime(e.to_string()))?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(["strategy", "achieved_variance", "lower_bound", "relaxation_value", "phases"])
                .map_err(output::csv_err)?;
            for r in &records {
                let phases: Vec<String> = r.phases.iter().map(|p| p.to_string()).collect();
                w.write_record([
                    r.strategy.clone(),
                    r.achieved_variance.to_string(),
                    r.lower_bound.to_string(),
                    r.relaxation_value.map(|v| v.to_string()).unwrap_or_default(),
                    phases.join(" "),
                ])
                .map_err(output::csv_err)?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_oracle(opts: &Options) -> Result<(), CliError> {
    let n = opts.sensors.unwrap_or(3) as usize;
    let m = opts.antennas.unwrap_or(4) as usize;
    PhaseStrategy::grid().validate_for(n)?;
    let instances = opts.trials as usize;
    let template = opts.template();

    use rayon::prelude::*;
    let rows = (0..instances)
        .into_par_iter()
        .map(|k| -> crate::error::Result<(f64, f64)> {
            let mut rng = RngStream::new(opts.seed, k as u64).rng();
            let scenario = channel::sample_scenario(&template, n, m, &mut rng)?;
            let channel = channel::generate_channel(&scenario, &mut rng);
            let b = estimator::fisher_matrix(&channel, &scenario)?;
            let grid = phase_opt::optimize_phases(&b, &PhaseStrategy::grid(), &mut rng)?;
            let sdp = phase_opt::optimize_phases(&b, &PhaseStrategy::sdp(), &mut rng)?;
            Ok((grid.achieved_variance, sdp.achieved_variance))
        })
        .collect::<crate::error::Result<Vec<_>>>()?;

    let mut out = open_output(opts.output.as_deref())?;
    let within = rows.iter().filter(|(g, s)| *s <= 1.01 * g).count();
    match opts.format {
        Format::Csv => {
            let mut w = output::csv_writer(&mut out);
            w.write_record(["instance", "grid_variance", "sdp_variance", "ratio"])
                .map_err(output::csv_err)?;
            for (k, (g, s)) in rows.iter().enumerate() {
                w.write_record([k.to_string(), g.to_string(), s.to_string(), (s / g).to_string()])
                    .map_err(output::csv_err)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let recs: Vec<_> = rows
                .iter()
                .enumerate()
                .map(|(k, (g, s))| {
                    serde_json::json!({"instance": k, "grid_variance": g, "sdp_variance": s, "ratio": s / g})
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &recs).map_err(|e| CliError::runtime(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    eprintln!(
        "N = {n}, M = {m}: SDP variance within 1% of the grid oracle on {within}/{instances} instances"
    );
    Ok(())
}

/// Executes a parsed command.
pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Fig1(o) => run_figure(o, ExperimentConfig::fig1()),
        Command::Fig2(o) => run_figure(o, ExperimentConfig::fig2()),
        Command::Run(o) => run_single(o),
        Command::Oracle(o) => run_oracle(o),
        Command::Selftest(o) => {
            let mut out = open_output(o.output.as_deref())?;
            let ok = selftest::run(o.seed, &mut out)?;
            out.flush()?;
            if ok {
                Ok(())
            } else {
                Err(CliError::runtime("selftest failed"))
            }
        }
    }
}

/// Entry point used by the binary; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let command = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_defaults() {
        let cmd = parse_args(["phasefuse", "fig1"]).unwrap();
        let Command::Fig1(o) = &cmd else { panic!() };
        let c = o.experiment(ExperimentConfig::fig1());
        assert_eq!(c.fixed_count, 4);
        assert_eq!(c.trials, 300);
        assert_eq!(c.master_seed, 0);
        assert_eq!(c.sweep_values, (1..=15).map(|k| 2 * k).collect::<Vec<_>>());
        assert_eq!(c.scenario_template, ScenarioTemplate::default());
        assert!(c.resample_scenario_per_trial);
    }

    #[test]
    fn run_flags() {
        let cmd = parse_args(["phasefuse", "run", "--sensors", "2", "--antennas", "3", "--seed", "7"]).unwrap();
        let o = cmd.options();
        assert_eq!((o.sensors, o.antennas, o.seed), (Some(2), Some(3), 7));
    }

    #[test]
    fn value_flags_parse() {
        let cmd = parse_args([
            "phasefuse",
            "fig2",
            "--dist-range",
            "1,3",
            "--sensor-noise-range",
            "0.01,0.02",
            "--strategies",
            "sdp,all-ones",
            "--resample-per-trial",
            "false",
            "--format",
            "json",
            "--alpha",
            "2",
        ])
        .unwrap();
        let o = cmd.options();
        assert_eq!(o.dist_range.0, Interval::new(1.0, 3.0));
        assert_eq!(o.strategies.as_ref().unwrap().0.len(), 2);
        assert!(!o.resample_per_trial);
        assert_eq!(o.format, Format::Json);
        assert_eq!(o.alpha, 2.0);
    }

    #[test]
    fn malformed_values_name_the_flag() {
        for (flag, value) in [
            ("--trials", "abc"),
            ("--dist-range", "7,2"),
            ("--fc-noise", "-1"),
            ("--strategies", "magic"),
            ("--seed", "-3"),
        ] {
            let err = parse_args(["phasefuse", "fig1", flag, value]).unwrap_err();
            assert!(err.to_string().contains(flag), "{flag}: {err}");
            assert_eq!(err.exit_code(), 2);
        }
        let err = parse_args(["phasefuse", "fig1", "--bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
