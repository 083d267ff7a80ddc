use std::path::Path;
use std::process::{Command, Output};

use phasefuse::cli::output::{CsvRow, CSV_HEADER};
use phasefuse::montecarlo::{self, ExperimentConfig};

fn phasefuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasefuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(phasefuse(&["run", "--sensors", "2", "--antennas", "3", "--seed", "7"]).status.code(), Some(0));
    assert_eq!(phasefuse(&["fig1", "--bogus"]).status.code(), Some(2));
    assert_eq!(phasefuse(&["fig1", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(phasefuse(&["fig2", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(phasefuse(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(phasefuse(&[]).status.code(), Some(2));
    assert_eq!(phasefuse(&["--help"]).status.code(), Some(0));

    let out = phasefuse(&["run", "--fc-noise", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--fc-noise"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("out.csv");
    let out = phasefuse(&["fig1", "--trials", "1", "--sweep", "2", "--output", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_prints_every_strategy() {
    let out = phasefuse(&["run", "--sensors", "2", "--antennas", "3", "--seed", "7"]);
    let text = stdout(&out);
    for name in ["sdp", "all-ones", "closed-form", "grid"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name},"))), "{name} missing:\n{text}");
    }
    let json = phasefuse(&["run", "--sensors", "4", "--antennas", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert!(v.is_array() || v.is_object());
}

#[test]
fn oracle_table_for_three_sensors() {
    let out = phasefuse(&["oracle", "--sensors", "3", "--trials", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "instance,grid_variance,sdp_variance,ratio");
    assert_eq!(lines.count(), 4);
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let config = ExperimentConfig {
        sweep_values: vec![2, 3, 5],
        trials: 7,
        master_seed: 3,
        ..ExperimentConfig::fig1()
    };
    let result = montecarlo::run_sweep(&config).unwrap();
    let mut buf = Vec::new();
    phasefuse::cli::output::write_csv(&result, &mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
    let parsed: Vec<CsvRow> = rd.deserialize().collect::<Result<_, _>>().unwrap();
    let mut k = 0;
    for p in &result.points {
        for s in &p.strategies {
            let row = &parsed[k];
            assert_eq!(row.mean_variance.to_bits(), s.mean_variance.to_bits());
            assert_eq!(row.std_err.to_bits(), s.std_err.to_bits());
            assert_eq!(row.lower_bound_mean.to_bits(), p.lower_bound_mean.to_bits());
            assert_eq!(row.eq11.map(f64::to_bits), p.eq11.map(f64::to_bits));
            assert_eq!(row.eq17.map(f64::to_bits), p.eq17.map(f64::to_bits));
            k += 1;
        }
    }
    assert_eq!(k, parsed.len());
}

fn emit(dir: &Path, fig: &str) -> (String, String) {
    let csv = dir.join(format!("{fig}.csv"));
    let script = dir.join(format!("{fig}.py"));
    let out = phasefuse(&[
        fig,
        "--trials",
        "2",
        "--sweep",
        "1,2,4",
        "--output",
        csv.to_str().unwrap(),
        "--emit-plot-script",
        script.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    (
        std::fs::read_to_string(&csv).unwrap(),
        std::fs::read_to_string(&script).unwrap(),
    )
}

#[test]
fn plot_script_is_deterministic_and_references_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (csv1, s1) = emit(dir.path(), "fig2");
    let (csv2, s2) = emit(dir.path(), "fig2");
    assert_eq!(csv1, csv2);
    assert_eq!(s1, s2);
    for col in ["mean_variance", "lower_bound_mean", "eq17", "fig2.csv"] {
        assert!(s1.contains(col));
    }
    let (_, s) = emit(dir.path(), "fig1");
    assert!(s.contains("eq11") && s.contains("eq12"));
}

#[test]
fn plot_script_requires_output() {
    let out = phasefuse(&["fig1", "--trials", "1", "--emit-plot-script", "x.py"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let out = phasefuse(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}
