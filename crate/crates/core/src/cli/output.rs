//! CSV/JSON records for sweep results and the companion plotting script.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::montecarlo::{SweepKind, SweepResult};

pub const CSV_HEADER: [&str; 11] = [
    "sweep_param",
    "value",
    "strategy",
    "mean_variance",
    "std_err",
    "lower_bound_mean",
    "eq11",
    "eq12",
    "eq17",
    "trials",
    "failures",
];

/// One `(point, strategy)` record; the JSON form uses the CSV header names
/// as keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub sweep_param: String,
    pub value: usize,
    pub strategy: String,
    pub mean_variance: f64,
    pub std_err: f64,
    pub lower_bound_mean: f64,
    pub eq11: Option<f64>,
    pub eq12: Option<f64>,
    pub eq17: Option<f64>,
    pub trials: usize,
    pub failures: usize,
}

pub fn rows(result: &SweepResult) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for p in &result.points {
        for s in &p.strategies {
            out.push(CsvRow {
                sweep_param: result.sweep.param_name().to_string(),
                value: p.value,
                strategy: s.strategy.name().to_string(),
                mean_variance: s.mean_variance,
                std_err: s.std_err,
                lower_bound_mean: p.lower_bound_mean,
                eq11: p.eq11,
                eq12: p.eq12,
                eq17: p.eq17,
                trials: p.trials,
                failures: s.failures,
            });
        }
    }
    out
}

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub(crate) fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header and one row per `(point, strategy)`. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_csv<W: Write + ?Sized>(result: &SweepResult, out: &mut W) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows(result) {
        w.write_record([
            r.sweep_param,
            r.value.to_string(),
            r.strategy,
            r.mean_variance.to_string(),
            r.std_err.to_string(),
            r.lower_bound_mean.to_string(),
            opt(r.eq11),
            opt(r.eq12),
            opt(r.eq17),
            r.trials.to_string(),
            r.failures.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

pub fn write_json<W: Write + ?Sized>(result: &SweepResult, out: &mut W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, &rows(result)).map_err(io::Error::other)?;
    writeln!(out)
}

/// Python/matplotlib script plotting every strategy plus the bound and
/// asymptote columns on a log-y axis. `csv_name` is resolved relative to
/// the script's own directory.
pub fn plot_script(result: &SweepResult, csv_name: &str) -> String {
    let (xlabel, title, asymptotes) = match result.sweep {
        SweepKind::SensorSweep => (
            "number of sensors N",
            format!("ML estimator variance, M = {}", result.fixed_count),
            "[(\"eq11\", \"large-N lower bound\"), (\"eq12\", \"single-antenna bound\")]",
        ),
        SweepKind::AntennaSweep => (
            "number of antennas M",
            format!("ML estimator variance, N = {}", result.fixed_count),
            "[(\"eq17\", \"large-M approximation\")]",
        ),
    };
    let logx = matches!(result.sweep, SweepKind::AntennaSweep);
    format!(
        r#"#!/usr/bin/env python3
# Generated by phasefuse. Reads the sweep CSV next to this script.
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CSV_PATH = os.path.join(HERE, {csv:?})
OUT_PATH = sys.argv[1] if len(sys.argv) > 1 else os.path.splitext(CSV_PATH)[0] + ".png"
ASYMPTOTES = {asymptotes}

with open(CSV_PATH, newline="") as f:
    rows = list(csv.DictReader(f))

curves = {{}}
bounds = {{}}
extra = {{key: {{}} for key, _ in ASYMPTOTES}}
for r in rows:
    x = int(r["value"])
    curves.setdefault(r["strategy"], []).append((x, float(r["mean_variance"])))
    bounds[x] = float(r["lower_bound_mean"])
    for key, _ in ASYMPTOTES:
        if r[key] != "":
            extra[key][x] = float(r[key])

fig, ax = plt.subplots(figsize=(6, 4.5))
for name in sorted(curves):
    pts = sorted(curves[name])
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
xs = sorted(bounds)
ax.plot(xs, [bounds[x] for x in xs], "k--", label="eigenvalue lower bound")
for key, label in ASYMPTOTES:
    pts = sorted(extra[key].items())
    if pts:
        ax.plot([p[0] for p in pts], [p[1] for p in pts], linestyle=":", label=label)
ax.set_yscale("log")
{logx}ax.set_xlabel({xlabel:?})
ax.set_ylabel("variance")
ax.set_title({title:?})
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(OUT_PATH, dpi=150)
print(OUT_PATH)
"#,
        csv = csv_name,
        asymptotes = asymptotes,
        logx = if logx { "ax.set_xscale(\"log\", base=2)\n" } else { "" },
        xlabel = xlabel,
        title = title,
    )
}

/// Writes [`plot_script`] to `script_path`, pointing at `csv_path`.
pub fn emit_plot_script(result: &SweepResult, csv_path: &Path, script_path: &Path) -> io::Result<()> {
    let script_dir = script_path.parent().filter(|p| !p.as_os_str().is_empty());
    let csv_dir = csv_path.parent().filter(|p| !p.as_os_str().is_empty());
    let csv_name = if script_dir == csv_dir {
        csv_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        std::path::absolute(csv_path)?.to_string_lossy().into_owned()
    };
    std::fs::write(script_path, plot_script(result, &csv_name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{StrategySummary, SweepPoint};
    use crate::phase_opt::PhaseStrategy;

    fn point(value: usize, eq17: Option<f64>) -> SweepPoint {
        SweepPoint {
            value,
            n_sensors: 4,
            n_antennas: value,
            strategies: vec![
                StrategySummary {
                    strategy: PhaseStrategy::sdp(),
                    mean_variance: 0.1 + 1.0 / 3.0,
                    std_err: 1e-5 / 7.0,
                    failures: 0,
                },
                StrategySummary {
                    strategy: PhaseStrategy::AllOnes,
                    mean_variance: std::f64::consts::PI * 1e-4,
                    std_err: 2.5e-6,
                    failures: 1,
                },
            ],
            lower_bound_mean: 1e-300,
            lower_bound_std_err: 0.0,
            eq11: None,
            eq12: None,
            eq17,
            trials: 10,
            degraded: false,
        }
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let r = SweepResult {
            sweep: SweepKind::SensorSweep,
            fixed_count: 4,
            points: vec![],
        };
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn one_point_two_strategies() {
        let r = SweepResult {
            sweep: SweepKind::AntennaSweep,
            fixed_count: 4,
            points: vec![point(8, Some(0.0035))],
        };
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(!text.contains('\r'));
        assert!(text.lines().nth(1).unwrap().starts_with("M,8,sdp,"));
        // Absent asymptotes are empty fields.
        assert!(text.lines().nth(1).unwrap().contains(",,,0.0035,"));
    }

    #[test]
    fn json_uses_header_keys() {
        let r = SweepResult {
            sweep: SweepKind::AntennaSweep,
            fixed_count: 4,
            points: vec![point(2, None)],
        };
        let mut buf = Vec::new();
        write_json(&r, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v[0].as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort();
        let mut want = CSV_HEADER.to_vec();
        want.sort();
        assert_eq!(keys, want);
        assert!(obj["eq17"].is_null());
    }

    #[test]
    fn plot_script_mentions_columns_and_is_stable() {
        let fig2 = SweepResult {
            sweep: SweepKind::AntennaSweep,
            fixed_count: 4,
            points: vec![point(2, Some(0.01))],
        };
        let s = plot_script(&fig2, "fig2.csv");
        for col in ["mean_variance", "lower_bound_mean", "strategy", "eq17", "\"fig2.csv\""] {
            assert!(s.contains(col), "{col}");
        }
        assert_eq!(s, plot_script(&fig2, "fig2.csv"));
        let fig1 = SweepResult {
            sweep: SweepKind::SensorSweep,
            ..fig2
        };
        let s = plot_script(&fig1, "fig1.csv");
        assert!(s.contains("eq11") && s.contains("eq12"));
    }
}
