//! Quick consistency checks shipped with the binary.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::asymptotics::{self, AsymptoticInputs};
use crate::channel::{self, ScenarioTemplate};
use crate::error::Result;
use crate::estimator::{self, FisherMatrix, PhaseVector};
use crate::linalg::CMatrix;
use crate::montecarlo;
use crate::phase_opt::{self, PhaseStrategy};
use crate::rng::RngStream;

type Check = (&'static str, Box<dyn Fn(u64) -> Result<(bool, String)>>);

fn closed_form_two_sensors(seed: u64) -> Result<(bool, String)> {
    let off = Complex64::from_polar(0.5, PI / 3.0);
    let one = Complex64::new(1.0, 0.0);
    let b = FisherMatrix::from_matrix(CMatrix::from_row_slice(2, 2, &[one, off, off.conj(), one]))?;
    let r = phase_opt::optimize_phases(&b, &PhaseStrategy::sdp(), &mut RngStream::new(seed, 0).rng())?;
    let q = 1.0 / r.achieved_variance;
    Ok(((q - 3.0).abs() < 1e-6, format!("a^H B a = {q:.12}, expected 3")))
}

fn dual_formula(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let mut rng = RngStream::new(seed, k).rng();
        let s = channel::sample_scenario(&ScenarioTemplate::default(), 4, 6, &mut rng)?;
        let h = channel::generate_channel(&s, &mut rng);
        let d = estimator::fisher_matrix_direct(&h, &s)?;
        let w = estimator::fisher_matrix_woodbury(&h, &s)?;
        worst = worst.max((d.matrix() - w.matrix()).norm() / d.matrix().norm());
    }
    Ok((worst <= 1e-10, format!("max relative Frobenius error {worst:.2e}")))
}

fn grid_oracle(seed: u64) -> Result<(bool, String)> {
    let instances = 20;
    let mut within = 0;
    for k in 0..instances {
        let mut rng = RngStream::new(seed, 1000 + k).rng();
        let s = channel::sample_scenario(&ScenarioTemplate::default(), 3, 2, &mut rng)?;
        let h = channel::generate_channel(&s, &mut rng);
        let b = estimator::fisher_matrix(&h, &s)?;
        let grid = phase_opt::optimize_phases(&b, &PhaseStrategy::grid(), &mut rng)?;
        let sdp = phase_opt::optimize_phases(&b, &PhaseStrategy::sdp(), &mut rng)?;
        if sdp.achieved_variance <= 1.01 * grid.achieved_variance {
            within += 1;
        }
    }
    Ok((within * 100 >= 95 * instances, format!("{within}/{instances} within 1% of the grid")))
}

fn relaxation_sandwich(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed, 2000).rng();
    let s = channel::sample_scenario(&ScenarioTemplate::default(), 8, 4, &mut rng)?;
    let h = channel::generate_channel(&s, &mut rng);
    let b = estimator::fisher_matrix(&h, &s)?;
    let r = phase_opt::optimize_phases(&b, &PhaseStrategy::sdp(), &mut rng)?;
    let relaxed = 1.0 / r.relaxation_value.unwrap_or(f64::NAN);
    let slack = 1e-8;
    let ok = r.lower_bound <= relaxed + slack && relaxed <= r.achieved_variance + slack;
    Ok((
        ok,
        format!(
            "bound {:.6e} <= relaxed {:.6e} <= achieved {:.6e}",
            r.lower_bound, relaxed, r.achieved_variance
        ),
    ))
}

fn ratio_identity(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let mut rng = RngStream::new(seed, 3000 + k).rng();
        let s = channel::sample_scenario(&ScenarioTemplate::default(), 10, 2, &mut rng)?;
        let x = AsymptoticInputs::from(&s);
        let r = asymptotics::bound_ratio(&x);
        let direct = asymptotics::large_n_lower_bound(&x) / asymptotics::single_antenna_upper_bound(&x);
        worst = worst.max((r.ratio - direct).abs()).max((r.ratio - r.direct).abs());
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

fn unbiasedness(seed: u64) -> Result<(bool, String)> {
    let mut rng = RngStream::new(seed, 4000).rng();
    let s = channel::sample_scenario(&ScenarioTemplate::default(), 4, 4, &mut rng)?;
    let h = channel::generate_channel(&s, &mut rng);
    let rep = montecarlo::verify_unbiasedness(&s, &h, &PhaseVector::ones(4), 10_000, &mut rng)?;
    let ok = rep.mean_z <= 4.0 && (rep.variance_ratio - 1.0).abs() <= 0.1;
    Ok((
        ok,
        format!("mean z = {:.2}, variance ratio = {:.4}", rep.mean_z, rep.variance_ratio),
    ))
}

/// Prints one line per check and returns whether all passed.
pub fn run<W: Write + ?Sized>(seed: u64, out: &mut W) -> io::Result<bool> {
    let checks: Vec<Check> = vec![
        ("two-sensor closed form", Box::new(closed_form_two_sensors)),
        ("inversion-lemma identity", Box::new(dual_formula)),
        ("grid oracle agreement", Box::new(grid_oracle)),
        ("relaxation sandwich", Box::new(relaxation_sandwich)),
        ("bound ratio identity", Box::new(ratio_identity)),
        ("ML unbiasedness", Box::new(unbiasedness)),
    ];
    let mut all = true;
    for (name, check) in &checks {
        let (ok, detail) = match check(seed) {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        all &= ok;
        writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })?;
    }
    Ok(all)
}
