#![allow(dead_code)]

use num_complex::Complex64;
use phasefuse::channel::{self, ChannelRealization, Scenario, ScenarioTemplate};
use phasefuse::estimator::{self, FisherMatrix};
use phasefuse::linalg::CMatrix;
use phasefuse::RngStream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub scenario: Scenario,
    pub channel: ChannelRealization,
    pub fisher: FisherMatrix,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    RngStream::new(seed, 0).rng()
}

pub fn instance<R: Rng>(n: usize, m: usize, rng: &mut R) -> Instance {
    instance_from(&ScenarioTemplate::default(), n, m, rng)
}

pub fn instance_from<R: Rng>(template: &ScenarioTemplate, n: usize, m: usize, rng: &mut R) -> Instance {
    let scenario = channel::sample_scenario(template, n, m, rng).unwrap();
    let channel = channel::generate_channel(&scenario, rng);
    let fisher = estimator::fisher_matrix(&channel, &scenario).unwrap();
    Instance {
        scenario,
        channel,
        fisher,
    }
}

/// Random Hermitian PSD matrix `G^H G / k` with `G` of size `k x n`.
pub fn random_psd<R: Rng>(n: usize, k: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(k, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    g.adjoint() * g / Complex64::new(k as f64, 0.0)
}

pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm()
}

/// `Re(a^H B a)` computed entry by entry.
pub fn quad_form_naive(b: &CMatrix, a: &[Complex64]) -> f64 {
    let n = a.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[i].conj() * b[(i, j)] * a[j];
        }
    }
    acc.re
}

pub fn report(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
