//! Unit-diagonal semidefinite relaxation of `max a^H B a, |a_i| = 1`:
//!
//! ```text
//! max  tr(B A)   s.t.  A_ii = 1,  A >= 0
//! ```
//!
//! The dual is `min sum(y)` s.t. `Z = Diag(y) - B >= 0`, so `sum(y) - tr(B A)`
//! bounds the distance to the optimum. The solver is a primal-dual
//! interior-point method using the HKM search direction with a
//! Mehrotra-style predictor-corrector, working on the Hermitian matrices
//! directly. [`embed_real`] gives the equivalent real-symmetric form used to
//! cross-check objective values and feasibility.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::estimator::{FisherMatrix, PhaseVector};
use crate::linalg::{self, CMatrix, CVector};

/// `max tr(B A)` over unit-diagonal PSD `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    objective: CMatrix,
}

impl SdpProblem {
    pub fn new(objective: CMatrix) -> Result<Self> {
        if !objective.is_square() || objective.nrows() == 0 {
            return Err(Error::Usage("SDP objective must be a nonempty square matrix".into()));
        }
        if linalg::hermitian_defect(&objective) > 1e-12 {
            return Err(Error::Usage("SDP objective must be Hermitian".into()));
        }
        Ok(Self {
            objective: linalg::hermitian_part(&objective),
        })
    }

    pub fn from_fisher(b: &FisherMatrix) -> Self {
        Self {
            objective: b.matrix().clone(),
        }
    }

    pub fn objective(&self) -> &CMatrix {
        &self.objective
    }

    pub fn dimension(&self) -> usize {
        self.objective.nrows()
    }

    /// `Re tr(B A)`.
    pub fn evaluate(&self, gram: &CMatrix) -> f64 {
        linalg::trace_product_re(&self.objective, gram)
    }
}

/// Real form of the problem: maximize `tr(B_r A_r - B_i A_i)` subject to
/// `diag(A_r) = 1` and `[[A_r, -A_i], [A_i, A_r]] >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealEmbedding {
    pub obj_r: DMatrix<f64>,
    pub obj_i: DMatrix<f64>,
}

pub fn embed_real(problem: &SdpProblem) -> Result<RealEmbedding> {
    let b = problem.objective();
    if linalg::hermitian_defect(b) > 1e-12 {
        return Err(Error::Usage("SDP objective must be Hermitian".into()));
    }
    Ok(RealEmbedding {
        obj_r: b.map(|z| z.re),
        obj_i: b.map(|z| z.im),
    })
}

impl RealEmbedding {
    pub fn dimension(&self) -> usize {
        self.obj_r.nrows()
    }

    /// Splits a complex matrix into its real and imaginary parts.
    pub fn split(gram: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
        (gram.map(|z| z.re), gram.map(|z| z.im))
    }

    /// `tr(B_r A_r - B_i A_i)`.
    pub fn objective(&self, a_r: &DMatrix<f64>, a_i: &DMatrix<f64>) -> f64 {
        (&self.obj_r * a_r).trace() - (&self.obj_i * a_i).trace()
    }

    /// The `2N x 2N` block `[[A_r, -A_i], [A_i, A_r]]`.
    pub fn block(a_r: &DMatrix<f64>, a_i: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a_r.nrows();
        let mut blk = DMatrix::zeros(2 * n, 2 * n);
        blk.view_mut((0, 0), (n, n)).copy_from(a_r);
        blk.view_mut((n, n), (n, n)).copy_from(a_r);
        blk.view_mut((n, 0), (n, n)).copy_from(a_i);
        blk.view_mut((0, n), (n, n)).copy_from(&(-a_i));
        blk
    }

    /// Largest violation of `diag(A_r) = 1` and the smallest eigenvalue of
    /// the real block.
    pub fn feasibility(a_r: &DMatrix<f64>, a_i: &DMatrix<f64>) -> (f64, f64) {
        let diag = (0..a_r.nrows())
            .map(|k| (a_r[(k, k)] - 1.0).abs())
            .fold(0.0, f64::max);
        let min_eig = Self::block(a_r, a_i)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (diag, min_eig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdpOptions {
    pub max_iterations: usize,
    /// Certified relative duality gap.
    pub gap_tol: f64,
    /// Diagonal and eigenvalue feasibility tolerance.
    pub feas_tol: f64,
    /// Relative gap at which iteration stops early.
    pub target_gap: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gap_tol: 1e-7,
            feas_tol: 1e-8,
            target_gap: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpSolution {
    /// Relaxed optimum `A*`.
    #[serde(serialize_with = "serialize_cmatrix")]
    pub gram: CMatrix,
    /// `Re tr(B A*)`.
    pub objective_value: f64,
    /// Dual objective `sum(y)`.
    pub dual_value: f64,
    pub dual: Vec<f64>,
    /// `dual_value - objective_value`.
    pub duality_gap: f64,
    /// `max_i |A*_ii - 1|`.
    pub diag_residual: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn relative_gap(&self) -> f64 {
        self.duality_gap / self.objective_value.abs().max(1.0)
    }

    /// Checks the three certificates at the given tolerances.
    pub fn is_certified(&self, opts: &SdpOptions) -> bool {
        self.duality_gap >= -opts.gap_tol * self.objective_value.abs().max(1.0)
            && self.relative_gap() <= opts.gap_tol
            && self.diag_residual <= opts.feas_tol
            && self.min_eigenvalue >= -opts.feas_tol * self.max_eigenvalue.max(1.0)
    }
}

fn serialize_cmatrix<S: serde::Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<[f64; 2]> = (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub fn solve(problem: &SdpProblem) -> Result<SdpSolution> {
    solve_with(problem, &SdpOptions::default())
}

pub fn solve_with(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = problem.dimension();
    if n == 1 {
        let b11 = problem.objective()[(0, 0)].re;
        return Ok(SdpSolution {
            gram: CMatrix::identity(1, 1),
            objective_value: b11,
            dual_value: b11,
            dual: vec![b11],
            duality_gap: 0.0,
            diag_residual: 0.0,
            min_eigenvalue: 1.0,
            max_eigenvalue: 1.0,
            iterations: 0,
        });
    }

    // Work on a unit-scale copy of B; y and objectives are scaled back.
    let scale = problem
        .objective()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let b = problem.objective() / Complex64::new(scale, 0.0);

    let mut ipm = Ipm::start(&b);
    let mut stalled = 0;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if ipm.relative_gap() <= opts.target_gap {
            break;
        }
        let Some((ap, ad)) = ipm.step() else {
            break;
        };
        iterations += 1;
        if ap.max(ad) < 1e-10 {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let solution = ipm.finish(problem, scale, iterations);
    if solution.is_certified(opts) {
        Ok(solution)
    } else {
        Err(Error::NotConverged {
            best: Box::new(solution),
        })
    }
}

/// Interior-point state on the scaled problem. `x` stays feasible with a
/// unit diagonal and `z = Diag(y) - b` stays positive definite.
struct Ipm<'a> {
    b: &'a CMatrix,
    x: CMatrix,
    y: DVector<f64>,
}

struct Direction {
    dx: CMatrix,
    dy: DVector<f64>,
}

const STEP_FRACTION: f64 = 0.98;

impl<'a> Ipm<'a> {
    fn start(b: &'a CMatrix) -> Self {
        let n = b.nrows();
        // Strictly diagonally dominant start makes Z positive definite.
        let row_abs: Vec<f64> = (0..n).map(|i| b.row(i).iter().map(|z| z.norm()).sum()).collect();
        let shift = row_abs.iter().copied().fold(0.0, f64::max).max(1.0) * 0.5;
        let y = DVector::from_iterator(n, row_abs.iter().map(|r| r + shift));
        Self {
            b,
            x: CMatrix::identity(n, n),
            y,
        }
    }

    fn z(&self) -> CMatrix {
        let mut z = -self.b.clone();
        for i in 0..z.nrows() {
            z[(i, i)] += self.y[i];
        }
        z
    }

    fn primal(&self) -> f64 {
        linalg::trace_product_re(self.b, &self.x)
    }

    fn dual(&self) -> f64 {
        self.y.sum()
    }

    fn relative_gap(&self) -> f64 {
        let p = self.primal();
        (self.dual() - p) / p.abs().max(1.0)
    }

    /// One predictor-corrector iteration; returns the primal and dual step
    /// lengths, or `None` when a factorization breaks down.
    fn step(&mut self) -> Option<(f64, f64)> {
        let n = self.x.nrows();
        let z = self.z();
        let chol_z = Cholesky::new(z.clone())?;
        let z_inv = linalg::hermitian_part(&chol_z.inverse());
        let chol_x = Cholesky::new(self.x.clone())?;

        // Schur complement Re(Z^{-1} o X^T), real symmetric positive definite.
        let schur = DMatrix::from_fn(n, n, |i, j| (z_inv[(i, j)] * self.x[(i, j)].conj()).re);
        let chol_schur = Cholesky::new((&schur + schur.transpose()) * 0.5)?;

        let gap = linalg::trace_product_re(&self.x, &z);

        let predictor = self.direction(&chol_schur, &z_inv, 0.0, None);
        let ap = max_step(&chol_x, &predictor.dx).min(1.0);
        let dz_p = diag_matrix(&predictor.dy);
        let ad = max_step(&chol_z, &dz_p).min(1.0);
        let x_pred = &self.x + &predictor.dx * Complex64::new(ap, 0.0);
        let z_pred = &z + &dz_p * Complex64::new(ad, 0.0);
        let gap_pred = linalg::trace_product_re(&x_pred, &z_pred).max(0.0);
        let sigma = if gap > 0.0 { (gap_pred / gap).powi(3).clamp(0.0, 1.0) } else { 0.0 };
        let mu = sigma * gap / n as f64;

        let second_order = &z_inv * &dz_p * &predictor.dx;
        let corrector = self.direction(&chol_schur, &z_inv, mu, Some(&second_order));
        let dz = diag_matrix(&corrector.dy);
        let ap = (STEP_FRACTION * max_step(&chol_x, &corrector.dx)).min(1.0);
        let ad = (STEP_FRACTION * max_step(&chol_z, &dz)).min(1.0);

        self.x = unit_diagonal(linalg::hermitian_part(&(&self.x + &corrector.dx * Complex64::new(ap, 0.0))));
        self.y += &corrector.dy * ad;
        Some((ap, ad))
    }

    /// HKM direction targeting `X Z = mu I` with `diag(X + dX) = 1`.
    fn direction(
        &self,
        chol_schur: &Cholesky<f64, Dyn>,
        z_inv: &CMatrix,
        mu: f64,
        second_order: Option<&CMatrix>,
    ) -> Direction {
        let n = self.x.nrows();
        let rhs = DVector::from_fn(n, |i, _| {
            let corr = second_order.map_or(0.0, |r| r[(i, i)].re);
            mu * z_inv[(i, i)].re - 1.0 - corr
        });
        let dy = chol_schur.solve(&rhs);

        let mut zi_dz = z_inv.clone();
        for j in 0..n {
            zi_dz.column_mut(j).scale_mut(dy[j]);
        }
        let mut raw = z_inv * Complex64::new(mu, 0.0) - &self.x - zi_dz * &self.x;
        if let Some(r) = second_order {
            raw -= r;
        }
        Direction {
            dx: linalg::hermitian_part(&raw),
            dy,
        }
    }

    fn finish(self, problem: &SdpProblem, scale: f64, iterations: usize) -> SdpSolution {
        let gram = self.x;
        let objective_value = problem.evaluate(&gram);
        let dual: Vec<f64> = self.y.iter().map(|v| v * scale).collect();
        let dual_value: f64 = dual.iter().sum();
        let eig = linalg::hermitian_eigenvalues(&gram);
        let diag_residual = (0..gram.nrows())
            .map(|i| (gram[(i, i)].re - 1.0).abs())
            .fold(0.0, f64::max);
        SdpSolution {
            objective_value,
            dual_value,
            duality_gap: dual_value - objective_value,
            dual,
            diag_residual,
            min_eigenvalue: eig[0],
            max_eigenvalue: *eig.last().unwrap(),
            iterations,
            gram,
        }
    }
}

/// `D^{-1/2} X D^{-1/2}` with `D = diag(X)`: removes the diagonal drift
/// left by roundoff while keeping `X` positive semidefinite.
fn unit_diagonal(mut x: CMatrix) -> CMatrix {
    let n = x.nrows();
    let d: Vec<f64> = (0..n).map(|i| x[(i, i)].re.max(f64::MIN_POSITIVE).sqrt().recip()).collect();
    for j in 0..n {
        for i in 0..n {
            x[(i, j)] *= d[i] * d[j];
        }
        x[(j, j)] = Complex64::new(1.0, 0.0);
    }
    x
}

fn diag_matrix(d: &DVector<f64>) -> CMatrix {
    CMatrix::from_diagonal(&d.map(|v| Complex64::new(v, 0.0)))
}

/// Largest `alpha` keeping `P + alpha dP` positive semidefinite, given the
/// Cholesky factor of `P`.
fn max_step(chol: &Cholesky<Complex64, Dyn>, dp: &CMatrix) -> f64 {
    let l = chol.l_dirty();
    let Some(t) = l.solve_lower_triangular(dp) else {
        return 0.0;
    };
    let Some(s) = l.solve_lower_triangular(&t.adjoint()) else {
        return 0.0;
    };
    let lam_min = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&s))[0];
    if lam_min < 0.0 {
        -1.0 / lam_min
    } else {
        f64::INFINITY
    }
}

/// Best unit-modulus vector found by rounding a relaxed solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneExtraction {
    pub phases: PhaseVector,
    /// `a^H B a` at the returned vector.
    pub objective: f64,
    /// Number of candidates evaluated, including the two fixed ones.
    pub candidates: usize,
}

pub const DEFAULT_ROUNDING_CANDIDATES: usize = 100;

/// Randomized rounding of `A*`.
///
/// Factor `A* = C^H C` from its eigen-decomposition (eigenvalues below
/// `1e-12 lambda_max` clipped to zero), draw `r` with i.i.d. uniform unit
/// phases, and take the phases of `C^H r`. The pool always starts with the
/// phases of the leading eigenvector of `A*` and the all-ones vector, then
/// `num_candidates` random draws. Ties keep the earliest candidate.
pub fn extract_rank_one<R: Rng + ?Sized>(
    solution: &SdpSolution,
    problem: &SdpProblem,
    rng: &mut R,
    num_candidates: usize,
) -> RankOneExtraction {
    let n = problem.dimension();
    let b = problem.objective();
    let (values, vectors) = linalg::hermitian_eigen_desc(&solution.gram);
    let top = values[0].max(0.0);
    let sqrt_vals: Vec<f64> = values
        .iter()
        .map(|&v| if v > 1e-12 * top { v.sqrt() } else { 0.0 })
        .collect();
    // C^H = U Lambda^{1/2}.
    let mut factor = vectors.clone();
    for (k, s) in sqrt_vals.iter().enumerate() {
        factor.column_mut(k).scale_mut(*s);
    }

    let mut best = PhaseVector::normalize(vectors.column(0).as_slice());
    let mut best_value = linalg::quad_form(b, best.values());
    let consider = |cand: PhaseVector, best: &mut PhaseVector, best_value: &mut f64| {
        let v = linalg::quad_form(b, cand.values());
        if v > *best_value {
            *best = cand;
            *best_value = v;
        }
    };
    consider(PhaseVector::ones(n), &mut best, &mut best_value);
    for _ in 0..num_candidates {
        let r = CVector::from_fn(n, |_, _| Complex64::from_polar(1.0, TAU * rng.random::<f64>()));
        let raw = &factor * r;
        consider(PhaseVector::normalize(raw.as_slice()), &mut best, &mut best_value);
    }
    RankOneExtraction {
        phases: best,
        objective: best_value,
        candidates: num_candidates + 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_sensor() -> SdpProblem {
        let off = Complex64::from_polar(0.5, PI / 3.0);
        SdpProblem::new(CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), off, off.conj(), c(1.0, 0.0)])).unwrap()
    }

    #[test]
    fn single_sensor_is_trivial() {
        let p = SdpProblem::new(CMatrix::from_element(1, 1, c(2.5, 0.0))).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.gram[(0, 0)], c(1.0, 0.0));
        assert_eq!(s.objective_value, 2.5);
    }

    #[test]
    fn diagonal_objective_gives_trace() {
        let d = CVector::from_column_slice(&[c(1.0, 0.0), c(3.0, 0.0), c(0.5, 0.0), c(2.0, 0.0)]);
        let p = SdpProblem::new(CMatrix::from_diagonal(&d)).unwrap();
        let s = solve(&p).unwrap();
        assert!((s.objective_value - 6.5).abs() < 1e-6);
    }

    #[test]
    fn two_sensor_relaxation_is_tight() {
        let p = two_sensor();
        let s = solve(&p).unwrap();
        assert!((s.objective_value - 3.0).abs() < 1e-6, "{}", s.objective_value);
        assert!(s.is_certified(&SdpOptions::default()));
        let r = extract_rank_one(&s, &p, &mut RngStream::new(0, 0).rng(), 100);
        assert!((r.objective - 3.0).abs() < 1e-6);
        let ph = r.phases.phases();
        let rel = (ph[0] - ph[1]).rem_euclid(TAU);
        assert!((rel - PI / 3.0).abs() < 1e-4, "relative phase {rel}");
    }

    #[test]
    fn zero_objective_converges() {
        let p = SdpProblem::new(CMatrix::zeros(3, 3)).unwrap();
        let s = solve(&p).unwrap();
        assert!(s.objective_value.abs() < 1e-8);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(SdpProblem::new(m), Err(Error::Usage(_))));
    }

    #[test]
    fn embedding_splits_parts() {
        let p = SdpProblem::new(CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]))
            .unwrap();
        let e = embed_real(&p).unwrap();
        assert_eq!(e.obj_r, DMatrix::identity(2, 2));
        assert_eq!(e.obj_i, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));

        let real = SdpProblem::new(CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(1.0, 0.0)]))
            .unwrap();
        assert_eq!(embed_real(&real).unwrap().obj_i, DMatrix::zeros(2, 2));
    }

    #[test]
    fn rank_one_gram_is_recovered() {
        let a = PhaseVector::from_phases(&[0.2, -1.3, 2.9, 0.7]);
        let av = a.to_vector();
        let gram = &av * av.adjoint();
        // a is the unique maximizer (up to rotation) of a^H B a here.
        let b = &gram + CMatrix::from_diagonal(&CVector::from_fn(4, |i, _| c(1.0 + i as f64, 0.0)));
        let p = SdpProblem::new(b).unwrap();
        let sol = SdpSolution {
            objective_value: p.evaluate(&gram),
            dual_value: 0.0,
            dual: vec![],
            duality_gap: 0.0,
            diag_residual: 0.0,
            min_eigenvalue: 0.0,
            max_eigenvalue: 4.0,
            iterations: 0,
            gram,
        };
        let r = extract_rank_one(&sol, &p, &mut RngStream::new(1, 0).rng(), 10);
        let want = p.evaluate(&sol.gram);
        assert!(r.objective >= want - 1e-10);
        // Same vector up to a single global rotation.
        let rot = r.phases.values()[0] / a.values()[0];
        for (x, y) in r.phases.values().iter().zip(a.values()) {
            assert!((x - y * rot).norm() < 1e-8);
        }
    }
}
