//! Greedy sparse solvers for `A c ≈ b` over complex data: orthogonal matching
//! pursuit, hard thresholding pursuit, and a column-normalizing wrapper.
//!
//! Ties in every argmax / top-s selection go to the lowest index.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::features::{CMatrix, CVector};
use crate::linalg::{adjoint_mul, restricted_lstsq, sparse_residual};

/// An s-sparse coefficient vector with its support.
#[derive(Debug, Clone)]
pub struct SparseSolution {
    pub coeffs: CVector,
    /// Selected indices, ascending.
    pub support: Vec<usize>,
    /// `‖b − A ĉ‖₂` for the system that was solved.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm after each iteration (OMP: one entry per selected index).
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Omp,
    Htp,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverKind::Omp => f.write_str("omp"),
            SolverKind::Htp => f.write_str("htp"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HtpParams {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HtpParams {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-12,
        }
    }
}

fn check_problem(a: &CMatrix, b: &CVector, s: usize) -> Result<()> {
    check_dim(a.nrows(), b.len())?;
    let limit = a.nrows().min(a.ncols());
    if s == 0 || s > limit {
        return Err(Error::InvalidArgument(format!(
            "sparsity {s} must lie in 1..={limit} for a {}x{} system",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn scatter(n: usize, support: &[usize], vals: &[Complex64]) -> CVector {
    let mut c = DVector::zeros(n);
    for (&j, &v) in support.iter().zip(vals) {
        c[j] = v;
    }
    c
}

/// Orthogonal matching pursuit with exactly `s` greedy steps.
pub fn omp(a: &CMatrix, b: &CVector, s: usize) -> Result<SparseSolution> {
    check_problem(a, b, s)?;
    let n = a.ncols();
    let mut selected: Vec<usize> = Vec::with_capacity(s);
    let mut in_support = vec![false; n];
    let mut vals: Vec<Complex64> = Vec::new();
    let mut residual = b.clone();
    let mut history = Vec::with_capacity(s);

    for _ in 0..s {
        let corr = adjoint_mul(a, &residual);
        // Selected columns are orthogonal to the residual in exact arithmetic;
        // skipping them only matters once the residual has vanished.
        let mut best = None;
        let mut best_val = -1.0;
        for (j, c) in corr.iter().enumerate() {
            if in_support[j] {
                continue;
            }
            let v = c.norm();
            if v > best_val {
                best_val = v;
                best = Some(j);
            }
        }
        let j = best.expect("s <= N leaves a candidate");
        selected.push(j);
        in_support[j] = true;
        vals = restricted_lstsq(a, &selected, b);
        residual = sparse_residual(a, b, &selected, &vals);
        history.push(residual.norm());
    }

    let coeffs = scatter(n, &selected, &vals);
    let mut support = selected;
    support.sort_unstable();
    Ok(SparseSolution {
        coeffs,
        support,
        residual_norm: residual.norm(),
        iterations: s,
        residual_history: history,
    })
}

/// Indices of the `s` largest magnitudes, returned ascending.
fn top_s(v: &CVector, s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| {
        v[j].norm()
            .partial_cmp(&v[i].norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Hard thresholding pursuit.
///
/// Starts from `c = 0`; each sweep picks the `s` largest entries of
/// `c + A^*(b − A c)`, re-solves least squares on them, and stops once the
/// update is smaller than `tol` or `max_iter` sweeps have run.
pub fn htp(a: &CMatrix, b: &CVector, s: usize, params: &HtpParams) -> Result<SparseSolution> {
    check_problem(a, b, s)?;
    if params.max_iter == 0 {
        return Err(Error::InvalidArgument("htp needs max_iter >= 1".into()));
    }
    let n = a.ncols();
    let mut c = CVector::zeros(n);
    let mut support: Vec<usize> = Vec::new();
    let mut residual = b.clone();
    let mut history = Vec::new();
    let mut iterations = 0;

    for _ in 0..params.max_iter {
        iterations += 1;
        let g = &c + adjoint_mul(a, &residual);
        let next = top_s(&g, s);
        // an unchanged support reproduces the previous least-squares solution
        let c_next = if next == support {
            c.clone()
        } else {
            let vals = restricted_lstsq(a, &next, b);
            residual = sparse_residual(a, b, &next, &vals);
            scatter(n, &next, &vals)
        };
        support = next;
        let step = (&c_next - &c).norm();
        c = c_next;
        history.push(residual.norm());
        if step < params.tol {
            break;
        }
    }

    Ok(SparseSolution {
        coeffs: c,
        support,
        residual_norm: residual.norm(),
        iterations,
        residual_history: history,
    })
}

/// Runs `kind` on the column-normalized system and maps the coefficients
/// back. The reported residual refers to the original `A`.
pub fn solve_normalized(
    a: &CMatrix,
    b: &CVector,
    s: usize,
    kind: SolverKind,
    htp_params: &HtpParams,
) -> Result<SparseSolution> {
    check_problem(a, b, s)?;
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0 || !n.is_finite()) {
        return Err(Error::ZeroColumn(j));
    }
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= Complex64::new(norms[j], 0.0);
    }
    let mut sol = match kind {
        SolverKind::Omp => omp(&scaled, b, s)?,
        SolverKind::Htp => htp(&scaled, b, s, htp_params)?,
    };
    for (c, n) in sol.coeffs.iter_mut().zip(&norms) {
        *c /= *n;
    }
    let vals: Vec<Complex64> = sol.support.iter().map(|&j| sol.coeffs[j]).collect();
    sol.residual_norm = sparse_residual(a, b, &sol.support, &vals).norm();
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn vec_of(vals: &[f64]) -> CVector {
        CVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v)))
    }

    fn planted(seed: u64) -> (CMatrix, CVector, CVector, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n, s) = (40, 100, 5);
        let a = CMatrix::from_fn(m, n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            c(re / (m as f64).sqrt())
        });
        let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, n, s).into_vec();
        idx.sort_unstable();
        let mut truth = CVector::zeros(n);
        for &j in &idx {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            truth[j] = Complex64::new(re.signum() * (1.0 + re.abs()), im);
        }
        let b = &a * &truth;
        (a, b, truth, idx)
    }

    #[test]
    fn omp_identity_single_step() {
        let a = CMatrix::identity(4, 4);
        let sol = omp(&a, &vec_of(&[0.0, 5.0, 0.0, 0.0]), 1).unwrap();
        assert_eq!(sol.support, vec![1]);
        assert!((&sol.coeffs - vec_of(&[0.0, 5.0, 0.0, 0.0])).norm() < 1e-13);
    }

    #[test]
    fn omp_identity_two_steps() {
        let a = CMatrix::identity(3, 3);
        let sol = omp(&a, &vec_of(&[3.0, 1.0, 0.0]), 2).unwrap();
        assert_eq!(sol.support, vec![0, 1]);
        assert_eq!(sol.coeffs, vec_of(&[3.0, 1.0, 0.0]));
        assert!(sol.residual_norm < 1e-15);
    }

    #[test]
    fn sparsity_bounds_enforced() {
        let a = CMatrix::identity(3, 5);
        let b = vec_of(&[1.0, 2.0, 3.0]);
        assert!(omp(&a, &b, 0).is_err());
        assert!(omp(&a, &b, 4).is_err());
        assert!(htp(&a, &b, 4, &HtpParams::default()).is_err());
    }

    #[test]
    fn omp_recovers_planted_vector() {
        let (a, b, truth, idx) = planted(42);
        let sol = omp(&a, &b, 5).unwrap();
        assert_eq!(sol.support, idx);
        assert!((sol.coeffs - truth).norm() < 1e-8);
    }

    #[test]
    fn htp_identity_converges_immediately() {
        let a = CMatrix::identity(4, 4);
        let sol = htp(&a, &vec_of(&[0.0, 5.0, 0.0, 0.0]), 1, &HtpParams::default()).unwrap();
        assert_eq!(sol.support, vec![1]);
        assert!((&sol.coeffs - vec_of(&[0.0, 5.0, 0.0, 0.0])).norm() < 1e-13);
        // first sweep finds the answer, second confirms the fixed point
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn htp_huge_tolerance_stops_after_first_check() {
        let a = CMatrix::identity(4, 4);
        let params = HtpParams { max_iter: 100, tol: 1e3 };
        let sol = htp(&a, &vec_of(&[0.0, 5.0, 0.0, 0.0]), 1, &params).unwrap();
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn htp_recovers_planted_vector() {
        let (a, b, truth, idx) = planted(42);
        let sol = htp(&a, &b, 5, &HtpParams::default()).unwrap();
        assert_eq!(sol.support, idx);
        assert!((sol.coeffs - truth).norm() < 1e-8);
    }

    #[test]
    fn normalization_hand_example() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = c(2.0);
        a[(1, 1)] = c(1.0);
        for kind in [SolverKind::Omp, SolverKind::Htp] {
            let sol = solve_normalized(&a, &vec_of(&[2.0, 0.0]), 1, kind, &HtpParams::default()).unwrap();
            assert_eq!(sol.support, vec![0]);
            assert!((sol.coeffs[0] - c(1.0)).norm() < 1e-15);
            assert_eq!(sol.coeffs[1], c(0.0));
        }
    }

    #[test]
    fn normalization_is_identity_on_unit_columns() {
        let (a, b, _, _) = planted(3);
        let mut unit = a.clone();
        for mut col in unit.column_iter_mut() {
            let n = col.norm();
            col /= c(n);
        }
        let direct = omp(&unit, &b, 5).unwrap();
        let wrapped = solve_normalized(&unit, &b, 5, SolverKind::Omp, &HtpParams::default()).unwrap();
        assert_eq!(direct.support, wrapped.support);
        assert!((direct.coeffs - wrapped.coeffs).norm() < 1e-13);
    }

    #[test]
    fn zero_column_rejected() {
        let mut a = CMatrix::identity(3, 3);
        a[(2, 2)] = c(0.0);
        let err = solve_normalized(&a, &vec_of(&[1.0, 0.0, 0.0]), 1, SolverKind::Omp, &HtpParams::default());
        assert_eq!(err.unwrap_err(), Error::ZeroColumn(2));
    }

    #[test]
    fn normalized_residual_matches_internal_residual() {
        // nonuniform row weights make the column norms differ
        let (mut a, _, _, _) = planted(8);
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row *= c(0.2 + (i as f64 * 0.37).sin().abs() * 3.0);
        }
        let b = CVector::from_fn(40, |i, _| Complex64::new((i as f64).cos(), 0.1 * i as f64));
        let norms: Vec<f64> = a.column_iter().map(|col| col.norm()).collect();
        let mut scaled = a.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col /= c(norms[j]);
        }
        for kind in [SolverKind::Omp, SolverKind::Htp] {
            let inner = match kind {
                SolverKind::Omp => omp(&scaled, &b, 8).unwrap(),
                SolverKind::Htp => htp(&scaled, &b, 8, &HtpParams::default()).unwrap(),
            };
            let outer = solve_normalized(&a, &b, 8, kind, &HtpParams::default()).unwrap();
            assert_eq!(inner.support, outer.support);
            assert!((inner.residual_norm - outer.residual_norm).abs() < 1e-12);
            assert!(((&b - &a * &outer.coeffs).norm() - outer.residual_norm).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn omp_residuals_never_increase_and_indices_are_distinct(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CMatrix::from_fn(20, 50, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            let b = CVector::from_fn(20, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                c(re)
            });
            let sol = omp(&a, &b, 10).unwrap();
            for w in sol.residual_history.windows(2) {
                proptest::prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
            let mut s = sol.support.clone();
            s.dedup();
            proptest::prop_assert_eq!(s.len(), 10);
            for (j, v) in sol.coeffs.iter().enumerate() {
                if *v != c(0.0) {
                    proptest::prop_assert!(sol.support.contains(&j));
                }
            }
        }

        #[test]
        fn orthonormal_columns_recover_top_entries(seed in 0u64..500, s in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = CMatrix::from_fn(12, 6, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            });
            let q = raw.qr().q();
            let b = CVector::from_fn(12, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                c(re)
            });
            let proj = q.ad_mul(&b);
            let expect = top_s(&proj, s);
            for sol in [omp(&q, &b, s).unwrap(), htp(&q, &b, s, &HtpParams::default()).unwrap()] {
                proptest::prop_assert_eq!(&sol.support, &expect);
                for &j in &expect {
                    proptest::prop_assert!((sol.coeffs[j] - proj[j]).norm() < 1e-10);
                }
            }
        }
    }
}
