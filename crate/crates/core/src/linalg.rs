//! Dense complex least-squares helpers.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::features::{CMatrix, CVector};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Minimum-norm least-squares solution of `min ‖b − A[:, cols] z‖₂`.
///
/// The restricted matrix is reduced by Householder QR and the small
/// triangular factor is then decomposed by SVD, so the rank cut acts on the
/// true singular values of `A[:, cols]`.
pub fn restricted_lstsq(a: &CMatrix, cols: &[usize], b: &CVector) -> Vec<Complex64> {
    if cols.is_empty() {
        return Vec::new();
    }
    let sub = a.select_columns(cols);
    lstsq_min_norm(sub, b)
}

/// Minimum-norm least-squares solution of `min ‖b − A z‖₂`.
pub fn lstsq_min_norm(a: CMatrix, b: &CVector) -> Vec<Complex64> {
    let (m, k) = a.shape();
    if m >= k {
        let qr = a.qr();
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        let r = qr.r();
        let rhs = qtb.rows(0, k).into_owned();
        svd_solve(r, &rhs)
    } else {
        svd_solve(a, b)
    }
}

fn svd_solve(a: CMatrix, b: &CVector) -> Vec<Complex64> {
    let k = a.ncols();
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = RANK_TOL * smax;
    let utb = u.adjoint() * b;
    let mut x = DVector::<Complex64>::zeros(k);
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv > cut && sv > 0.0 {
            let coef = utb[i] / sv;
            // x += coef * v_i, with v_i the i-th row of V^T conjugated
            for j in 0..k {
                x[j] += coef * v_t[(i, j)].conj();
            }
        }
    }
    x.iter().cloned().collect()
}

/// Smallest singular value of a tall matrix.
pub fn min_singular_value(a: CMatrix) -> f64 {
    let (m, k) = a.shape();
    if k == 0 {
        return 0.0;
    }
    let small = if m > k { a.qr().r() } else { a };
    let sv = small.singular_values();
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    // a wide matrix has n - m zero singular values that the SVD does not list
    if m < k {
        0.0
    } else {
        smallest
    }
}

/// `b − A x` for a sparse `x` given by (index, value) pairs.
pub fn sparse_residual(a: &CMatrix, b: &CVector, support: &[usize], vals: &[Complex64]) -> CVector {
    let mut r = b.clone();
    for (&j, &v) in support.iter().zip(vals) {
        r.axpy(-v, &a.column(j), Complex64::new(1.0, 0.0));
    }
    r
}

/// `A^* r`.
pub fn adjoint_mul(a: &CMatrix, r: &CVector) -> CVector {
    a.ad_mul(r)
}
