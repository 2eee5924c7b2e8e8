//! Orthonormal bases for spans of random features, and the Christoffel
//! function they define.
//!
//! For a support `S` of features the Gram matrix `G_ij = ∫ conj(φ_i) φ_j dρ`
//! is available in closed form from the measure. Its eigenpairs `(λ_j, q_j)`
//! give `ψ_j = λ_j^{-1/2} Σ_k (q_j)_k φ(·; w_k)`, orthonormal in `L²_ρ`.
//! Eigenvalues at or below the truncation threshold are dropped, so the
//! effective dimension `r` can be smaller than `|S|`.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::features::{CMatrix, FeatureSet};
use crate::measures::Measure;
use crate::points::Points;

/// Below this value of `K(x)` the reweighting weight is capped.
pub const CHRISTOFFEL_FLOOR: f64 = 1e-30;
/// Weight returned where `K(x)` is below [`CHRISTOFFEL_FLOOR`].
pub const WEIGHT_CAP: f64 = 1e30;

/// Eigenvalue truncation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "tol", rename_all = "lowercase")]
pub enum Truncation {
    /// Keep `λ > tol`.
    Absolute(f64),
    /// Keep `λ > tol · λ_max`.
    Relative(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Absolute(1e-10)
    }
}

impl Truncation {
    fn threshold(&self, lambda_max: f64) -> f64 {
        match *self {
            Truncation::Absolute(t) => t,
            Truncation::Relative(t) => t * lambda_max,
        }
    }

    fn tol(&self) -> f64 {
        match *self {
            Truncation::Absolute(t) | Truncation::Relative(t) => t,
        }
    }
}

/// A reweighting weight together with whether the cap was hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub value: f64,
    pub capped: bool,
}

/// Truncated orthonormal basis `ψ_1..ψ_r` of a span of features.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    measure: Measure,
    support: Vec<usize>,
    frequencies: Points,
    eigvals: Vec<f64>,
    discarded: Vec<f64>,
    eigvecs: CMatrix,
    /// Row-major `s × r`: `coef[k·r + j] = (q_j)_k / √λ_j`.
    coef: Vec<Complex64>,
    flat: bool,
}

/// Closed-form Gram matrix of the given frequencies under `measure`.
pub fn gram_matrix(measure: &Measure, frequencies: &Points) -> Result<CMatrix> {
    check_dim(measure.dim(), frequencies.dim())?;
    let s = frequencies.len();
    let mut g = DMatrix::from_element(s, s, Complex64::new(1.0, 0.0));
    for i in 0..s {
        for j in (i + 1)..s {
            let v = measure.gram_entry_unchecked(frequencies.row(i), frequencies.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

/// Builds the basis for the span of `features[support]`.
pub fn build_basis(
    measure: &Measure,
    features: &FeatureSet,
    support: &[usize],
    truncation: Truncation,
) -> Result<OrthonormalBasis> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some(&j) = support.iter().find(|&&j| j >= features.len()) {
        return Err(Error::InvalidArgument(format!(
            "support index {j} out of range for {} features",
            features.len()
        )));
    }
    let mut basis = OrthonormalBasis::from_frequencies(measure, features.frequencies().select(support), truncation)?;
    basis.support = support.to_vec();
    Ok(basis)
}

impl OrthonormalBasis {
    /// Basis for the span of `φ(·; w)` over the rows of `frequencies`.
    pub fn from_frequencies(measure: &Measure, frequencies: Points, truncation: Truncation) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::EmptySupport);
        }
        if truncation.tol() <= 0.0 || !truncation.tol().is_finite() {
            return Err(Error::InvalidArgument("truncation tolerance must be positive".into()));
        }
        let g = gram_matrix(measure, &frequencies)?;
        let s = frequencies.len();
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        // closed-form G is PSD; roundoff can leave tiny negatives
        let lambda = |i: usize| eig.eigenvalues[i].max(0.0);
        let lambda_max = lambda(order[0]);
        let cut = truncation.threshold(lambda_max);
        let (kept, dropped): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| lambda(i) > cut);
        if kept.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no Gram eigenvalue exceeds the truncation threshold {cut:e}"
            )));
        }
        let r = kept.len();
        let eigvals: Vec<f64> = kept.iter().map(|&i| lambda(i)).collect();
        let discarded: Vec<f64> = dropped.iter().map(|&i| lambda(i)).collect();
        let eigvecs = eig.eigenvectors.select_columns(&kept);
        let mut coef = vec![Complex64::new(0.0, 0.0); s * r];
        for k in 0..s {
            for j in 0..r {
                coef[k * r + j] = eigvecs[(k, j)] / eigvals[j].sqrt();
            }
        }
        Ok(Self {
            measure: measure.clone(),
            support: (0..s).collect(),
            frequencies,
            eigvals,
            discarded,
            eigvecs,
            coef,
            flat: false,
        })
    }

    /// Replaces the Christoffel function by the constant `r`, so the sampling
    /// density becomes `h` and all weights are one. Ablation hook.
    pub fn with_flat_christoffel(mut self) -> Self {
        self.flat = true;
        self
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    /// Effective dimension `r`.
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &Points {
        &self.frequencies
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn discarded_eigenvalues(&self) -> &[f64] {
        &self.discarded
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigvecs
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// `(ψ_1(x), …, ψ_r(x))`.
    pub fn psi_values(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        check_dim(self.frequencies.dim(), x.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.psi_into(x, &mut out);
        Ok(out)
    }

    fn psi_into(&self, x: &[f64], out: &mut [Complex64]) {
        let r = self.dim();
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (k, w) in self.frequencies.iter().enumerate() {
            let t: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            let phi = Complex64::cis(t);
            let row = &self.coef[k * r..(k + 1) * r];
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * phi;
            }
        }
    }

    fn christoffel_unchecked(&self, x: &[f64]) -> f64 {
        if self.flat {
            return self.dim() as f64;
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.psi_into(x, &mut psi);
        psi.iter().map(|p| p.norm_sqr()).sum()
    }

    /// `K(x) = Σ_j |ψ_j(x)|²`.
    pub fn christoffel_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.frequencies.dim(), x.len())?;
        Ok(self.christoffel_unchecked(x))
    }

    /// Density of the CS measure, `K(x) h(x) / r`.
    pub fn cs_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.frequencies.dim(), x.len())?;
        let h = self.measure.density_unchecked(x);
        if h == 0.0 {
            return Ok(0.0);
        }
        Ok(self.christoffel_unchecked(x) * h / self.dim() as f64)
    }

    /// `r / K(x)`, capped where `K` vanishes.
    pub fn weight(&self, x: &[f64]) -> Result<Weight> {
        check_dim(self.frequencies.dim(), x.len())?;
        let k = self.christoffel_unchecked(x);
        if k < CHRISTOFFEL_FLOOR {
            warn!("Christoffel function {k:e} below floor at {x:?}; weight capped");
            return Ok(Weight {
                value: WEIGHT_CAP,
                capped: true,
            });
        }
        Ok(Weight {
            value: self.dim() as f64 / k,
            capped: false,
        })
    }

    /// The weight as a plain function; dimension errors map to `NaN`, which
    /// row assembly rejects.
    pub fn reweight_fn(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x| self.weight(x).map(|w| w.value).unwrap_or(f64::NAN)
    }

    /// Weighted least-squares matrix `[√w(x_s) ψ_j(x_s)] / √m` over all rows of
    /// `points`. Weights come from this basis.
    pub fn weighted_design(&self, points: &Points) -> Result<CMatrix> {
        check_dim(self.frequencies.dim(), points.dim())?;
        let (m, r) = (points.len(), self.dim());
        let norm = 1.0 / (m as f64).sqrt();
        let mut b = CMatrix::zeros(m, r);
        let mut psi = vec![Complex64::new(0.0, 0.0); r];
        for (s, x) in points.iter().enumerate() {
            self.psi_into(x, &mut psi);
            let w = self.weight(x)?.value;
            let scale = w.sqrt() * norm;
            for (j, p) in psi.iter().enumerate() {
                b[(s, j)] = p * scale;
            }
        }
        Ok(b)
    }

    #[cfg(test)]
    fn remixed(&self, u: &CMatrix) -> Self {
        let (s, r) = (self.support_size(), self.dim());
        let c = CMatrix::from_fn(s, r, |k, j| self.coef[k * r + j]);
        let mixed = c * u;
        let mut out = self.clone();
        for k in 0..s {
            for j in 0..r {
                out.coef[k * r + j] = mixed[(k, j)];
            }
        }
        out
    }
}
