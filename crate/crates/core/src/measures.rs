//! Product probability measures on R^d.
//!
//! Every measure used here is a product of one-dimensional laws, so density,
//! sampling and the feature Gram entries all factorize per coordinate. The
//! Gram entry between two complex-exponential features is the characteristic
//! function of the measure evaluated at the frequency difference.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::Points;

/// A one-dimensional law, one per coordinate of a [`Measure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Law {
    /// Normal law with the given mean and standard deviation.
    Gaussian {
        #[serde(default)]
        mean: f64,
        sigma: f64,
    },
    /// `shift + Exp(rate)`; the density is `rate * exp(-rate (x - shift))` for
    /// `x >= shift` and zero below.
    #[serde(alias = "shifted_exponential")]
    Exponential {
        #[serde(default)]
        shift: f64,
        rate: f64,
    },
    /// Point mass at `value`. Holds a coordinate constant; contributes a
    /// density factor of one and a pure phase to Gram entries.
    Fixed { value: f64 },
}

impl Law {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Gaussian { mean, sigma } => mean.is_finite() && sigma.is_finite() && sigma > 0.0,
            Law::Exponential { shift, rate } => shift.is_finite() && rate.is_finite() && rate > 0.0,
            Law::Fixed { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid law parameters: {self:?}")))
        }
    }

    /// One-dimensional density.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Law::Gaussian { mean, sigma } => {
                let z = (x - mean) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            Law::Exponential { shift, rate } => {
                if x < shift {
                    0.0
                } else {
                    rate * (-rate * (x - shift)).exp()
                }
            }
            Law::Fixed { .. } => 1.0,
        }
    }

    /// `E[exp(i X delta)]`.
    pub fn characteristic(&self, delta: f64) -> Complex64 {
        match *self {
            Law::Gaussian { mean, sigma } => {
                Complex64::from_polar((-0.5 * sigma * sigma * delta * delta).exp(), delta * mean)
            }
            Law::Exponential { shift, rate } => {
                let phase = Complex64::from_polar(1.0, delta * shift);
                phase * rate / Complex64::new(rate, -delta)
            }
            Law::Fixed { value } => Complex64::from_polar(1.0, delta * value),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Gaussian { mean, sigma } => Normal::new(mean, sigma)
                .expect("validated sigma")
                .sample(rng),
            Law::Exponential { shift, rate } => {
                shift + Exp::new(rate).expect("validated rate").sample(rng)
            }
            Law::Fixed { value } => value,
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Law::Fixed { .. })
    }
}

/// Probability measure on R^d given as a product of per-coordinate laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Law>", into = "Vec<Law>")]
pub struct Measure {
    laws: Vec<Law>,
}

impl TryFrom<Vec<Law>> for Measure {
    type Error = Error;

    fn try_from(laws: Vec<Law>) -> Result<Self> {
        Measure::new(laws)
    }
}

impl From<Measure> for Vec<Law> {
    fn from(m: Measure) -> Self {
        m.laws
    }
}

impl Measure {
    pub fn new(laws: Vec<Law>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidArgument("measure needs at least one coordinate".into()));
        }
        for law in &laws {
            law.validate()?;
        }
        Ok(Self { laws })
    }

    /// `N(0, sigma^2 I_d)`.
    pub fn isotropic_gaussian(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![Law::Gaussian { mean: 0.0, sigma }; dim])
    }

    /// Zero-mean Gaussian with per-coordinate standard deviations.
    pub fn diagonal_gaussian(sigmas: &[f64]) -> Result<Self> {
        Self::new(
            sigmas
                .iter()
                .map(|&sigma| Law::Gaussian { mean: 0.0, sigma })
                .collect(),
        )
    }

    /// `shift + Exp(rate)` in every coordinate.
    pub fn exponential(dim: usize, shift: f64, rate: f64) -> Result<Self> {
        Self::new(vec![Law::Exponential { shift, rate }; dim])
    }

    pub fn dim(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[Law] {
        &self.laws
    }

    /// Coordinates that are not point masses. Samplers should only move these.
    pub fn free_coordinates(&self) -> Vec<bool> {
        self.laws.iter().map(|l| !l.is_fixed()).collect()
    }

    /// Product density `h(x)`; exactly zero off the support of any
    /// exponential component.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.density_unchecked(x))
    }

    pub(crate) fn density_unchecked(&self, x: &[f64]) -> f64 {
        let mut h = 1.0;
        for (law, &xk) in self.laws.iter().zip(x) {
            h *= law.density(xk);
            if h == 0.0 {
                break;
            }
        }
        h
    }

    /// `count` i.i.d. draws, one per row.
    pub fn sample_iid<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Points {
        let mut out = Points::with_capacity(self.dim(), count);
        let mut row = vec![0.0; self.dim()];
        for _ in 0..count {
            for (slot, law) in row.iter_mut().zip(&self.laws) {
                *slot = law.sample(rng);
            }
            out.push(&row).expect("row has measure dimension");
        }
        out
    }

    /// Characteristic function `E[exp(i <X, delta>)]`.
    pub fn characteristic(&self, delta: &[f64]) -> Result<Complex64> {
        check_dim(self.dim(), delta.len())?;
        Ok(self
            .laws
            .iter()
            .zip(delta)
            .map(|(law, &dk)| law.characteristic(dk))
            .product())
    }

    /// Gram entry `∫ conj(φ(x; wi)) φ(x; wj) dρ(x)` for complex-exponential
    /// features, i.e. the characteristic function at `wj - wi`.
    pub fn gram_entry(&self, wi: &[f64], wj: &[f64]) -> Result<Complex64> {
        check_dim(self.dim(), wi.len())?;
        check_dim(self.dim(), wj.len())?;
        Ok(self.gram_entry_unchecked(wi, wj))
    }

    pub(crate) fn gram_entry_unchecked(&self, wi: &[f64], wj: &[f64]) -> Complex64 {
        let mut g = Complex64::new(1.0, 0.0);
        for ((law, a), b) in self.laws.iter().zip(wi).zip(wj) {
            g *= law.characteristic(b - a);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..n {
            s += f(a + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn standard_normal_mode() {
        let m = Measure::isotropic_gaussian(1, 1.0).unwrap();
        assert_abs_diff_eq!(m.density(&[0.0]).unwrap(), 0.398_942_280_401_432_7, epsilon = 1e-15);
    }

    #[test]
    fn exponential_is_zero_below_shift() {
        let m = Measure::exponential(1, 0.0, 1.0).unwrap();
        assert_eq!(m.density(&[-0.5]).unwrap(), 0.0);
        let shifted = Measure::exponential(1, 2.0, 1.0).unwrap();
        assert_eq!(shifted.density(&[1.999]).unwrap(), 0.0);
        assert!(shifted.density(&[2.0]).unwrap() > 0.0);
    }

    #[test]
    fn product_density_matches_quadrature_normalized_components() {
        let g = Law::Gaussian { mean: 0.0, sigma: 1.0 };
        let e = Law::Exponential { shift: 0.0, rate: 2.0 };
        // each component integrates to one under a fine trapezoid rule
        let zg = trapezoid(|x| g.density(x), -12.0, 12.0, 200_000);
        let ze = trapezoid(|x| e.density(x), 0.0, 30.0, 400_000);
        assert_abs_diff_eq!(zg, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(ze, 1.0, epsilon = 1e-4);
        let m = Measure::new(vec![g, e]).unwrap();
        let expected = (1.0 / (2.0 * PI).sqrt()) / zg * (2.0 * (-0.6f64).exp()) / ze;
        assert_abs_diff_eq!(m.density(&[0.0, 0.3]).unwrap(), expected, epsilon = 1e-4);
    }

    #[test]
    fn density_rejects_wrong_dimension() {
        let m = Measure::isotropic_gaussian(2, 1.0).unwrap();
        assert_eq!(
            m.density(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(m.gram_entry(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Measure::isotropic_gaussian(1, 0.0).is_err());
        assert!(Measure::exponential(1, 0.0, -1.0).is_err());
        assert!(Measure::new(vec![]).is_err());
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let m = Measure::isotropic_gaussian(1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = m.sample_iid(100_000, &mut rng);
        let mean = pts.as_flat().iter().sum::<f64>() / 1e5;
        assert!(mean.abs() < 3.0 / 1e5f64.sqrt(), "mean {mean}");
    }

    #[test]
    fn shifted_exponential_samples_respect_support() {
        let m = Measure::exponential(1, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = m.sample_iid(100_000, &mut rng);
        assert!(pts.as_flat().iter().all(|&x| x >= 2.0));
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let m = Measure::new(vec![
            Law::Gaussian { mean: 1.0, sigma: 2.0 },
            Law::Exponential { shift: 0.5, rate: 3.0 },
        ])
        .unwrap();
        let a = m.sample_iid(50, &mut ChaCha8Rng::seed_from_u64(3));
        let b = m.sample_iid(50, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn gram_closed_forms() {
        let g = Measure::isotropic_gaussian(1, 1.0).unwrap();
        let v = g.gram_entry(&[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(v.re, (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);

        let e = Measure::exponential(1, 0.0, 1.0).unwrap();
        let v = e.gram_entry(&[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.5, epsilon = 1e-15);

        let w = [0.3, -1.2];
        let m = Measure::new(vec![
            Law::Gaussian { mean: 0.4, sigma: 0.7 },
            Law::Exponential { shift: 0.08, rate: 1.0 },
        ])
        .unwrap();
        assert_eq!(m.gram_entry(&w, &w).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn gram_entry_matches_monte_carlo() {
        let m = Measure::new(vec![
            Law::Gaussian { mean: 0.3, sigma: 1.0 },
            Law::Exponential { shift: 0.08, rate: 1.0 },
            Law::Fixed { value: 0.1 },
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let x = m.sample_iid(n, &mut rng);
        let wi = [0.2, -0.4, 3.0];
        let wj = [-0.9, 0.7, 1.0];
        let delta: Vec<f64> = wi.iter().zip(&wj).map(|(a, b)| b - a).collect();
        let (mut sr, mut si, mut sr2, mut si2) = (0.0, 0.0, 0.0, 0.0);
        for row in x.iter() {
            let t: f64 = row.iter().zip(&delta).map(|(a, b)| a * b).sum();
            let (c, s) = (t.cos(), t.sin());
            sr += c;
            si += s;
            sr2 += c * c;
            si2 += s * s;
        }
        let nf = n as f64;
        let (mr, mi) = (sr / nf, si / nf);
        let (se_r, se_i) = (((sr2 / nf - mr * mr) / nf).sqrt(), ((si2 / nf - mi * mi) / nf).sqrt());
        let g = m.gram_entry(&wi, &wj).unwrap();
        assert!((g.re - mr).abs() < 3.0 * se_r + 1e-12, "{g} vs {mr}");
        assert!((g.im - mi).abs() < 3.0 * se_i + 1e-12, "{g} vs {mi}");
    }

    #[test]
    fn measure_spec_parses_from_json() {
        let m: Measure = serde_json::from_str(
            r#"[{"type":"gaussian","mean":0,"sigma":1},{"type":"exponential","shift":0.08,"rate":1}]"#,
        )
        .unwrap();
        assert_eq!(m.dim(), 2);
        let bad: std::result::Result<Measure, _> =
            serde_json::from_str(r#"[{"type":"gaussian","sigma":-1}]"#);
        assert!(bad.is_err());
    }

    proptest::proptest! {
        #[test]
        fn gram_is_hermitian_and_bounded(
            a in proptest::collection::vec(-5.0f64..5.0, 3),
            b in proptest::collection::vec(-5.0f64..5.0, 3),
            sigma in 0.1f64..3.0,
            rate in 0.1f64..3.0,
            mean in -1.0f64..1.0,
        ) {
            let m = Measure::new(vec![
                Law::Gaussian { mean, sigma },
                Law::Exponential { shift: mean, rate },
                Law::Fixed { value: mean },
            ]).unwrap();
            let gij = m.gram_entry(&a, &b).unwrap();
            let gji = m.gram_entry(&b, &a).unwrap();
            proptest::prop_assert!((gij - gji.conj()).norm() < 1e-14);
            proptest::prop_assert!(gij.norm() <= 1.0 + 1e-14);
        }

        #[test]
        fn density_is_nonnegative(x in proptest::collection::vec(-10.0f64..10.0, 2)) {
            let m = Measure::new(vec![
                Law::Gaussian { mean: 0.0, sigma: 1.0 },
                Law::Exponential { shift: 0.5, rate: 2.0 },
            ]).unwrap();
            let h = m.density(&x).unwrap();
            proptest::prop_assert!(h >= 0.0);
            if x[1] < 0.5 {
                proptest::prop_assert_eq!(h, 0.0);
            }
        }
    }
}
