//! Random Fourier features `φ(x; w) = exp(i <x, w>)` and the linear systems
//! built from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::measures::Measure;
use crate::points::Points;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `exp(i <x, w>)`.
pub fn eval_feature(w: &[f64], x: &[f64]) -> Result<Complex64> {
    check_dim(w.len(), x.len())?;
    Ok(Complex64::cis(dot(w, x)))
}

/// Frequencies `w_1..w_N`, fixed for the lifetime of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    frequencies: Points,
}

impl FeatureSet {
    pub fn from_frequencies(frequencies: Points) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidArgument("feature set needs N >= 1".into()));
        }
        Ok(Self { frequencies })
    }

    /// Draws `n` frequencies i.i.d. from `gamma`.
    pub fn generate<R: Rng + ?Sized>(gamma: &Measure, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("feature set needs N >= 1".into()));
        }
        Ok(Self {
            frequencies: gamma.sample_iid(n, rng),
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.dim()
    }

    pub fn frequency(&self, j: usize) -> &[f64] {
        self.frequencies.row(j)
    }

    pub fn frequencies(&self) -> &Points {
        &self.frequencies
    }

    /// Restriction to the given feature indices.
    pub fn subset(&self, idx: &[usize]) -> FeatureSet {
        FeatureSet {
            frequencies: self.frequencies.select(idx),
        }
    }

    /// Assembles `A = [φ(x_s; w_r)] / √m` and `b = [f(x_s)] / √m`.
    pub fn build_system(&self, samples: &Points, values: &[f64]) -> Result<FeatureSystem> {
        self.assemble(samples, values, None)
    }

    /// Like [`build_system`](Self::build_system) with row `s` additionally
    /// scaled by `√weight(x_s)`.
    pub fn build_reweighted_system<W>(
        &self,
        samples: &Points,
        values: &[f64],
        weight: W,
    ) -> Result<FeatureSystem>
    where
        W: Fn(&[f64]) -> f64,
    {
        let mut weights = Vec::with_capacity(samples.len());
        for x in samples.iter() {
            let w = weight(x);
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "row weight {w} at {x:?} must be finite and nonnegative"
                )));
            }
            weights.push(w);
        }
        self.assemble(samples, values, Some(&weights))
    }

    fn assemble(
        &self,
        samples: &Points,
        values: &[f64],
        weights: Option<&[f64]>,
    ) -> Result<FeatureSystem> {
        check_dim(self.dim(), samples.dim())?;
        check_dim(samples.len(), values.len())?;
        let m = samples.len();
        if m == 0 {
            return Err(Error::InvalidArgument("system needs at least one sample".into()));
        }
        let n = self.len();
        let norm = 1.0 / (m as f64).sqrt();
        let row_scale = |s: usize| match weights {
            Some(w) => w[s].sqrt() * norm,
            None => norm,
        };
        let a = DMatrix::from_fn(m, n, |s, r| {
            Complex64::cis(dot(samples.row(s), self.frequencies.row(r))) * row_scale(s)
        });
        let b = DVector::from_fn(m, |s, _| Complex64::new(values[s] * row_scale(s), 0.0));
        Ok(FeatureSystem { a, b })
    }

    /// `Σ_j c_j φ(x; w_j)`, skipping zero coefficients.
    pub fn eval_expansion_complex(&self, coeffs: &CVector, x: &[f64]) -> Result<Complex64> {
        check_dim(self.len(), coeffs.len())?;
        check_dim(self.dim(), x.len())?;
        Ok(coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(|(j, c)| c * Complex64::cis(dot(self.frequencies.row(j), x)))
            .sum())
    }

    /// Real-valued prediction: the real part of the complex expansion.
    pub fn eval_expansion(&self, coeffs: &CVector, x: &[f64]) -> Result<f64> {
        Ok(self.eval_expansion_complex(coeffs, x)?.re)
    }

    /// Evaluates the expansion at many points, touching only the support.
    pub fn eval_expansion_many(&self, coeffs: &CVector, xs: &Points) -> Result<Vec<f64>> {
        check_dim(self.len(), coeffs.len())?;
        check_dim(self.dim(), xs.dim())?;
        let active: Vec<(usize, Complex64)> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::new(0.0, 0.0))
            .map(|(j, c)| (j, *c))
            .collect();
        Ok(xs
            .iter()
            .map(|x| {
                active
                    .iter()
                    .map(|&(j, c)| (c * Complex64::cis(dot(self.frequencies.row(j), x))).re)
                    .sum()
            })
            .collect())
    }
}

/// A feature matrix and right-hand side, both carrying the `1/√m` factor.
#[derive(Debug, Clone)]
pub struct FeatureSystem {
    pub a: CMatrix,
    pub b: CVector,
}

impl FeatureSystem {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn std_dev(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn generated_features_have_requested_scale() {
        let gamma = Measure::isotropic_gaussian(1, 1.0).unwrap();
        let f = FeatureSet::generate(&gamma, 1000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(f.len(), 1000);
        let sd = std_dev(f.frequencies().as_flat());
        assert!((sd - 1.0).abs() < 0.1, "sd {sd}");

        let one = FeatureSet::generate(&gamma, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(FeatureSet::generate(&gamma, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn vector_scale_features() {
        let gamma = Measure::diagonal_gaussian(&[1.0, 1e-3]).unwrap();
        let f = FeatureSet::generate(&gamma, 100_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ratio = std_dev(&f.frequencies().column(0)) / std_dev(&f.frequencies().column(1));
        assert!((ratio / 1000.0 - 1.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn feature_values() {
        assert_eq!(eval_feature(&[0.0, 0.0], &[3.0, -1.0]).unwrap(), Complex64::new(1.0, 0.0));
        let v = eval_feature(&[PI], &[1.0]).unwrap();
        assert_abs_diff_eq!(v.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        assert!(eval_feature(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn trivial_system() {
        let f = FeatureSet::from_frequencies(Points::from_rows(1, &[[0.0]]).unwrap()).unwrap();
        let x = Points::from_rows(1, &[[0.7]]).unwrap();
        let sys = f.build_system(&x, &[2.0]).unwrap();
        assert_eq!(sys.a[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(sys.b[0], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn system_entries_match_direct_formula() {
        let w = Points::from_rows(2, &[[0.5, -1.0], [2.0, 0.25]]).unwrap();
        let f = FeatureSet::from_frequencies(w).unwrap();
        let x = Points::from_rows(2, &[[0.1, 0.2], [-1.0, 3.0], [0.0, 0.5]]).unwrap();
        let vals = [1.0, -2.0, 0.5];
        let sys = f.build_system(&x, &vals).unwrap();
        let scale = 1.0 / 3f64.sqrt();
        for (s, v) in vals.iter().enumerate() {
            for r in 0..2 {
                let (xs, wr) = (x.row(s), f.frequency(r));
                let arg = xs[0] * wr[0] + xs[1] * wr[1];
                let expect = Complex64::new(arg.cos(), arg.sin()) * scale;
                assert!((sys.a[(s, r)] - expect).norm() < 1e-15);
            }
            assert!((sys.b[s].re - v * scale).abs() < 1e-15);
        }
    }

    #[test]
    fn reweighting() {
        let gamma = Measure::isotropic_gaussian(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = FeatureSet::generate(&gamma, 7, &mut rng).unwrap();
        let x = gamma.sample_iid(11, &mut rng);
        let vals: Vec<f64> = x.iter().map(|r| r[0] - r[1]).collect();
        let plain = f.build_system(&x, &vals).unwrap();
        let unit = f.build_reweighted_system(&x, &vals, |_| 1.0).unwrap();
        assert_eq!(plain.a, unit.a);
        assert_eq!(plain.b, unit.b);
        let four = f.build_reweighted_system(&x, &vals, |_| 4.0).unwrap();
        assert!((four.a.clone() - plain.a.clone() * Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!((four.b - plain.b * Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!(f.build_reweighted_system(&x, &vals, |_| -1.0).is_err());
        assert!(f.build_reweighted_system(&x, &vals, |_| f64::NAN).is_err());
    }

    #[test]
    fn expansion_basics() {
        let gamma = Measure::isotropic_gaussian(1, 1.0).unwrap();
        let f = FeatureSet::generate(&gamma, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let zero = CVector::zeros(5);
        assert_eq!(f.eval_expansion(&zero, &[0.3]).unwrap(), 0.0);

        let w0 = FeatureSet::from_frequencies(Points::from_rows(1, &[[0.0]]).unwrap()).unwrap();
        let one = CVector::from_element(1, Complex64::new(1.0, 0.0));
        for x in [-3.0, 0.0, 2.5] {
            assert_eq!(w0.eval_expansion(&one, &[x]).unwrap(), 1.0);
        }
    }

    #[test]
    fn true_coefficients_reproduce_rhs() {
        let gamma = Measure::isotropic_gaussian(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = FeatureSet::generate(&gamma, 6, &mut rng).unwrap();
        let c = CVector::from_fn(6, |j, _| Complex64::new(j as f64 - 2.0, 0.5 * j as f64));
        let x = gamma.sample_iid(9, &mut rng);
        // complex-valued target: compare A c against the complex expansion directly
        let sys = f.build_system(&x, &[0.0; 9]).unwrap();
        let ac = &sys.a * &c;
        for s in 0..9 {
            let direct = f.eval_expansion_complex(&c, x.row(s)).unwrap() / 3.0;
            assert!((ac[s] - direct).norm() < 1e-13);
        }
    }

    proptest::proptest! {
        #[test]
        fn columns_have_unit_norm(seed in 0u64..1000, m in 1usize..40) {
            let gamma = Measure::isotropic_gaussian(3, 2.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = FeatureSet::generate(&gamma, 8, &mut rng).unwrap();
            let x = gamma.sample_iid(m, &mut rng);
            let sys = f.build_system(&x, &vec![1.0; m]).unwrap();
            for col in sys.a.column_iter() {
                proptest::prop_assert!((col.norm() - 1.0).abs() < 1e-13);
            }
        }

        #[test]
        fn expansion_is_linear(seed in 0u64..1000, a in -3.0f64..3.0) {
            let gamma = Measure::isotropic_gaussian(2, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = FeatureSet::generate(&gamma, 10, &mut rng).unwrap();
            let c1 = CVector::from_fn(10, |j, _| Complex64::new((j as f64).sin(), (j as f64).cos()));
            let c2 = CVector::from_fn(10, |j, _| Complex64::new(1.0 / (1.0 + j as f64), -0.3));
            let x = [0.4, -1.1];
            let lhs = f.eval_expansion_complex(&(c1.clone() * Complex64::new(a, 0.0) + &c2), &x).unwrap();
            let rhs = f.eval_expansion_complex(&c1, &x).unwrap() * a + f.eval_expansion_complex(&c2, &x).unwrap();
            proptest::prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
