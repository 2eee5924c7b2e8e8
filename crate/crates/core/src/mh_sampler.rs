//! Random-walk Metropolis sampling with burn-in and thinning, plus batch
//! tuning of the proposal scale.
//!
//! The proposal is `N(x, σ₁² I)` restricted to the active coordinates, so the
//! acceptance probability is `min(1, p(x') / p(x))`. Reported acceptance is
//! accepted / proposed over every step of the chain, burn-in included. The
//! kept-per-step rate is reported separately as `keep_rate`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhConfig {
    pub sigma1: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub x0: Vec<f64>,
    pub max_steps: usize,
    /// Coordinates the proposal may move; `None` moves all of them.
    #[serde(default)]
    pub active: Option<Vec<bool>>,
    /// Keep every chain state (burn-in included) for diagnostics.
    #[serde(default)]
    pub record_trace: bool,
}

impl MhConfig {
    pub fn new(sigma1: f64, burn_in: usize, thinning: usize, x0: Vec<f64>) -> Self {
        Self {
            sigma1,
            burn_in,
            thinning,
            x0,
            max_steps: 100_000_000,
            active: None,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma1 = {} must be positive", self.sigma1)));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidArgument("thinning interval must be >= 1".into()));
        }
        if self.x0.is_empty() {
            return Err(Error::InvalidArgument("initial point is empty".into()));
        }
        if let Some(a) = &self.active {
            check_dim(self.x0.len(), a.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MhResult {
    pub samples: Points,
    /// Accepted proposals / total proposals.
    pub acceptance_rate: f64,
    /// Kept samples / total steps.
    pub keep_rate: f64,
    pub steps: usize,
    pub accepted: usize,
    pub trace: Option<Points>,
}

struct Chain<'a, F> {
    density: &'a F,
    sigma1: f64,
    active: Option<&'a [bool]>,
    x: Vec<f64>,
    px: f64,
    prop: Vec<f64>,
}

impl<'a, F: Fn(&[f64]) -> f64> Chain<'a, F> {
    fn new(density: &'a F, cfg: &'a MhConfig) -> Result<Self> {
        let px = density(&cfg.x0);
        if !(px > 0.0 && px.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "target density at the initial point {:?} is {px}; it must be positive",
                cfg.x0
            )));
        }
        Ok(Self {
            density,
            sigma1: cfg.sigma1,
            active: cfg.active.as_deref(),
            x: cfg.x0.clone(),
            px,
            prop: cfg.x0.clone(),
        })
    }

    /// One Metropolis step; returns (accepted, acceptance probability).
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (bool, f64) {
        for (k, (p, x)) in self.prop.iter_mut().zip(&self.x).enumerate() {
            let moves = self.active.is_none_or(|a| a[k]);
            *p = if moves {
                let z: f64 = StandardNormal.sample(rng);
                x + self.sigma1 * z
            } else {
                *x
            };
        }
        let pp = (self.density)(&self.prop);
        // NaN or zero density at the proposal gives alpha = 0
        let alpha = if pp > 0.0 && pp.is_finite() {
            (pp / self.px).min(1.0)
        } else {
            0.0
        };
        let u: f64 = rng.random();
        if u < alpha {
            std::mem::swap(&mut self.x, &mut self.prop);
            self.px = pp;
            (true, alpha)
        } else {
            (false, alpha)
        }
    }
}

/// Draws `total` thinned states from the chain started at `cfg.x0`.
///
/// After `burn_in` steps, every `thinning`-th state is kept, so exactly
/// `burn_in + total · thinning` steps run.
pub fn mh_sample<F, R>(density: F, cfg: &MhConfig, total: usize, rng: &mut R) -> Result<MhResult>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if total == 0 {
        return Err(Error::InvalidArgument("total kept samples must be >= 1".into()));
    }
    let mut chain = Chain::new(&density, cfg)?;
    let dim = cfg.x0.len();
    let mut samples = Points::with_capacity(dim, total);
    let mut trace = cfg
        .record_trace
        .then(|| Points::with_capacity(dim, cfg.burn_in + total * cfg.thinning));
    let mut accepted = 0usize;
    let mut t = 0usize;
    while samples.len() < total {
        t += 1;
        if t > cfg.max_steps {
            return Err(Error::Sampler(format!(
                "step cap {} reached with {}/{total} samples kept (sigma1 = {}, acceptance {:.3})",
                cfg.max_steps,
                samples.len(),
                cfg.sigma1,
                accepted as f64 / (t - 1) as f64
            )));
        }
        if chain.step(rng).0 {
            accepted += 1;
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(&chain.x)?;
        }
        if t > cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thinning) {
            samples.push(&chain.x)?;
        }
    }
    Ok(MhResult {
        samples,
        acceptance_rate: accepted as f64 / t as f64,
        keep_rate: total as f64 / t as f64,
        steps: t,
        accepted,
        trace,
    })
}

/// Target band for the acceptance rate during tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceBand {
    pub min: f64,
    pub max: f64,
}

impl AcceptanceBand {
    /// `[0.35, 0.45]` in one dimension, `[0.20, 0.26]` otherwise.
    pub fn for_dimension(d: usize) -> Self {
        if d == 1 {
            Self { min: 0.35, max: 0.45 }
        } else {
            Self { min: 0.20, max: 0.26 }
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub initial_sigma1: f64,
    pub x0: Vec<f64>,
    pub burn_in: usize,
    pub thinning: usize,
    pub band: AcceptanceBand,
    pub eta_base: f64,
    pub eta_aggr: f64,
    pub batch_size: usize,
    /// Number of batches; `ceil(burn_in / batch_size)` (at least one) when unset.
    pub batches: Option<usize>,
    pub active: Option<Vec<bool>>,
}

impl TuneConfig {
    pub fn new(initial_sigma1: f64, x0: Vec<f64>, burn_in: usize, thinning: usize) -> Self {
        let band = AcceptanceBand::for_dimension(x0.len());
        Self {
            initial_sigma1,
            x0,
            burn_in,
            thinning,
            band,
            eta_base: 0.05,
            eta_aggr: 0.08,
            batch_size: 200,
            batches: None,
            active: None,
        }
    }

    pub fn batch_count(&self) -> usize {
        self.batches
            .unwrap_or_else(|| self.burn_in.div_ceil(self.batch_size).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneBatch {
    pub sigma1: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub sigma1: f64,
    pub batches: Vec<TuneBatch>,
}

/// Multiplicative update of `σ₁` from one batch acceptance rate.
pub fn adjust_sigma1(sigma1: f64, rate: f64, band: &AcceptanceBand, eta_base: f64, eta_aggr: f64) -> f64 {
    if rate > band.max {
        sigma1 * (1.0 + eta_base + eta_aggr)
    } else if rate < band.min {
        sigma1 * (1.0 - eta_base - eta_aggr)
    } else if rate > band.center() {
        sigma1 * (1.0 + 0.5 * eta_base)
    } else if rate < band.center() {
        sigma1 * (1.0 - 0.5 * eta_base)
    } else {
        sigma1
    }
}

/// Batch tuning of the proposal scale. Each batch is an independent chain
/// from `x0` with the configured burn-in and thinning, keeping
/// `batch_size` samples; its acceptance rate drives one update of `σ₁`.
pub fn tune_sigma1<F, R>(density: F, cfg: &TuneConfig, rng: &mut R) -> Result<TuneResult>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if cfg.initial_sigma1.is_nan() || cfg.initial_sigma1 <= 0.0 {
        return Err(Error::InvalidArgument("initial sigma1 must be positive".into()));
    }
    let mut sigma1 = cfg.initial_sigma1;
    let mut batches = Vec::with_capacity(cfg.batch_count());
    for _ in 0..cfg.batch_count() {
        let mh = MhConfig {
            sigma1,
            burn_in: cfg.burn_in,
            thinning: cfg.thinning,
            x0: cfg.x0.clone(),
            max_steps: usize::MAX,
            active: cfg.active.clone(),
            record_trace: false,
        };
        let res = mh_sample(&density, &mh, cfg.batch_size, rng)?;
        batches.push(TuneBatch {
            sigma1,
            acceptance_rate: res.acceptance_rate,
        });
        sigma1 = adjust_sigma1(sigma1, res.acceptance_rate, &cfg.band, cfg.eta_base, cfg.eta_aggr);
        if sigma1 < 1e-12 {
            return Err(Error::Sampler(format!(
                "proposal scale underflow ({sigma1:e}) after {} tuning batches",
                batches.len()
            )));
        }
    }
    Ok(TuneResult { sigma1, batches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_normal(x: &[f64]) -> f64 {
        (-0.5 * x[0] * x[0]).exp()
    }

    #[test]
    fn keeps_exactly_total_after_fixed_step_count() {
        let cfg = MhConfig::new(1.0, 100, 7, vec![0.0]);
        let res = mh_sample(std_normal, &cfg, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(res.samples.len(), 50);
        assert_eq!(res.steps, 100 + 50 * 7);
        assert!((0.0..=1.0).contains(&res.acceptance_rate));
        assert!((res.keep_rate - 50.0 / 450.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = MhConfig::new(2.0, 50, 3, vec![0.1, -0.2]);
        let d = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let a = mh_sample(d, &cfg, 40, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = mh_sample(d, &cfg, 40, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.accepted, b.accepted);
    }

    #[test]
    fn zero_density_at_start_is_rejected() {
        let cfg = MhConfig::new(1.0, 0, 1, vec![-1.0]);
        let d = |x: &[f64]| if x[0] < 0.0 { 0.0 } else { 1.0 };
        assert!(mh_sample(d, &cfg, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn step_cap_aborts() {
        let mut cfg = MhConfig::new(1.0, 10, 10, vec![0.0]);
        cfg.max_steps = 50;
        let err = mh_sample(std_normal, &cfg, 10, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Sampler(_)));
    }

    #[test]
    fn rejected_steps_repeat_state_and_support_is_respected() {
        let mut cfg = MhConfig::new(1.5, 0, 1, vec![0.5]);
        cfg.record_trace = true;
        let d = |x: &[f64]| if x[0] < 0.0 { 0.0 } else { (-x[0]).exp() };
        let res = mh_sample(d, &cfg, 2000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let trace = res.trace.unwrap();
        let mut prev = 0.5;
        let mut moves = 0;
        for x in trace.iter() {
            assert!(x[0] >= 0.0);
            if x[0] != prev {
                moves += 1;
            }
            prev = x[0];
        }
        assert_eq!(moves, res.accepted);
    }

    #[test]
    fn frozen_coordinates_never_move() {
        let mut cfg = MhConfig::new(1.0, 10, 2, vec![0.0, 0.25]);
        cfg.active = Some(vec![true, false]);
        let d = |x: &[f64]| (-x[0] * x[0]).exp();
        let res = mh_sample(d, &cfg, 100, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(res.samples.iter().all(|x| x[1] == 0.25));
    }

    #[test]
    fn acceptance_decisions_follow_bernoulli_alpha() {
        // sharp two-level target
        let d = |x: &[f64]| if x[0] < 0.0 { 1.0 } else { 0.25 };
        let cfg = MhConfig::new(0.8, 0, 1, vec![0.0]);
        let mut chain = Chain::new(&d, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut acc, mut sum_a, mut var) = (0.0, 0.0, 0.0);
        for _ in 0..100_000 {
            let (ok, a) = chain.step(&mut rng);
            acc += ok as u8 as f64;
            sum_a += a;
            var += a * (1.0 - a);
        }
        assert!((acc - sum_a).abs() < 3.0 * var.sqrt(), "{acc} vs {sum_a}");
    }

    #[test]
    fn band_depends_on_dimension() {
        assert_eq!(AcceptanceBand::for_dimension(1), AcceptanceBand { min: 0.35, max: 0.45 });
        assert_eq!(AcceptanceBand::for_dimension(3), AcceptanceBand { min: 0.20, max: 0.26 });
        assert_eq!(TuneConfig::new(1.0, vec![0.0], 5000, 15).batch_count(), 25);
        assert_eq!(TuneConfig::new(1.0, vec![0.0], 5001, 15).batch_count(), 26);
    }

    #[test]
    fn adjustment_rule() {
        let band = AcceptanceBand { min: 0.35, max: 0.45 };
        assert!((adjust_sigma1(1.0, 0.9, &band, 0.05, 0.08) - 1.13).abs() < 1e-15);
        assert!((adjust_sigma1(1.0, 0.1, &band, 0.05, 0.08) - 0.87).abs() < 1e-15);
        assert!((adjust_sigma1(1.0, 0.42, &band, 0.05, 0.08) - 1.025).abs() < 1e-15);
        assert!((adjust_sigma1(1.0, 0.37, &band, 0.05, 0.08) - 0.975).abs() < 1e-15);
        assert_eq!(adjust_sigma1(1.0, 0.40, &band, 0.05, 0.08), 1.0);
    }

    #[test]
    fn constant_density_grows_sigma_every_batch() {
        let mut cfg = TuneConfig::new(0.5, vec![0.0], 400, 2);
        cfg.batch_size = 20;
        let res = tune_sigma1(|_: &[f64]| 1.0, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let k = cfg.batch_count() as i32;
        assert_eq!(k, 20);
        assert!((res.sigma1 - 0.5 * 1.13f64.powi(k)).abs() < 1e-12);
    }

    #[test]
    fn in_band_start_only_nudges() {
        // Random-walk acceptance on N(0,1) is (2/π)·atan(2/σ), about 0.40 at σ = 2.75.
        let cfg = TuneConfig::new(2.75, vec![0.0], 2000, 5);
        let res = tune_sigma1(std_normal, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let k = cfg.batch_count() as i32;
        let ratio = res.sigma1 / 2.75;
        assert!(ratio <= 1.025f64.powi(k) + 1e-12 && ratio >= 0.975f64.powi(k) - 1e-12);
        assert_eq!(res.batches.len(), k as usize);
    }

    #[test]
    fn underflow_is_reported() {
        // near-point-mass target: every proposal rejected, sigma shrinks geometrically
        let d = |x: &[f64]| if x[0] == 0.0 { 1.0 } else { 0.0 };
        let mut cfg = TuneConfig::new(1e-10, vec![0.0], 10, 1);
        cfg.batch_size = 5;
        cfg.batches = Some(500);
        let err = tune_sigma1(d, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Sampler(_)));
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(32))]
        #[test]
        fn chains_keep_total_and_only_move_on_acceptance(
            sigma1 in 0.05f64..8.0,
            burn_in in 0usize..50,
            thinning in 1usize..5,
            total in 1usize..200,
            seed in 0u64..1000,
        ) {
            // exponential-like target so that out-of-support proposals occur
            let density = |x: &[f64]| if x[0] < 0.0 { 0.0 } else { (-x[0]).exp() };
            let mut cfg = MhConfig::new(sigma1, burn_in, thinning, vec![1.0]);
            cfg.record_trace = true;
            let res = mh_sample(density, &cfg, total, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            proptest::prop_assert_eq!(res.samples.len(), total);
            proptest::prop_assert_eq!(res.steps, burn_in + total * thinning);
            let trace = res.trace.unwrap();
            let mut moves = 0;
            let mut prev = 1.0;
            for x in trace.iter() {
                proptest::prop_assert!(x[0] >= 0.0);
                if x[0] != prev {
                    moves += 1;
                }
                prev = x[0];
            }
            // a move always means acceptance; an accepted proposal equal to
            // the current state has probability zero
            proptest::prop_assert_eq!(moves, res.accepted);
        }
    }
}
