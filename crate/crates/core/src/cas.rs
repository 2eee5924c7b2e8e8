//! The adaptive sampling loop, its boosting step, and the non-adaptive
//! baseline.
//!
//! Both arms produce nested sample sets: the points used at schedule entry
//! `m_i` are the first `m_i` points used at `m_{i+1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::christoffel::{build_basis, OrthonormalBasis, Truncation};
use crate::error::{check_dim, Error, Result};
use crate::features::{CVector, FeatureSet};
use crate::linalg::min_singular_value;
use crate::measures::{Law, Measure};
use crate::mh_sampler::{mh_sample, tune_sigma1, MhConfig, TuneConfig, TuneResult};
use crate::points::Points;
use crate::sparse_recovery::{solve_normalized, HtpParams, SolverKind};

/// Errors below this are floored before taking logarithms.
pub const ERROR_FLOOR: f64 = 1e-16;

/// Sampler settings shared by tuning and boosting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MhSettings {
    pub sigma1_init: f64,
    pub burn_in: usize,
    pub thinning: usize,
    /// Chain start; the target's default when unset.
    pub x0: Option<Vec<f64>>,
    pub max_steps: usize,
    /// Tune `σ₁` before the loop; otherwise `sigma1_init` is used as is.
    pub tune: bool,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self {
            sigma1_init: 1.0,
            burn_in: 5000,
            thinning: 15,
            x0: None,
            max_steps: 100_000_000,
            tune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasConfig {
    pub schedule: Vec<usize>,
    pub boosting: usize,
    pub solver: SolverKind,
    pub htp: HtpParams,
    pub truncation: Truncation,
    /// Weight rows by the most recent basis from the second iteration on.
    pub reweight: bool,
    /// `s_i = m_i / sparsity_divisor`.
    pub sparsity_divisor: usize,
    pub mh: MhSettings,
    /// Replace `K` by the constant `r` (sampling from `ρ` with unit weights).
    pub flat_christoffel: bool,
}

impl Default for CasConfig {
    fn default() -> Self {
        Self {
            schedule: (1..=10).map(|k| 100 * k).collect(),
            boosting: 5,
            solver: SolverKind::Htp,
            htp: HtpParams::default(),
            truncation: Truncation::default(),
            reweight: true,
            sparsity_divisor: 4,
            mh: MhSettings::default(),
            flat_christoffel: false,
        }
    }
}

impl CasConfig {
    pub fn sparsity(&self, m: usize) -> usize {
        m / self.sparsity_divisor
    }

    /// Checks the schedule against a dictionary of `n_features` features.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        validate_schedule(&self.schedule, self.sparsity_divisor, n_features)?;
        if self.boosting == 0 {
            return Err(Error::InvalidArgument("boosting count must be >= 1".into()));
        }
        if !(self.mh.sigma1_init > 0.0 && self.mh.sigma1_init.is_finite()) {
            return Err(Error::InvalidArgument("mh.sigma1_init must be positive".into()));
        }
        if self.mh.thinning == 0 {
            return Err(Error::InvalidArgument("mh.thinning must be >= 1".into()));
        }
        Ok(())
    }
}

/// Schedule must be nonempty, strictly increasing, with `1 ≤ s_i < m_i ≤ N`.
pub fn validate_schedule(schedule: &[usize], sparsity_divisor: usize, n_features: usize) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("schedule is empty".into()));
    }
    if sparsity_divisor < 2 {
        return Err(Error::InvalidArgument("sparsity divisor must be >= 2".into()));
    }
    if let Some(w) = schedule.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "schedule must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    if schedule[0] < sparsity_divisor {
        return Err(Error::InvalidArgument(format!(
            "first schedule entry {} gives zero sparsity",
            schedule[0]
        )));
    }
    let last = *schedule.last().expect("nonempty");
    if last > n_features {
        return Err(Error::InvalidArgument(format!(
            "schedule entry {last} exceeds the feature count {n_features}"
        )));
    }
    Ok(())
}

/// Held-out points shared by both arms of a trial.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub points: Points,
    pub values: Vec<f64>,
    norm_sq: f64,
}

impl TestSet {
    pub fn new(points: Points, values: Vec<f64>) -> Result<Self> {
        check_dim(points.len(), values.len())?;
        let norm_sq: f64 = values.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            return Err(Error::ZeroTargetNorm);
        }
        Ok(Self { points, values, norm_sq })
    }

    pub fn draw<F, R>(target: &F, measure: &Measure, n_test: usize, rng: &mut R) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64>,
        R: Rng + ?Sized,
    {
        if n_test == 0 {
            return Err(Error::InvalidArgument("n_test must be >= 1".into()));
        }
        let points = measure.sample_iid(n_test, rng);
        let values = points.iter().map(target).collect::<Result<Vec<_>>>()?;
        Self::new(points, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `‖f − f̂‖ / ‖f‖` over the test points.
    pub fn relative_error_of(&self, predictions: &[f64]) -> Result<f64> {
        check_dim(self.len(), predictions.len())?;
        let num: f64 = self.values.iter().zip(predictions).map(|(f, g)| (f - g).powi(2)).sum();
        Ok((num / self.norm_sq).sqrt())
    }

    /// Relative error of the real part of the expansion.
    pub fn relative_error(&self, features: &FeatureSet, coeffs: &CVector) -> Result<f64> {
        let pred = features.eval_expansion_many(coeffs, &self.points)?;
        self.relative_error_of(&pred)
    }
}

/// Result of one boosting step.
#[derive(Debug, Clone)]
pub struct BoostOutcome {
    pub samples: Points,
    pub best_stability: f64,
    pub candidate_stabilities: Vec<f64>,
    pub candidate_acceptance: Vec<f64>,
    pub chosen: usize,
}

/// Draws `new_count - prior.len()` points from the CS measure of `basis`
/// `boosting` times and keeps the candidate set whose weighted design matrix
/// has the largest smallest singular value. Ties go to the earliest
/// candidate.
pub fn boost_draw<R: Rng + ?Sized>(
    prior: &Points,
    basis: &OrthonormalBasis,
    mh: &MhConfig,
    new_count: usize,
    boosting: usize,
    rng: &mut R,
) -> Result<BoostOutcome> {
    if boosting == 0 {
        return Err(Error::InvalidArgument("boosting count must be >= 1".into()));
    }
    if new_count <= prior.len() {
        return Err(Error::InvalidArgument(format!(
            "new sample count {new_count} must exceed the prior count {}",
            prior.len()
        )));
    }
    let extra = new_count - prior.len();
    let density = |x: &[f64]| basis.cs_density(x).unwrap_or(0.0);
    let mut best: Option<(usize, Points)> = None;
    let mut stabilities = Vec::with_capacity(boosting);
    let mut acceptance = Vec::with_capacity(boosting);
    for k in 0..boosting {
        let mut crng = ChaCha8Rng::seed_from_u64(rng.random());
        let drawn = mh_sample(density, mh, extra, &mut crng)?;
        let mut candidate = prior.clone();
        candidate.extend(&drawn.samples)?;
        let sigma = min_singular_value(basis.weighted_design(&candidate)?);
        acceptance.push(drawn.acceptance_rate);
        let better = match &best {
            None => true,
            Some((j, _)) => sigma > stabilities[*j],
        };
        stabilities.push(sigma);
        if better {
            best = Some((k, candidate));
        }
    }
    let (chosen, samples) = best.expect("at least one candidate");
    Ok(BoostOutcome {
        samples,
        best_stability: stabilities[chosen],
        candidate_stabilities: stabilities,
        candidate_acceptance: acceptance,
        chosen,
    })
}

/// State after one schedule entry.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub samples: usize,
    pub sparsity: usize,
    pub support: Vec<usize>,
    /// Dimension of the truncated basis over `support`; absent for NAS.
    pub effective_dim: Option<usize>,
    pub relative_error: f64,
    pub residual_norm: f64,
    pub solver_iterations: usize,
    /// Stabilities of the boosting candidates that produced this
    /// iteration's new points.
    pub candidate_stabilities: Vec<f64>,
    pub best_stability: Option<f64>,
    /// MH acceptance of the chosen candidate.
    pub mh_acceptance: Option<f64>,
    #[serde(skip)]
    pub coefficients: CVector,
    #[serde(skip)]
    pub sample_set: Points,
}

/// Output of one arm.
#[derive(Debug, Clone)]
pub struct ArmRun {
    pub records: Vec<IterationRecord>,
    pub tuning: Option<TuneResult>,
    pub sigma1: Option<f64>,
}

fn attach(iteration: usize, samples: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Iteration {
        iteration,
        samples,
        source: Box::new(e),
    }
}

fn eval_points<F>(target: &F, pts: &Points) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    pts.iter().map(target).collect()
}

/// Starting point for chains: the configured one, with point-mass
/// coordinates pinned to their value.
pub fn chain_start(measure: &Measure, x0: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut x = match x0 {
        Some(v) => {
            check_dim(measure.dim(), v.len())?;
            v.to_vec()
        }
        None => measure
            .laws()
            .iter()
            .map(|l| match l {
                Law::Exponential { shift, .. } => shift + 1.0,
                _ => 0.0,
            })
            .collect(),
    };
    for (xk, law) in x.iter_mut().zip(measure.laws()) {
        if let Law::Fixed { value } = law {
            *xk = *value;
        }
    }
    Ok(x)
}

fn make_basis(measure: &Measure, features: &FeatureSet, support: &[usize], cfg: &CasConfig) -> Result<OrthonormalBasis> {
    let b = build_basis(measure, features, support, cfg.truncation)?;
    Ok(if cfg.flat_christoffel { b.with_flat_christoffel() } else { b })
}

/// Christoffel adaptive sampling over `config.schedule`.
pub fn run_cas<F, R>(
    target: &F,
    measure: &Measure,
    features: &FeatureSet,
    test: &TestSet,
    config: &CasConfig,
    rng: &mut R,
) -> Result<ArmRun>
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    config.validate(features.len())?;
    check_dim(measure.dim(), features.dim())?;
    let schedule = &config.schedule;
    let x0 = chain_start(measure, config.mh.x0.as_deref())?;
    let active = measure.free_coordinates();
    let active = if active.iter().all(|&a| a) { None } else { Some(active) };

    // proposal scale, tuned once on the leading features
    let init_support: Vec<usize> = (0..config.sparsity(schedule[0])).collect();
    let (sigma1, tuning) = if config.mh.tune {
        let basis0 = make_basis(measure, features, &init_support, config).map_err(attach(0, schedule[0]))?;
        let mut tc = TuneConfig::new(config.mh.sigma1_init, x0.clone(), config.mh.burn_in, config.mh.thinning);
        tc.active = active.clone();
        let density = |x: &[f64]| basis0.cs_density(x).unwrap_or(0.0);
        let tuned = tune_sigma1(density, &tc, rng).map_err(attach(0, schedule[0]))?;
        (tuned.sigma1, Some(tuned))
    } else {
        (config.mh.sigma1_init, None)
    };
    let mh = MhConfig {
        sigma1,
        burn_in: config.mh.burn_in,
        thinning: config.mh.thinning,
        x0,
        max_steps: config.mh.max_steps,
        active,
        record_trace: false,
    };

    let mut samples = measure.sample_iid(schedule[0], rng);
    let mut values = eval_points(target, &samples).map_err(attach(1, schedule[0]))?;
    let mut prev_basis: Option<OrthonormalBasis> = None;
    let mut pending: Option<BoostOutcome> = None;
    let mut records = Vec::with_capacity(schedule.len());

    for (i, &m) in schedule.iter().enumerate() {
        let ctx = attach(i + 1, m);
        let s = config.sparsity(m);
        let sys = match (&prev_basis, config.reweight) {
            (Some(basis), true) => features.build_reweighted_system(&samples, &values, basis.reweight_fn()),
            _ => features.build_system(&samples, &values),
        }
        .map_err(&ctx)?;
        let sol = solve_normalized(&sys.a, &sys.b, s, config.solver, &config.htp).map_err(&ctx)?;
        let coeffs = sol.coeffs.clone();
        let err = test.relative_error(features, &coeffs).map_err(&ctx)?;
        let basis = make_basis(measure, features, &sol.support, config).map_err(&ctx)?;

        let boost = pending.take();
        records.push(IterationRecord {
            iteration: i + 1,
            samples: m,
            sparsity: s,
            support: sol.support.clone(),
            effective_dim: Some(basis.dim()),
            relative_error: err,
            residual_norm: sol.residual_norm,
            solver_iterations: sol.iterations,
            candidate_stabilities: boost.as_ref().map(|b| b.candidate_stabilities.clone()).unwrap_or_default(),
            best_stability: boost.as_ref().map(|b| b.best_stability),
            mh_acceptance: boost.as_ref().map(|b| b.candidate_acceptance[b.chosen]),
            coefficients: coeffs,
            sample_set: samples.clone(),
        });

        if let Some(&next) = schedule.get(i + 1) {
            let out = boost_draw(&samples, &basis, &mh, next, config.boosting, rng).map_err(attach(i + 2, next))?;
            let fresh = Points::from_flat(samples.dim(), out.samples.as_flat()[samples.as_flat().len()..].to_vec())?;
            let new_vals = eval_points(target, &fresh).map_err(attach(i + 2, next))?;
            values.extend(new_vals);
            samples = out.samples.clone();
            pending = Some(out);
        }
        prev_basis = Some(basis);
    }
    Ok(ArmRun {
        records,
        tuning,
        sigma1: Some(sigma1),
    })
}

/// Non-adaptive baseline: nested i.i.d. draws from `ρ`, unweighted.
#[allow(clippy::too_many_arguments)]
pub fn run_nas<F, R>(
    target: &F,
    measure: &Measure,
    features: &FeatureSet,
    test: &TestSet,
    schedule: &[usize],
    solver: SolverKind,
    htp: &HtpParams,
    sparsity_divisor: usize,
    rng: &mut R,
) -> Result<ArmRun>
where
    F: Fn(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    validate_schedule(schedule, sparsity_divisor, features.len())?;
    check_dim(measure.dim(), features.dim())?;
    let mut samples = Points::new(measure.dim());
    let mut values = Vec::new();
    let mut records = Vec::with_capacity(schedule.len());
    for (i, &m) in schedule.iter().enumerate() {
        let ctx = attach(i + 1, m);
        let fresh = measure.sample_iid(m - samples.len(), rng);
        values.extend(eval_points(target, &fresh).map_err(&ctx)?);
        samples.extend(&fresh)?;
        let s = m / sparsity_divisor;
        let sys = features.build_system(&samples, &values).map_err(&ctx)?;
        let sol = solve_normalized(&sys.a, &sys.b, s, solver, htp).map_err(&ctx)?;
        let coeffs = sol.coeffs.clone();
        let err = test.relative_error(features, &coeffs).map_err(&ctx)?;
        records.push(IterationRecord {
            iteration: i + 1,
            samples: m,
            sparsity: s,
            support: sol.support,
            effective_dim: None,
            relative_error: err,
            residual_norm: sol.residual_norm,
            solver_iterations: sol.iterations,
            candidate_stabilities: Vec::new(),
            best_stability: None,
            mh_acceptance: None,
            coefficients: coeffs,
            sample_set: samples.clone(),
        });
    }
    Ok(ArmRun {
        records,
        tuning: None,
        sigma1: None,
    })
}

/// Geometric mean and geometric standard deviation, `exp(mean(log e))` and
/// `exp(std(log e))` with the `n − 1` normalization. Errors are floored at
/// [`ERROR_FLOOR`].
pub fn geometric_stats(errors: &[f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let logs: Vec<f64> = errors.iter().map(|e| e.max(ERROR_FLOOR).ln()).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = if logs.len() > 1 {
        logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean.exp(), var.sqrt().exp())
}
