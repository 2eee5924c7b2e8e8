//! Trial execution and aggregation.

use std::time::Instant;

use cas_srfe::{
    geometric_stats, run_cas, run_nas, ArmRun, FeatureSet, IterationRecord, Measure, TestSet, TuneResult,
};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ResolvedConfig};
use crate::seeds::{stream_rng, Component, SeedInfo};

/// More than this fraction of failed trials fails the run.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{failed} of {trials} trials failed (limit {limit:.0}%): {first}")]
    TooManyFailures {
        failed: usize,
        trials: usize,
        limit: f64,
        first: String,
    },
    #[error(transparent)]
    Core(#[from] cas_srfe::Error),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Cas,
    Nas,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Cas => "cas",
            Arm::Nas => "nas",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmReport {
    pub sigma1: Option<f64>,
    pub tuning: Option<TuneResult>,
    pub iterations: Vec<IterationRecord>,
}

impl From<&ArmRun> for ArmReport {
    fn from(run: &ArmRun) -> Self {
        Self {
            sigma1: run.sigma1,
            tuning: run.tuning.clone(),
            iterations: run.records.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub ok: bool,
    pub error: Option<String>,
    pub cas: Option<ArmReport>,
    pub nas: Option<ArmReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub m: usize,
    pub geo_mean_error: f64,
    pub geo_std_error: f64,
    /// One entry per successful trial, in trial order.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmCurve {
    pub arm: Arm,
    pub points: Vec<CurvePoint>,
}

/// Settings after defaults were applied.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveSettings {
    pub target: String,
    pub dim: usize,
    pub measure: Measure,
    pub n_features: usize,
    pub sigma_w: Vec<f64>,
    pub schedule: Vec<usize>,
    pub cas: cas_srfe::CasConfig,
    pub n_test: usize,
}

/// Everything written to `results.json`. Contains no timings, so equal
/// configurations give byte-identical files.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub effective: EffectiveSettings,
    pub seeds: SeedInfo,
    pub successful_trials: Vec<usize>,
    pub failed_trials: Vec<usize>,
    pub curves: Vec<ArmCurve>,
    pub trials: Vec<TrialReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialTiming {
    pub trial: usize,
    pub setup_seconds: f64,
    pub cas_seconds: f64,
    pub nas_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub jobs: usize,
    pub total_seconds: f64,
    pub trials: Vec<TrialTiming>,
}

/// Full in-memory output of a run.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub result: ExperimentResult,
    pub timings: Timings,
    /// Raw arm runs of successful trials, kept for diagnostics output.
    pub runs: Vec<Option<(ArmRun, ArmRun)>>,
}

impl ExperimentResult {
    pub fn curve(&self, arm: Arm) -> &ArmCurve {
        self.curves.iter().find(|c| c.arm == arm).expect("both arms present")
    }
}

struct TrialRun {
    report: TrialReport,
    timing: TrialTiming,
    runs: Option<(ArmRun, ArmRun)>,
}

fn run_trial(cfg: &ResolvedConfig, trial: usize) -> TrialRun {
    let seed = cfg.raw.seed;
    let t0 = Instant::now();
    let target = |x: &[f64]| cfg.target.eval(x);
    let mut timing = TrialTiming {
        trial,
        setup_seconds: 0.0,
        cas_seconds: 0.0,
        nas_seconds: 0.0,
    };
    let outcome = (|| -> cas_srfe::Result<(ArmRun, ArmRun)> {
        let gamma = Measure::diagonal_gaussian(&cfg.sigma_w)?;
        let features = FeatureSet::generate(&gamma, cfg.n_features, &mut stream_rng(seed, trial, Component::Features))?;
        let test = TestSet::draw(&target, &cfg.measure, cfg.raw.n_test, &mut stream_rng(seed, trial, Component::Test))?;
        timing.setup_seconds = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let cas = run_cas(&target, &cfg.measure, &features, &test, &cfg.cas, &mut stream_rng(seed, trial, Component::Cas))?;
        timing.cas_seconds = t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let nas = run_nas(
            &target,
            &cfg.measure,
            &features,
            &test,
            &cfg.schedule,
            cfg.cas.solver,
            &cfg.cas.htp,
            cfg.cas.sparsity_divisor,
            &mut stream_rng(seed, trial, Component::Nas),
        )?;
        timing.nas_seconds = t2.elapsed().as_secs_f64();
        Ok((cas, nas))
    })();
    match outcome {
        Ok((cas, nas)) => {
            info!(
                "trial {trial}: cas {:.3e}, nas {:.3e} at m = {}",
                cas.records.last().map_or(f64::NAN, |r| r.relative_error),
                nas.records.last().map_or(f64::NAN, |r| r.relative_error),
                cfg.schedule.last().copied().unwrap_or(0)
            );
            TrialRun {
                report: TrialReport {
                    trial,
                    ok: true,
                    error: None,
                    cas: Some(ArmReport::from(&cas)),
                    nas: Some(ArmReport::from(&nas)),
                },
                timing,
                runs: Some((cas, nas)),
            }
        }
        Err(e) => {
            warn!("trial {trial} failed: {e}");
            TrialRun {
                report: TrialReport {
                    trial,
                    ok: false,
                    error: Some(e.to_string()),
                    cas: None,
                    nas: None,
                },
                timing,
                runs: None,
            }
        }
    }
}

fn aggregate(schedule: &[usize], reports: &[TrialReport], arm: Arm) -> ArmCurve {
    let points = schedule
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let errors: Vec<f64> = reports
                .iter()
                .filter(|r| r.ok)
                .map(|r| {
                    let rep = match arm {
                        Arm::Cas => r.cas.as_ref(),
                        Arm::Nas => r.nas.as_ref(),
                    };
                    rep.expect("successful trial has both arms").iterations[i].relative_error
                })
                .collect();
            let (g, s) = geometric_stats(&errors);
            CurvePoint {
                m,
                geo_mean_error: g,
                geo_std_error: s,
                errors,
            }
        })
        .collect();
    ArmCurve { arm, points }
}

/// Number of worker threads: the explicit value, else `CAS_SRFE_JOBS`, else
/// the available parallelism.
pub fn resolve_jobs(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("CAS_SRFE_JOBS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every trial of `cfg` on `jobs` threads and aggregates the errors.
pub fn run_experiment(cfg: &ResolvedConfig, jobs: usize) -> Result<ExperimentOutput, RunError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let trials = cfg.raw.trials;
    let mut runs: Vec<TrialRun> = pool.install(|| (0..trials).into_par_iter().map(|t| run_trial(cfg, t)).collect());
    runs.sort_by_key(|r| r.report.trial);

    let failed: Vec<usize> = runs.iter().filter(|r| !r.report.ok).map(|r| r.report.trial).collect();
    if failed.len() as f64 > MAX_FAILED_FRACTION * trials as f64 || failed.len() == trials {
        let first = runs
            .iter()
            .find_map(|r| r.report.error.clone())
            .unwrap_or_default();
        return Err(RunError::TooManyFailures {
            failed: failed.len(),
            trials,
            limit: 100.0 * MAX_FAILED_FRACTION,
            first,
        });
    }
    if !failed.is_empty() {
        warn!("{} of {trials} trials failed and are excluded: {failed:?}", failed.len());
    }

    let reports: Vec<TrialReport> = runs.iter().map(|r| r.report.clone()).collect();
    let curves = vec![
        aggregate(&cfg.schedule, &reports, Arm::Cas),
        aggregate(&cfg.schedule, &reports, Arm::Nas),
    ];
    let result = ExperimentResult {
        config: cfg.raw.clone(),
        effective: EffectiveSettings {
            target: cfg.target.name().to_string(),
            dim: cfg.target.dim(),
            measure: cfg.measure.clone(),
            n_features: cfg.n_features,
            sigma_w: cfg.sigma_w.clone(),
            schedule: cfg.schedule.clone(),
            cas: cfg.cas.clone(),
            n_test: cfg.raw.n_test,
        },
        seeds: SeedInfo::new(cfg.raw.seed, trials),
        successful_trials: reports.iter().filter(|r| r.ok).map(|r| r.trial).collect(),
        failed_trials: failed,
        curves,
        trials: reports,
    };
    let timings = Timings {
        jobs,
        total_seconds: start.elapsed().as_secs_f64(),
        trials: runs.iter().map(|r| r.timing.clone()).collect(),
    };
    Ok(ExperimentOutput {
        result,
        timings,
        runs: runs.into_iter().map(|r| r.runs).collect(),
    })
}
