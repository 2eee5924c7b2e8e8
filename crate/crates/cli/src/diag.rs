//! Sampler diagnostics for a single CS density, without the adaptive loop.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cas_srfe::cas::chain_start;
use cas_srfe::{
    mh_sample, tune_sigma1, FeatureSet, Law, Measure, MhConfig, OrthonormalBasis, TargetFunction, TuneConfig,
    Truncation,
};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SigmaW};
use crate::experiment::RunError;
use crate::CliError;
use crate::output::{write_atomic, DIAG_DIR};
use crate::seeds::{stream_rng, Component};

fn default_features() -> usize {
    100
}
fn default_sigma1() -> f64 {
    5.0
}
fn default_burn_in() -> usize {
    2000
}
fn default_thinning() -> usize {
    5
}
fn default_total() -> usize {
    5000
}
fn default_grid() -> usize {
    400
}
fn default_bins() -> usize {
    30
}

/// Contents of an `mh-diag` configuration file. The measure comes from
/// `measure` or else from the named target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagConfig {
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub measure: Option<Vec<Law>>,
    #[serde(default = "default_features")]
    pub n_features: usize,
    #[serde(default)]
    pub sigma_w: Option<SigmaW>,
    #[serde(default = "default_sigma1")]
    pub sigma1: f64,
    #[serde(default)]
    pub tune: bool,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default = "default_total")]
    pub total: usize,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    /// Grid points per axis for density evaluation.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Histogram bins for the one-dimensional total-variation estimate.
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagSummary {
    pub dim: usize,
    pub n_features: usize,
    pub effective_dim: usize,
    pub sigma1: f64,
    pub acceptance_rate: f64,
    pub keep_rate: f64,
    pub steps: usize,
    pub kept: usize,
    pub sample_mean: Vec<f64>,
    /// Histogram vs. density total variation (one-dimensional inputs only).
    pub tv_distance: Option<f64>,
}

pub struct DiagRun {
    pub summary: DiagSummary,
    pub files: Vec<(String, String)>,
}

impl DiagConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    fn measure(&self) -> Result<(Measure, Option<TargetFunction>), ConfigError> {
        let target = match &self.target {
            Some(name) => Some(TargetFunction::from_name(name).map_err(|e| ConfigError::new("target", e.to_string()))?),
            None => None,
        };
        let measure = match (&self.measure, &target) {
            (Some(laws), _) => Measure::new(laws.clone()).map_err(|e| ConfigError::new("measure", e.to_string()))?,
            (None, Some(t)) => t.measure().clone(),
            (None, None) => return Err(ConfigError::new("measure", "give either `measure` or `target`")),
        };
        Ok((measure, target))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (measure, _) = self.measure()?;
        if self.n_features == 0 {
            return Err(ConfigError::new("n_features", "must be positive"));
        }
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return Err(ConfigError::new("sigma1", "must be positive"));
        }
        if self.thinning == 0 {
            return Err(ConfigError::new("thinning", "must be >= 1"));
        }
        if self.total == 0 {
            return Err(ConfigError::new("total", "must be >= 1"));
        }
        if self.grid_points < 2 || self.bins == 0 {
            return Err(ConfigError::new("grid_points", "need at least two grid points and one bin"));
        }
        if let Some(SigmaW::Vector(v)) = &self.sigma_w {
            if v.len() != measure.dim() {
                return Err(ConfigError::new("sigma_w", format!("needs {} entries", measure.dim())));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != measure.dim() {
                return Err(ConfigError::new("x0", format!("needs {} entries", measure.dim())));
            }
        }
        Ok(())
    }
}

/// Interval holding essentially all the mass of a law and of CS densities
/// built on it, whose tails are much heavier than the law's own.
pub fn law_window(law: &Law) -> (f64, f64) {
    match *law {
        Law::Gaussian { mean, sigma } => (mean - 15.0 * sigma, mean + 15.0 * sigma),
        Law::Exponential { shift, rate } => (shift, shift + 30.0 / rate),
        Law::Fixed { value } => (value, value),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Total variation between the sample histogram and the density's bin
/// masses on `[lo, hi]`. Bin masses come from Simpson's rule and are
/// normalized over the window.
pub fn histogram_tv<F: Fn(f64) -> f64>(samples: &[f64], density: F, lo: f64, hi: f64, bins: usize) -> f64 {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if x >= lo && x < hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let masses: Vec<f64> = (0..bins)
        .map(|b| {
            let a = lo + b as f64 * width;
            let n = 16;
            let h = width / n as f64;
            let mut s = density(a) + density(a + width);
            for k in 1..n {
                s += density(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        })
        .collect();
    let total_mass: f64 = masses.iter().sum();
    let n = samples.len() as f64;
    0.5 * counts
        .iter()
        .zip(&masses)
        .map(|(&c, &p)| (c as f64 / n - p / total_mass).abs())
        .sum::<f64>()
}

pub fn run_diag(cfg: &DiagConfig) -> Result<DiagRun, CliError> {
    cfg.validate()?;
    let (measure, target) = cfg.measure()?;
    let d = measure.dim();
    let sigma_w = match &cfg.sigma_w {
        Some(SigmaW::Scalar(s)) => vec![*s; d],
        Some(SigmaW::Vector(v)) => v.clone(),
        None => target.as_ref().map_or(vec![1.0; d], |t| t.default_sigma_w()),
    };
    let x0_default = target.as_ref().map(|t| t.default_x0());
    let x0 = chain_start(&measure, cfg.x0.as_deref().or(x0_default.as_deref()))
        .map_err(|e| ConfigError::new("x0", e.to_string()))?;

    let gamma = Measure::diagonal_gaussian(&sigma_w).map_err(|e| ConfigError::new("sigma_w", e.to_string()))?;
    let features = FeatureSet::generate(&gamma, cfg.n_features, &mut stream_rng(cfg.seed, 0, Component::Features))
        .map_err(RunError::from)?;
    let basis = OrthonormalBasis::from_frequencies(&measure, features.frequencies().clone(), Truncation::default())
        .map_err(RunError::from)?;
    let density = |x: &[f64]| basis.cs_density(x).unwrap_or(0.0);
    if density(&x0) <= 0.0 {
        return Err(ConfigError::new("x0", "CS density vanishes at the initial point").into());
    }

    let mut rng = stream_rng(cfg.seed, 0, Component::Cas);
    let active = measure.free_coordinates();
    let active = if active.iter().all(|&a| a) { None } else { Some(active) };
    let mut files = Vec::new();
    let sigma1 = if cfg.tune {
        let mut tc = TuneConfig::new(cfg.sigma1, x0.clone(), cfg.burn_in, cfg.thinning);
        tc.active = active.clone();
        let tuned = tune_sigma1(density, &tc, &mut rng).map_err(RunError::from)?;
        let mut s = String::from("batch,sigma1,acceptance_rate\n");
        for (i, b) in tuned.batches.iter().enumerate() {
            let _ = writeln!(s, "{i},{:e},{:e}", b.sigma1, b.acceptance_rate);
        }
        files.push(("tuning.csv".to_string(), s));
        tuned.sigma1
    } else {
        cfg.sigma1
    };

    let mh = MhConfig {
        sigma1,
        burn_in: cfg.burn_in,
        thinning: cfg.thinning,
        x0,
        max_steps: usize::MAX,
        active,
        record_trace: true,
    };
    let res = mh_sample(density, &mh, cfg.total, &mut rng).map_err(RunError::from)?;

    let header = |first: &str| {
        let mut h = first.to_string();
        for k in 0..d {
            let _ = write!(h, ",x{}", k + 1);
        }
        h
    };
    let mut trace = header("step");
    trace.push('\n');
    if let Some(tr) = &res.trace {
        for (i, x) in tr.iter().enumerate() {
            let _ = write!(trace, "{}", i + 1);
            for v in x {
                let _ = write!(trace, ",{v:e}");
            }
            trace.push('\n');
        }
    }
    files.push(("trace.csv".to_string(), trace));

    let mut kept = header("index");
    kept.push_str(",density\n");
    for (i, x) in res.samples.iter().enumerate() {
        let _ = write!(kept, "{i}");
        for v in x {
            let _ = write!(kept, ",{v:e}");
        }
        let _ = writeln!(kept, ",{:e}", density(x));
    }
    files.push(("samples.csv".to_string(), kept));

    let free: Vec<usize> = (0..d).filter(|&k| !measure.laws()[k].is_fixed()).collect();
    let mut tv = None;
    if free.len() == 1 {
        // density along the single moving coordinate
        let k = free[0];
        let (lo, hi) = law_window(&measure.laws()[k]);
        let along = |t: f64| {
            let mut x = mh.x0.clone();
            x[k] = t;
            density(&x)
        };
        let mut s = String::from("x,cs_density,reference_density\n");
        for t in linspace(lo, hi, cfg.grid_points) {
            let _ = writeln!(s, "{t:e},{:e},{:e}", along(t), measure.laws()[k].density(t));
        }
        files.push(("density.csv".to_string(), s));
        let xs: Vec<f64> = res.samples.iter().map(|x| x[k]).collect();
        tv = Some(histogram_tv(&xs, along, lo, hi, cfg.bins));
    } else if free.len() == 2 {
        let (a, b) = (free[0], free[1]);
        let (alo, ahi) = law_window(&measure.laws()[a]);
        let (blo, bhi) = law_window(&measure.laws()[b]);
        let n = cfg.grid_points.min(200);
        let mut s = format!("x{},x{},cs_density\n", a + 1, b + 1);
        for u in linspace(alo, ahi, n) {
            for v in linspace(blo, bhi, n) {
                let mut x = mh.x0.clone();
                x[a] = u;
                x[b] = v;
                let _ = writeln!(s, "{u:e},{v:e},{:e}", density(&x));
            }
        }
        files.push(("density.csv".to_string(), s));
    }

    let mean: Vec<f64> = (0..d)
        .map(|k| res.samples.iter().map(|x| x[k]).sum::<f64>() / res.samples.len() as f64)
        .collect();
    let summary = DiagSummary {
        dim: d,
        n_features: cfg.n_features,
        effective_dim: basis.dim(),
        sigma1,
        acceptance_rate: res.acceptance_rate,
        keep_rate: res.keep_rate,
        steps: res.steps,
        kept: res.samples.len(),
        sample_mean: mean,
        tv_distance: tv,
    };
    Ok(DiagRun { summary, files })
}

/// Writes the diagnostics files under `dir/mh_diag/`.
pub fn emit_diag(run: &DiagRun, dir: &Path) -> Result<(), RunError> {
    let diag = dir.join(DIAG_DIR);
    fs::create_dir_all(&diag)?;
    for (name, body) in &run.files {
        write_atomic(&diag.join(name), body.as_bytes())?;
    }
    let mut s = serde_json::to_string_pretty(&run.summary)?;
    s.push('\n');
    write_atomic(&diag.join("summary.json"), s.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_of_exact_quantile_samples_is_small() {
        // midpoints of equal-mass cells of U(0, 1)
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let tv = histogram_tv(&xs, |_| 1.0, 0.0, 1.0, 20);
        assert!(tv < 1e-12, "{tv}");
        let skewed: Vec<f64> = xs.iter().map(|x| x * 0.5).collect();
        assert!((histogram_tv(&skewed, |_| 1.0, 0.0, 1.0, 20) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn needs_a_measure_source() {
        let cfg: DiagConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.validate().unwrap_err().field, "measure");
    }

    #[test]
    fn small_gaussian_run_produces_all_files() {
        let cfg: DiagConfig = serde_json::from_str(
            r#"{"measure": [{"type": "gaussian", "sigma": 1}], "n_features": 20, "burn_in": 100, "thinning": 2, "total": 300, "grid_points": 50, "bins": 10}"#,
        )
        .unwrap();
        let run = run_diag(&cfg).unwrap();
        let names: Vec<&str> = run.files.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["trace.csv", "samples.csv", "density.csv"]);
        assert_eq!(run.summary.kept, 300);
        assert_eq!(run.summary.steps, 100 + 600);
        // header plus one row per step
        assert_eq!(run.files[0].1.lines().count(), 1 + 700);
        assert!(run.summary.tv_distance.unwrap() < 0.5);
    }
}
