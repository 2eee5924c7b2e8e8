//! Result files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use cas_srfe::ArmRun;

use crate::experiment::{ExperimentOutput, ExperimentResult, RunError};

pub const RESULTS_FILE: &str = "results.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const TIMINGS_FILE: &str = "timings.json";
pub const DIAG_DIR: &str = "mh_diag";

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn results_json(result: &ExperimentResult) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

pub fn curves_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("arm,m,geo_mean_error,geo_std_error\n");
    for curve in &result.curves {
        for p in &curve.points {
            let _ = writeln!(s, "{},{},{:e},{:e}", curve.arm.name(), p.m, p.geo_mean_error, p.geo_std_error);
        }
    }
    s
}

fn tuning_csv(run: &ArmRun) -> String {
    let mut s = String::from("batch,sigma1,acceptance_rate\n");
    if let Some(t) = &run.tuning {
        for (i, b) in t.batches.iter().enumerate() {
            let _ = writeln!(s, "{i},{:e},{:e}", b.sigma1, b.acceptance_rate);
        }
    }
    s
}

fn boosting_csv(run: &ArmRun) -> String {
    let mut s = String::from("iteration,m,candidate,stability,chosen\n");
    for r in &run.records {
        let best = r.best_stability.unwrap_or(f64::NAN);
        for (k, &c) in r.candidate_stabilities.iter().enumerate() {
            let _ = writeln!(s, "{},{},{k},{c:e},{}", r.iteration, r.samples, u8::from(c == best));
        }
    }
    s
}

fn samples_csv(run: &ArmRun) -> String {
    let mut s = String::new();
    let Some(last) = run.records.last() else {
        return s;
    };
    let d = last.sample_set.dim();
    s.push_str("index,first_iteration");
    for k in 0..d {
        let _ = write!(s, ",x{}", k + 1);
    }
    s.push('\n');
    for (i, x) in last.sample_set.iter().enumerate() {
        let first = run.records.iter().find(|r| i < r.samples).map_or(0, |r| r.iteration);
        let _ = write!(s, "{i},{first}");
        for v in x {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

/// Writes `results.json`, `curves.csv`, `timings.json` and, when asked, the
/// per-trial sampler diagnostics under `mh_diag/`.
pub fn emit_results(output: &ExperimentOutput, dir: &Path, diagnostics: bool) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(RESULTS_FILE), results_json(&output.result)?.as_bytes())?;
    write_atomic(&dir.join(CURVES_FILE), curves_csv(&output.result).as_bytes())?;
    let mut timings = serde_json::to_string_pretty(&output.timings)?;
    timings.push('\n');
    write_atomic(&dir.join(TIMINGS_FILE), timings.as_bytes())?;
    if diagnostics {
        let diag = dir.join(DIAG_DIR);
        fs::create_dir_all(&diag)?;
        for (t, run) in output.runs.iter().enumerate() {
            let Some((cas, _)) = run else { continue };
            write_atomic(&diag.join(format!("trial{t:03}_tuning.csv")), tuning_csv(cas).as_bytes())?;
            write_atomic(&diag.join(format!("trial{t:03}_boosting.csv")), boosting_csv(cas).as_bytes())?;
            write_atomic(&diag.join(format!("trial{t:03}_samples.csv")), samples_csv(cas).as_bytes())?;
        }
    }
    Ok(())
}
