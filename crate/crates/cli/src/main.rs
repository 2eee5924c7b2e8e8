use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cas_srfe::{TargetFunction, REGISTERED_TARGETS};
use cas_srfe_cli::diag::{emit_diag, run_diag, DiagConfig};
use cas_srfe_cli::{emit_results, resolve_jobs, run_experiment, Arm, CliError, ExperimentConfig};
use clap::{Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "cas-srfe", version, about = "Adaptive versus i.i.d. sampling experiments for sparse random Fourier feature models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run adaptive and i.i.d. trials and write results.json and curves.csv.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (also CAS_SRFE_JOBS).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write per-trial sampler files under mh_diag/.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Sample one CS density with Metropolis-Hastings and write diagnostics.
    MhDiag {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the registered targets.
    ListTargets,
    /// Check a run configuration without executing it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load(config: &Path, seed: Option<u64>, trials: Option<usize>, out: Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if out.is_some() {
        cfg.out = out;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            jobs,
            diagnostics,
        } => {
            let cfg = load(&config, seed, trials, out)?;
            let resolved = cfg.resolve()?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let jobs = resolve_jobs(jobs);
            info!("running {} trials of {} on {jobs} threads", cfg.trials, resolved.target.name());
            let output = run_experiment(&resolved, jobs)?;
            emit_results(&output, &dir, diagnostics)?;
            let (cas, nas) = (output.result.curve(Arm::Cas), output.result.curve(Arm::Nas));
            println!("m,cas_geo_mean,nas_geo_mean");
            for (c, n) in cas.points.iter().zip(&nas.points) {
                println!("{},{:.4e},{:.4e}", c.m, c.geo_mean_error, n.geo_mean_error);
            }
            println!("wrote {}", dir.display());
        }
        Command::MhDiag { config, seed, out } => {
            let mut cfg = DiagConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let run = run_diag(&cfg)?;
            emit_diag(&run, &dir)?;
            let s = &run.summary;
            println!(
                "sigma1 {:.4}, acceptance {:.3}, kept {} of {} steps, r = {}",
                s.sigma1, s.acceptance_rate, s.kept, s.steps, s.effective_dim
            );
            if let Some(tv) = s.tv_distance {
                println!("histogram TV distance {tv:.4}");
            }
            println!("wrote {}", dir.join("mh_diag").display());
        }
        Command::ListTargets => {
            for name in REGISTERED_TARGETS {
                let t = TargetFunction::from_name(name).expect("registered");
                println!("{name:<9} d={}  {}", t.dim(), t.kind().description());
            }
        }
        Command::Validate { config, seed, trials } => {
            let cfg = load(&config, seed, trials, None)?;
            let r = cfg.resolve()?;
            println!(
                "ok: target {} (d = {}), N = {}, schedule {:?}, {} trials",
                r.target.name(),
                r.target.dim(),
                r.n_features,
                r.schedule,
                cfg.trials
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
