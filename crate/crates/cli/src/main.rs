//! `iasreg`: command-line front end for the IAS solver, the Tikhonov/Morozov
//! baseline and the bundled experiments.
//!
//! Exit codes: 0 on success, 2 when a run produced output without converging,
//! 1 on any error.

mod config;
mod solve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use iasreg::experiments::{run_numdiff, run_tomo, write_numdiff, write_tomo, NumdiffConfig, TomoExperimentConfig};
use iasreg::hyperprior::compat_pair;
use iasreg::io::write_bundle;
use iasreg::problems::{make_numdiff, make_tomo, TomoConfig};

use crate::config::RunConfig;

const OUTPUT_ROOT_ENV: &str = "IASREG_OUTPUT_ROOT";

#[derive(Parser, Debug)]
#[command(name = "iasreg", version, about = "Hierarchical Bayesian Tikhonov regularization with the IAS solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a solver from a JSON config and write solution.csv, theta.csv and summary.json.
    Solve {
        config: PathBuf,
        /// Overrides the `output` field of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a test problem and write it as a bundle directory.
    Gen {
        #[command(subcommand)]
        problem: GenProblem,
    },
    /// Noise-level sweep on the numerical differentiation problem.
    ExperimentNumdiff {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 30)]
        levels: usize,
        #[arg(long, default_value_t = 1e-3)]
        sigma_min: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma_max: f64,
        #[arg(long, default_value_t = 1e-4)]
        eta: f64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Fan-beam tomography run with per-iteration snapshots and timing.
    ExperimentTomo {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        ny: usize,
        #[arg(long, default_value_t = 40)]
        rays: usize,
        #[arg(long, default_value_t = 36)]
        views: usize,
        #[arg(long, default_value_t = 1.0)]
        noise_pct: f64,
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        #[arg(long, default_value_t = 0.05)]
        vartheta: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Skip the dense QR comparison run.
        #[arg(long)]
        no_qr: bool,
    },
    /// Second-stage (β, ϑ) compatible with a gamma first stage.
    Compat {
        #[arg(long)]
        beta1: f64,
        #[arg(long)]
        vartheta1: f64,
        #[arg(long, allow_hyphen_values = true)]
        r2: f64,
        /// Group size.
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
}

#[derive(Subcommand, Debug)]
enum GenProblem {
    Numdiff {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma_rel: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Tomo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        ny: usize,
        #[arg(long, default_value_t = 40)]
        rays: usize,
        #[arg(long, default_value_t = 36)]
        views: usize,
        #[arg(long, default_value_t = 1.0)]
        noise_pct: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn output_dir(explicit: Option<PathBuf>, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("iasreg-out"));
        root.join(name)
    })
}

fn config_output(cfg: &RunConfig, out: Option<PathBuf>, config: &Path) -> PathBuf {
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    output_dir(out.or_else(|| cfg.output.clone()), &stem)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = config_output(&cfg, out, &config);
            let converged = solve::run(&cfg, &dir)?;
            println!("wrote {}", dir.display());
            Ok(if converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Gen { problem } => {
            let (dir, p) = match problem {
                GenProblem::Numdiff { out, n, sigma_rel, seed } => (out, make_numdiff::<f64>(n, sigma_rel, seed)?),
                GenProblem::Tomo {
                    out,
                    nx,
                    ny,
                    rays,
                    views,
                    noise_pct,
                    seed,
                } => (
                    out,
                    make_tomo::<f64>(&TomoConfig {
                        nx,
                        ny,
                        n_rays: rays,
                        n_views: views,
                        noise_pct,
                        seed,
                        ..Default::default()
                    })?,
                ),
            };
            write_bundle(&dir, &p)?;
            println!("wrote {}x{} problem to {}", p.m(), p.n(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ExperimentNumdiff {
            out,
            n,
            levels,
            sigma_min,
            sigma_max,
            eta,
            seed,
        } => {
            let cfg = NumdiffConfig {
                n,
                levels,
                sigma_min,
                sigma_max,
                eta,
                seed,
                ..Default::default()
            };
            let dir = output_dir(out, "numdiff");
            let report = run_numdiff(&cfg);
            write_numdiff(&dir, &report)?;
            let failed = report.levels.iter().filter(|l| l.error.is_some()).count();
            for l in report.levels.iter().filter(|l| l.error.is_some()) {
                eprintln!("level {:e} failed: {}", l.sigma_rel, l.error.as_deref().unwrap_or(""));
            }
            println!(
                "{} levels, log-log slope {:.3} (R² {:.4}), median relative error IAS {:.4} vs Morozov {:.4}; wrote {}",
                report.levels.len(),
                report.alpha_slope,
                report.alpha_r2,
                report.median_relerr_ias,
                report.median_relerr_tikh,
                dir.display()
            );
            let all_converged = report.levels.iter().all(|l| l.converged_ias);
            Ok(if failed == 0 && all_converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::ExperimentTomo {
            out,
            nx,
            ny,
            rays,
            views,
            noise_pct,
            eta,
            vartheta,
            seed,
            no_qr,
        } => {
            let cfg = TomoExperimentConfig {
                tomo: TomoConfig {
                    nx,
                    ny,
                    n_rays: rays,
                    n_views: views,
                    noise_pct,
                    seed,
                    ..Default::default()
                },
                eta,
                vartheta,
                compare_qr: !no_qr,
                ..Default::default()
            };
            let dir = output_dir(out, "tomo");
            let report = run_tomo(&cfg)?;
            write_tomo(&dir, &report)?;
            if let Some(n) = &report.qr_notice {
                eprintln!("{n}");
            }
            println!(
                "{} outer iterations, relative error {:.4}, contrast {:.3}; wrote {}",
                report.result.outer_iterations,
                report.relerr,
                report.contrast_ratio,
                dir.display()
            );
            Ok(if report.result.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Compat {
            beta1,
            vartheta1,
            r2,
            k,
        } => {
            let (beta2, vartheta2) = compat_pair(beta1, vartheta1, r2, k).context("compat")?;
            println!(
                "{}",
                serde_json::json!({ "r2": r2, "beta2": beta2, "vartheta2": vartheta2 })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
