use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{alpha_from_theta, morozov_bisect, MorozovOptions};
use crate::error::Result;
use crate::experiments::{linear_fit, log_levels, median};
use crate::hyperprior::{select_scale_snr, GenGammaParams};
use crate::ias::{ias_solve, IasOptions};
use crate::krylov::KrylovOptions;
use crate::linalg::rel_diff;
use crate::operators::{column_norms, Composed};
use crate::problems::{make_numdiff, snr_estimate, Problem};
use crate::regularizer::{build_l, scale_by_theta, LKind, Partition, SparsifyingOperator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumdiffConfig {
    pub n: usize,
    pub levels: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Gamma shape offset `η` of the single-group prior.
    pub eta: f64,
    pub delta: f64,
    /// Level `i` draws its noise from seed `seed + i`.
    pub seed: u64,
    pub morozov: MorozovOptions,
    pub krylov: KrylovOptions<f64>,
}

impl Default for NumdiffConfig {
    fn default() -> Self {
        NumdiffConfig {
            n: 50,
            levels: 30,
            sigma_min: 1e-3,
            sigma_max: 0.1,
            eta: 1e-4,
            delta: 0.01,
            seed: 2024,
            morozov: MorozovOptions::default(),
            krylov: KrylovOptions::default().with_tol(1e-10),
        }
    }
}

/// One noise level. Failed levels carry `error` and NaN values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumdiffLevel {
    pub sigma_rel: f64,
    pub alpha_tikh: f64,
    pub alpha_ias: f64,
    /// `σ²/θ`, the penalty weight of the equivalent `‖Ax − b‖² + α‖Lx‖²` problem.
    pub penalty_ias: f64,
    pub evals_tikh: usize,
    pub bracket_evals_tikh: usize,
    pub iters_ias: usize,
    pub relerr_tikh: f64,
    pub relerr_ias: f64,
    pub converged_tikh: bool,
    pub converged_ias: bool,
    pub theta: f64,
    pub vartheta: f64,
    pub objective_history: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumdiffReport {
    pub config: NumdiffConfig,
    pub levels: Vec<NumdiffLevel>,
    /// Slope and `R²` of `log α_IAS` against `log σ_rel`.
    pub alpha_slope: f64,
    pub alpha_r2: f64,
    pub alpha_monotone: bool,
    pub median_relerr_ias: f64,
    pub median_relerr_tikh: f64,
    pub seconds: f64,
}

/// `ϑ` matching the data SNR for a prior with shape `β` on `z = L x`:
/// `E‖A X‖² = βϑ ‖A L†‖_F²`, with the Frobenius norm taken column by column.
pub fn snr_matched_vartheta(problem: &Problem<f64>, lop: &SparsifyingOperator<f64>, beta: f64) -> Result<f64> {
    let unit = scale_by_theta(lop, &vec![1.0; lop.partition().len()])?;
    let pinv = unit.pseudo_inverse();
    let composed = Composed::new(&*problem.a, pinv);
    let frob: f64 = column_norms(&composed).iter().map(|c| c * c).sum();
    let snr = snr_estimate(&problem.b, problem.m(), problem.sigma)?;
    select_scale_snr(frob, problem.m(), problem.sigma, snr, beta)
}

/// Single-group gamma prior on `z = L x`: `β = (k+2)/2 + η` with `k = n`, and
/// `ϑ` from [`snr_matched_vartheta`].
pub fn numdiff_prior(problem: &Problem<f64>, lop: &SparsifyingOperator<f64>, eta: f64) -> Result<GenGammaParams<f64>> {
    let sizes = lop.partition().sizes();
    let mut params = GenGammaParams::with_eta(1.0, eta, 1.0, &sizes);
    let vartheta = snr_matched_vartheta(problem, lop, params.beta[0])?;
    params.vartheta = vec![vartheta; sizes.len()];
    Ok(params)
}

pub fn numdiff_level(cfg: &NumdiffConfig, sigma_rel: f64, seed: u64) -> Result<NumdiffLevel> {
    let problem = make_numdiff::<f64>(cfg.n, sigma_rel, seed)?;
    let lop = build_l::<f64>(LKind::Diff2 { n: cfg.n })?.with_partition(Partition::trivial(cfg.n))?;
    let x_true = problem.x_true.clone().unwrap_or_default();

    let params = numdiff_prior(&problem, &lop, cfg.eta)?;
    let opts = IasOptions {
        delta: cfg.delta,
        krylov: cfg.krylov,
        ..Default::default()
    };
    let ias = ias_solve(&problem, &lop, &params, &opts)?;
    let theta = ias.theta[0];

    let moro = morozov_bisect(
        &*problem.a,
        &lop,
        &problem.b,
        problem.sigma,
        problem.m(),
        &cfg.morozov,
        &cfg.krylov,
    )?;
    Ok(NumdiffLevel {
        sigma_rel,
        alpha_tikh: moro.alpha,
        penalty_ias: problem.sigma * problem.sigma / theta,
        alpha_ias: alpha_from_theta(problem.sigma, theta)?,
        evals_tikh: moro.evals,
        bracket_evals_tikh: moro.bracket_evals,
        iters_ias: ias.outer_iterations,
        relerr_tikh: rel_diff(&moro.x, &x_true),
        relerr_ias: rel_diff(&ias.x, &x_true),
        converged_tikh: moro.converged,
        converged_ias: ias.converged,
        theta,
        vartheta: params.vartheta[0],
        objective_history: ias.objective_history,
        error: None,
    })
}

/// Runs every level in parallel. A failing level is recorded and the sweep goes on.
pub fn run_numdiff(cfg: &NumdiffConfig) -> NumdiffReport {
    let start = std::time::Instant::now();
    let sigmas = log_levels(cfg.sigma_min, cfg.sigma_max, cfg.levels);
    let levels: Vec<NumdiffLevel> = sigmas
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            numdiff_level(cfg, s, cfg.seed + i as u64).unwrap_or_else(|e| NumdiffLevel {
                sigma_rel: s,
                alpha_tikh: f64::NAN,
                alpha_ias: f64::NAN,
                penalty_ias: f64::NAN,
                evals_tikh: 0,
                bracket_evals_tikh: 0,
                iters_ias: 0,
                relerr_tikh: f64::NAN,
                relerr_ias: f64::NAN,
                converged_tikh: false,
                converged_ias: false,
                theta: f64::NAN,
                vartheta: f64::NAN,
                objective_history: Vec::new(),
                error: Some(e.to_string()),
            })
        })
        .collect();
    let ok: Vec<&NumdiffLevel> = levels.iter().filter(|l| l.error.is_none()).collect();
    let lx: Vec<f64> = ok.iter().map(|l| l.sigma_rel.ln()).collect();
    let ly: Vec<f64> = ok.iter().map(|l| l.alpha_ias.ln()).collect();
    let (alpha_slope, _, alpha_r2) = if ok.len() >= 2 {
        linear_fit(&lx, &ly)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let alpha_monotone = ok.len() == levels.len() && levels.windows(2).all(|w| w[1].alpha_ias > w[0].alpha_ias);
    let median_relerr_ias = median(&levels.iter().map(|l| l.relerr_ias).collect::<Vec<_>>());
    let median_relerr_tikh = median(&levels.iter().map(|l| l.relerr_tikh).collect::<Vec<_>>());
    NumdiffReport {
        config: cfg.clone(),
        levels,
        alpha_slope,
        alpha_r2,
        alpha_monotone,
        median_relerr_ias,
        median_relerr_tikh,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Writes `numdiff.csv` and `numdiff.json` into `dir`.
pub fn write_numdiff(dir: &Path, report: &NumdiffReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("numdiff.csv")).map_err(|e| crate::Error::Io(e.to_string()))?;
    w.write_record([
        "sigma_rel",
        "alpha_tikh",
        "alpha_ias",
        "evals_tikh",
        "iters_ias",
        "relerr_tikh",
        "relerr_ias",
    ])
    .map_err(|e| crate::Error::Io(e.to_string()))?;
    for l in &report.levels {
        w.write_record([
            format!("{:e}", l.sigma_rel),
            format!("{:e}", l.alpha_tikh),
            format!("{:e}", l.alpha_ias),
            l.evals_tikh.to_string(),
            l.iters_ias.to_string(),
            format!("{:e}", l.relerr_tikh),
            format!("{:e}", l.relerr_ias),
        ])
        .map_err(|e| crate::Error::Io(e.to_string()))?;
    }
    w.flush()?;
    fs::write(dir.join("numdiff.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}
