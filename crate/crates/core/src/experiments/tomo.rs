use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperprior::GenGammaParams;
use crate::ias::{ias_solve_observed, IasOptions, IasResult, PinvMethod};
use crate::io::{write_columns_csv, write_vector_csv};
use crate::krylov::KrylovOptions;
use crate::linalg::{norm, rel_diff};
use crate::problems::{make_tomo, Problem, TomoConfig};
use crate::regularizer::{build_l, LKind, SparsifyingOperator, DEFAULT_QR_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoExperimentConfig {
    pub tomo: TomoConfig,
    pub eta: f64,
    pub vartheta: f64,
    pub delta: f64,
    pub max_outer: usize,
    pub krylov: KrylovOptions<f64>,
    /// Repeat the run with the dense QR pseudoinverse for comparison.
    pub compare_qr: bool,
    pub qr_cap: usize,
}

impl Default for TomoExperimentConfig {
    fn default() -> Self {
        TomoExperimentConfig {
            tomo: TomoConfig::default(),
            eta: 1e-3,
            vartheta: 0.05,
            delta: 0.01,
            max_outer: 100,
            krylov: KrylovOptions::default().with_tol(1e-10),
            compare_qr: true,
            qr_cap: DEFAULT_QR_CAP,
        }
    }
}

/// State after one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomoSnapshot {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    /// `‖b − A x‖ / ‖b‖` in the whitened model.
    pub residual_rel: f64,
    pub theta_change: f64,
    pub inner_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomoReport {
    pub config: TomoExperimentConfig,
    pub rows: usize,
    pub cols: usize,
    pub l_rows: usize,
    pub dropped_rays: usize,
    pub sigma: f64,
    pub result: IasResult<f64>,
    pub snapshots: Vec<TomoSnapshot>,
    pub x_true: Vec<f64>,
    pub relerr: f64,
    /// Mean reconstructed density over pixels fully inside the kite and the disk.
    pub kite_mean: f64,
    pub disk_mean: f64,
    pub contrast_ratio: f64,
    pub qr: Option<IasResult<f64>>,
    /// Why the QR comparison was skipped.
    pub qr_notice: Option<String>,
    /// `‖x_implicit − x_qr‖ / ‖x_qr‖`.
    pub qr_rel_diff: Option<f64>,
    pub seconds: f64,
}

impl TomoReport {
    pub fn mean_iteration_seconds(r: &IasResult<f64>) -> f64 {
        if r.iteration_seconds.is_empty() {
            return f64::NAN;
        }
        r.iteration_seconds.iter().sum::<f64>() / r.iteration_seconds.len() as f64
    }
}

/// Componentwise gamma prior with uniform `η` and `ϑ`.
pub fn tomo_prior(lop: &SparsifyingOperator<f64>, eta: f64, vartheta: f64) -> GenGammaParams<f64> {
    GenGammaParams::with_eta(1.0, eta, vartheta, &lop.partition().sizes())
}

/// Means of `x` over the pixels whose true density is exactly `kite` or `disk`,
/// and their ratio.
pub fn inclusion_contrast(x: &[f64], x_true: &[f64], kite: f64, disk: f64) -> (f64, f64, f64) {
    let mean_where = |target: f64| {
        let v: Vec<f64> = x
            .iter()
            .zip(x_true)
            .filter(|(_, t)| (**t - target).abs() < 1e-12)
            .map(|(v, _)| *v)
            .collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let (k, d) = (mean_where(kite), mean_where(disk));
    (k, d, k / d)
}

fn run_once(
    problem: &Problem<f64>,
    lop: &SparsifyingOperator<f64>,
    params: &GenGammaParams<f64>,
    opts: &IasOptions<f64>,
    snapshots: Option<&mut Vec<TomoSnapshot>>,
) -> Result<IasResult<f64>> {
    let bnorm = norm(&crate::operators::whiten(&*problem.a, &problem.b, &problem.noise)?.1);
    match snapshots {
        Some(out) => ias_solve_observed(problem, lop, params, opts, &mut |rep| {
            out.push(TomoSnapshot {
                iteration: rep.iteration,
                x: rep.x.to_vec(),
                theta: rep.theta.to_vec(),
                residual_rel: rep.residual_norm / bnorm,
                theta_change: rep.theta_change,
                inner_steps: rep.inner_steps,
            })
        }),
        None => ias_solve_observed(problem, lop, params, opts, &mut |_| {}),
    }
}

pub fn run_tomo(cfg: &TomoExperimentConfig) -> Result<TomoReport> {
    let start = Instant::now();
    let problem = make_tomo::<f64>(&cfg.tomo)?;
    let lop = build_l::<f64>(LKind::GridIncidence {
        nx: cfg.tomo.nx,
        ny: cfg.tomo.ny,
    })?;
    let params = tomo_prior(&lop, cfg.eta, cfg.vartheta);
    let opts = IasOptions {
        delta: cfg.delta,
        max_outer: cfg.max_outer,
        krylov: cfg.krylov,
        ..Default::default()
    };
    let mut snapshots = Vec::new();
    let result = run_once(&problem, &lop, &params, &opts, Some(&mut snapshots))?;

    let (mut qr, mut qr_notice, mut qr_rel_diff) = (None, None, None);
    if cfg.compare_qr {
        let qopts = IasOptions {
            pinv: PinvMethod::Qr { cap: cfg.qr_cap },
            ..opts.clone()
        };
        match run_once(&problem, &lop, &params, &qopts, None) {
            Ok(r) => {
                qr_rel_diff = Some(rel_diff(&result.x, &r.x));
                qr = Some(r);
            }
            Err(e @ Error::SizeCap { .. }) => qr_notice = Some(format!("QR path skipped: {e}")),
            Err(e) => return Err(e),
        }
    }

    let x_true = problem.x_true.clone().unwrap_or_default();
    let ph = &cfg.tomo.phantom;
    let (kite_mean, disk_mean, contrast_ratio) =
        inclusion_contrast(&result.x, &x_true, ph.kite_density, ph.disk_density);
    let dropped_rays = problem
        .metadata
        .extra
        .get("dropped_rays")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as usize;
    Ok(TomoReport {
        config: cfg.clone(),
        rows: problem.m(),
        cols: problem.n(),
        l_rows: lop.k(),
        dropped_rays,
        sigma: problem.sigma,
        relerr: rel_diff(&result.x, &x_true),
        result,
        snapshots,
        x_true,
        kite_mean,
        disk_mean,
        contrast_ratio,
        qr,
        qr_notice,
        qr_rel_diff,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes the summary, per-iteration tables and snapshots into `dir`.
///
/// Images are stored as flat vectors over the `(nx − 2)×(ny − 2)` interior
/// pixels, row by row from the bottom.
pub fn write_tomo(dir: &Path, report: &TomoReport) -> Result<()> {
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    for s in &report.snapshots {
        write_vector_csv(&snap_dir.join(format!("x_iter_{:03}.csv", s.iteration)), "x", &s.x)?;
        write_vector_csv(&snap_dir.join(format!("theta_iter_{:03}.csv", s.iteration)), "theta", &s.theta)?;
    }
    write_vector_csv(&dir.join("x_true.csv"), "x_true", &report.x_true)?;
    write_vector_csv(&dir.join("x_final.csv"), "x", &report.result.x)?;

    let it: Vec<f64> = report.snapshots.iter().map(|s| s.iteration as f64).collect();
    let res: Vec<f64> = report.snapshots.iter().map(|s| s.residual_rel).collect();
    let ch: Vec<f64> = report.snapshots.iter().map(|s| s.theta_change).collect();
    let inner: Vec<f64> = report.snapshots.iter().map(|s| s.inner_steps as f64).collect();
    write_columns_csv(
        &dir.join("residuals.csv"),
        &["iteration", "residual_rel", "theta_change", "inner_steps"],
        &[&it, &res, &ch, &inner],
    )?;

    let implicit = &report.result.iteration_seconds;
    let qr: Vec<f64> = match &report.qr {
        Some(q) => (0..implicit.len())
            .map(|i| q.iteration_seconds.get(i).copied().unwrap_or(f64::NAN))
            .collect(),
        None => vec![f64::NAN; implicit.len()],
    };
    let iters: Vec<f64> = (1..=implicit.len()).map(|i| i as f64).collect();
    write_columns_csv(
        &dir.join("timing.csv"),
        &["iteration", "implicit_seconds", "qr_seconds"],
        &[&iters, implicit, &qr],
    )?;

    let mut summary = serde_json::to_value(report)?;
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("snapshots");
        obj.insert("schema_version".into(), serde_json::json!(1));
    }
    fs::write(dir.join("tomo.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
