//! `iasreg solve`: one solver run from a JSON config.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use iasreg::classic::{alpha_from_theta, morozov_bisect};
use iasreg::experiments::snr_matched_vartheta;
use iasreg::hyperprior::{sensitivity_weights, GenGammaParams};
use iasreg::ias::{hybrid_ias_solve, ias_solve, IasOptions, IasResult};
use iasreg::io::{read_bundle, write_vector_csv};
use iasreg::linalg::rel_diff;
use iasreg::operators::{column_norms, LinearOperator};
use iasreg::problems::{make_numdiff, make_tomo, snr_estimate, Problem};
use iasreg::regularizer::{build_l, LKind, Partition, SparsifyingOperator};

use crate::config::{PartitionChoice, PartitionSpec, ProblemSpec, RunConfig, SolverSpec, VarthetaSpec};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub phase1_seconds: f64,
    pub phase2_seconds: f64,
    pub iteration_seconds: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub problem: String,
    pub method: String,
    pub rows: usize,
    pub cols: usize,
    pub l_rows: usize,
    pub groups: usize,
    pub sigma: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub inner_step_history: Vec<usize>,
    pub theta_change_history: Vec<f64>,
    pub switch_iteration: Option<usize>,
    pub abort_reason: Option<String>,
    /// `σ/√θ` per group.
    pub alpha_equivalent: Vec<f64>,
    /// Penalty weight `α` of the Morozov run.
    pub alpha_tikh: Option<f64>,
    pub morozov_evals: Option<usize>,
    pub relerr: Option<f64>,
    pub params: Option<GenGammaParams<f64>>,
    pub timings: Timings,
}

pub fn build_problem(spec: &ProblemSpec) -> Result<Problem<f64>> {
    Ok(match spec {
        ProblemSpec::Numdiff { n, sigma_rel, seed } => {
            if !(*sigma_rel > 0.0) {
                bail!("problem.sigma_rel: must be positive, got {sigma_rel}");
            }
            make_numdiff(*n, *sigma_rel, *seed)?
        }
        ProblemSpec::Tomo(cfg) => make_tomo(cfg)?,
        ProblemSpec::Bundle { path } => read_bundle(path).with_context(|| format!("reading bundle {}", path.display()))?,
    })
}

pub fn build_operator(cfg: &RunConfig, problem: &Problem<f64>) -> Result<SparsifyingOperator<f64>> {
    let kind = cfg
        .prior
        .l
        .or(problem.default_l)
        .unwrap_or(LKind::Identity { n: problem.n() });
    let lop = build_l::<f64>(kind).context("prior.l")?;
    if lop.n() != problem.n() {
        bail!("prior.l: operator has {} columns but the problem has {} unknowns", lop.n(), problem.n());
    }
    let partition = match &cfg.prior.partition {
        PartitionChoice::Named(PartitionSpec::Componentwise) => Partition::componentwise(lop.k()),
        PartitionChoice::Named(PartitionSpec::Trivial) => Partition::trivial(lop.k()),
        PartitionChoice::Groups(g) => Partition::try_from(g.clone()).context("prior.partition")?,
    };
    if partition.rows() != lop.k() {
        bail!("prior.partition: covers {} rows, L has {}", partition.rows(), lop.k());
    }
    Ok(lop.with_partition(partition)?)
}

pub fn build_params(cfg: &RunConfig, problem: &Problem<f64>, lop: &SparsifyingOperator<f64>) -> Result<GenGammaParams<f64>> {
    let sizes = lop.partition().sizes();
    let r = cfg.prior.r;
    let mut params = match (cfg.prior.beta, cfg.prior.eta) {
        (Some(beta), None) => GenGammaParams::uniform(r, beta, 1.0, sizes.len()),
        (None, Some(eta)) => GenGammaParams::with_eta(r, eta, 1.0, &sizes),
        _ => bail!("prior: give exactly one of `beta` or `eta`"),
    };
    params.vartheta = match &cfg.prior.vartheta {
        VarthetaSpec::Value(v) => vec![*v; sizes.len()],
        VarthetaSpec::Snr => {
            if params.beta.iter().any(|&b| b != params.beta[0]) {
                bail!("prior.vartheta: the snr rule needs a uniform beta");
            }
            let v = snr_matched_vartheta(problem, lop, params.beta[0]).context("prior.vartheta")?;
            vec![v; sizes.len()]
        }
        VarthetaSpec::Sensitivity { alpha } => {
            if lop.k() != lop.n() || sizes.iter().any(|&k| k != 1) || !is_identity(lop) {
                bail!("prior.vartheta: sensitivity weights need L = I with a componentwise partition");
            }
            let snr = snr_estimate(&problem.b, problem.m(), problem.sigma)?;
            sensitivity_weights(&column_norms(&*problem.a), snr, *alpha).context("prior.vartheta")?
        }
    };
    params.check_admissible(&sizes).context("prior")?;
    Ok(params)
}

fn is_identity(lop: &SparsifyingOperator<f64>) -> bool {
    let l = lop.matrix();
    (0..l.rows()).all(|i| {
        let (c, v) = l.row(i);
        c == [i] && v == [1.0]
    })
}

/// Runs the config. Returns whether the solver converged; every output file is
/// written only after the run succeeded.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<bool> {
    let start = Instant::now();
    let problem = build_problem(&cfg.problem)?;
    let lop = build_operator(cfg, &problem)?;
    let relerr = |x: &[f64]| problem.x_true.as_ref().map(|t| rel_diff(x, t));
    let base = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        problem: problem.metadata.name.clone(),
        method: String::new(),
        rows: problem.m(),
        cols: problem.n(),
        l_rows: lop.k(),
        groups: lop.partition().len(),
        sigma: problem.sigma,
        converged: false,
        iterations: 0,
        objective_history: Vec::new(),
        inner_step_history: Vec::new(),
        theta_change_history: Vec::new(),
        switch_iteration: None,
        abort_reason: None,
        alpha_equivalent: Vec::new(),
        alpha_tikh: None,
        morozov_evals: None,
        relerr: None,
        params: None,
        timings: Timings {
            total_seconds: 0.0,
            phase1_seconds: 0.0,
            phase2_seconds: 0.0,
            iteration_seconds: Vec::new(),
        },
    };

    let (summary, x, theta, trace) = match &cfg.solver {
        SolverSpec::TikhonovMorozov { morozov } => {
            let res = morozov_bisect(
                &*problem.a,
                &lop,
                &problem.b,
                problem.sigma,
                problem.m(),
                morozov,
                &cfg.options.krylov,
            )?;
            let theta = vec![1.0 / res.alpha; lop.partition().len()];
            let summary = Summary {
                method: "tikhonov-morozov".into(),
                converged: res.converged,
                iterations: res.total_evals(),
                alpha_equivalent: vec![res.alpha.sqrt(); theta.len()],
                alpha_tikh: Some(res.alpha),
                morozov_evals: Some(res.evals),
                relerr: relerr(&res.x),
                timings: Timings {
                    total_seconds: start.elapsed().as_secs_f64(),
                    ..base.timings
                },
                ..base
            };
            let x = res.x.clone();
            (summary, x, theta, Some(res))
        }
        SolverSpec::Ias | SolverSpec::Hybrid { .. } => {
            let params = build_params(cfg, &problem, &lop)?;
            let opts = IasOptions {
                delta: cfg.options.delta,
                max_outer: cfg.options.max_outer,
                krylov: cfg.options.krylov,
                hybrid: cfg.hybrid_options(),
                ..Default::default()
            };
            let (method, res): (&str, IasResult<f64>) = match cfg.solver {
                SolverSpec::Ias => ("ias", ias_solve(&problem, &lop, &params, &opts)?),
                _ => ("hybrid", hybrid_ias_solve(&problem, &lop, &params, &opts)?),
            };
            let alpha_equivalent = res
                .theta
                .iter()
                .map(|&t| alpha_from_theta(problem.sigma, t))
                .collect::<iasreg::Result<Vec<_>>>()?;
            let summary = Summary {
                method: method.into(),
                converged: res.converged,
                iterations: res.outer_iterations,
                objective_history: res.objective_history.clone(),
                inner_step_history: res.inner_step_history.clone(),
                theta_change_history: res.theta_change_history.clone(),
                switch_iteration: res.switch_iteration,
                abort_reason: res.abort_reason.clone(),
                alpha_equivalent,
                relerr: relerr(&res.x),
                params: Some(params),
                timings: Timings {
                    total_seconds: start.elapsed().as_secs_f64(),
                    phase1_seconds: res.phase1_seconds,
                    phase2_seconds: res.phase2_seconds,
                    iteration_seconds: res.iteration_seconds.clone(),
                },
                ..base
            };
            (summary, res.x, res.theta, None)
        }
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_vector_csv(&out.join("solution.csv"), "x", &x)?;
    write_vector_csv(&out.join("theta.csv"), "theta", &theta)?;
    if let Some(t) = trace {
        t.write_trace_csv(&out.join("morozov_trace.csv"))?;
    }
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary.converged)
}
