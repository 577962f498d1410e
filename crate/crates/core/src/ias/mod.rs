//! The Iterative Alternating Sequential (IAS) MAP solver.
//!
//! Each outer iteration solves the standard-form Tikhonov problem
//! `min ‖A L_θ† ξ − b‖² + ‖ξ‖²` for `ξ = L_θ x` (Phase I) and then updates every
//! group variance `θ_ℓ` in closed form or by the ODE (Phase II). All quantities
//! refer to the whitened model.

mod options;

pub use options::{HybridOptions, IasOptions, Params2, PinvMethod, SwitchRule};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::hyperprior::{fixed_point_map_closed, phase2_update, phi, GenGammaParams};
use crate::krylov::{solve_tikhonov_standard, KrylovOptions, TikhonovDiagnostics};
use crate::linalg::{norm, norm_sq, sub};
use crate::operators::{whiten, Composed, LinearOperator};
use crate::problems::Problem;
use crate::regularizer::{pinv_via_qr, scale_by_theta, ScaledOperator, SparsifyingOperator};
use crate::scalar::Scalar;

/// Outcome of an IAS run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IasResult<T: Scalar> {
    pub x: Vec<T>,
    pub z: Vec<T>,
    pub theta: Vec<T>,
    pub outer_iterations: usize,
    /// `G(z, θ)` at the start and after every Phase I and Phase II half-step.
    pub objective_history: Vec<T>,
    pub inner_step_history: Vec<usize>,
    /// `‖θ^{t+1} − θ^t‖ / ‖θ^t‖` per outer iteration.
    pub theta_change_history: Vec<T>,
    pub converged: bool,
    /// Outer iteration after which the hybrid scheme switched hyperprior.
    pub switch_iteration: Option<usize>,
    /// Set when an inner solve failed even after a retry.
    pub abort_reason: Option<String>,
    pub phase1_seconds: f64,
    pub phase2_seconds: f64,
    /// Wall time of every outer iteration, both phases.
    pub iteration_seconds: Vec<f64>,
}

/// State reported to an observer after every outer iteration.
#[derive(Clone, Debug)]
pub struct IterationReport<'a, T> {
    pub iteration: usize,
    pub x: &'a [T],
    pub z: &'a [T],
    pub theta: &'a [T],
    pub residual_norm: T,
    pub theta_change: T,
    pub inner_steps: usize,
}

/// Phase I output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Phase1Output<T: Scalar> {
    pub xi: Vec<T>,
    pub x: Vec<T>,
    pub inner_steps: usize,
    pub diagnostics: TikhonovDiagnostics<T>,
}

/// `G(z, θ) = ½‖b − A L†z‖² + ½ Σ_ℓ ‖z_ℓ‖²/θ_ℓ + Φ(θ)`.
pub fn objective<T: Scalar, O: LinearOperator<T> + ?Sized>(
    z: &[T],
    theta: &[T],
    a: &O,
    lop: &SparsifyingOperator<T>,
    params: &GenGammaParams<T>,
    b: &[T],
) -> Result<T> {
    check_len("objective", lop.k(), z.len())?;
    check_len("objective", a.rows(), b.len())?;
    check_len("objective", lop.n(), a.cols())?;
    let unit = vec![T::one(); lop.partition().len()];
    let l1 = scale_by_theta(lop, &unit)?;
    let x = crate::regularizer::pinv_apply(&l1, z)?;
    let ax = a.apply(&x)?;
    objective_from_parts(norm_sq(&sub(b, &ax)), z, theta, lop, params)
}

fn objective_from_parts<T: Scalar>(
    residual_sq: T,
    z: &[T],
    theta: &[T],
    lop: &SparsifyingOperator<T>,
    params: &GenGammaParams<T>,
) -> Result<T> {
    let part = lop.partition();
    let half = T::lit(0.5);
    let quad: T = part
        .group_norms_sq(z)
        .iter()
        .zip(theta)
        .map(|(&s, &t)| s / t)
        .sum();
    Ok(half * residual_sq + half * quad + phi(theta, params, &part.sizes())?)
}

/// Phase I: `ξ = argmin ‖A L_θ† ξ − b‖² + ‖ξ‖²` and `x = L_θ† ξ`.
pub fn phase1_update<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    lt: &ScaledOperator<'_, T>,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<Phase1Output<T>> {
    check_len("phase1_update", lt.cols(), a.cols())?;
    phase1_with_pinv(a, &lt.pseudo_inverse(), b, opts)
}

/// Phase I with any realization `pinv` of `L_θ†`.
pub fn phase1_with_pinv<T: Scalar, O: LinearOperator<T> + ?Sized, P: LinearOperator<T>>(
    a: &O,
    pinv: &P,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<Phase1Output<T>> {
    check_len("phase1_with_pinv", pinv.rows(), a.cols())?;
    let op = Composed::new(a, pinv);
    let (xi, diagnostics) = solve_tikhonov_standard(&op, b, opts)?;
    let x = pinv.apply(&xi)?;
    Ok(Phase1Output {
        xi,
        x,
        inner_steps: diagnostics.inner_steps,
        diagnostics,
    })
}

/// Runs IAS with a single hyperprior. Any hybrid settings in `opts` are ignored.
pub fn ias_solve<T: Scalar>(
    problem: &Problem<T>,
    lop: &SparsifyingOperator<T>,
    params: &GenGammaParams<T>,
    opts: &IasOptions<T>,
) -> Result<IasResult<T>> {
    ias_solve_observed(problem, lop, params, opts, &mut |_| {})
}

/// [`ias_solve`] with a callback after every outer iteration.
pub fn ias_solve_observed<T: Scalar>(
    problem: &Problem<T>,
    lop: &SparsifyingOperator<T>,
    params: &GenGammaParams<T>,
    opts: &IasOptions<T>,
    observer: &mut dyn FnMut(&IterationReport<'_, T>),
) -> Result<IasResult<T>> {
    let stages = [Stage {
        params: params.clone(),
        switch: None,
    }];
    run(problem, lop, &stages, opts, observer)
}

/// Runs the two-stage scheme: `r = 1` until the switch rule fires, then the
/// second hyperprior from the current state.
pub fn hybrid_ias_solve<T: Scalar>(
    problem: &Problem<T>,
    lop: &SparsifyingOperator<T>,
    params1: &GenGammaParams<T>,
    opts: &IasOptions<T>,
) -> Result<IasResult<T>> {
    hybrid_ias_solve_observed(problem, lop, params1, opts, &mut |_| {})
}

pub fn hybrid_ias_solve_observed<T: Scalar>(
    problem: &Problem<T>,
    lop: &SparsifyingOperator<T>,
    params1: &GenGammaParams<T>,
    opts: &IasOptions<T>,
    observer: &mut dyn FnMut(&IterationReport<'_, T>),
) -> Result<IasResult<T>> {
    let hybrid = opts.hybrid.as_ref().ok_or_else(|| Error::InvalidParameter {
        name: "hybrid",
        reason: "hybrid options are required".into(),
    })?;
    if params1.r != T::one() {
        return Err(Error::InvalidParameter {
            name: "params1",
            reason: format!("the first stage must use r = 1, got {}", params1.r),
        });
    }
    let sizes = lop.partition().sizes();
    params1.check_admissible(&sizes)?;
    let params2 = match &hybrid.params2 {
        Params2::Auto => crate::hyperprior::hybrid_compat_solve(params1, hybrid.r2, &sizes)?,
        Params2::Explicit(p) => p.clone(),
    };
    params2.check_admissible(&sizes)?;
    let stages = [
        Stage {
            params: params1.clone(),
            switch: Some(hybrid.switch_rule),
        },
        Stage {
            params: params2,
            switch: None,
        },
    ];
    run(problem, lop, &stages, opts, observer)
}

struct Stage<T: Scalar> {
    params: GenGammaParams<T>,
    switch: Option<SwitchRule<T>>,
}

fn run<T: Scalar>(
    problem: &Problem<T>,
    lop: &SparsifyingOperator<T>,
    stages: &[Stage<T>],
    opts: &IasOptions<T>,
    observer: &mut dyn FnMut(&IterationReport<'_, T>),
) -> Result<IasResult<T>> {
    opts.validate()?;
    problem.validate()?;
    check_len("ias_solve", problem.n(), lop.n())?;
    let part = lop.partition();
    let sizes = part.sizes();
    for s in stages {
        s.params.check_admissible(&sizes)?;
    }
    let (aw, bw, _) = whiten(&*problem.a, &problem.b, &problem.noise)?;

    let mut stage = 0;
    let mut switch_iteration = None;
    if let Some(SwitchRule::FixedIteration { count: 0 }) = stages[0].switch {
        stage = 1;
        switch_iteration = Some(0);
    }
    let mut theta = match &opts.initial_theta {
        Some(t) => {
            check_len("initial_theta", part.len(), t.len())?;
            t.clone()
        }
        None => stages[stage].params.vartheta.clone(),
    };
    let mut z = vec![T::zero(); lop.k()];
    let mut x = vec![T::zero(); lop.n()];
    let mut res_sq = norm_sq(&bw);
    let mut objective_history = Vec::new();
    if opts.track_objective {
        objective_history.push(objective_from_parts(res_sq, &z, &theta, lop, &stages[stage].params)?);
    }
    let mut result = IasResult {
        x: Vec::new(),
        z: Vec::new(),
        theta: Vec::new(),
        outer_iterations: 0,
        objective_history: Vec::new(),
        inner_step_history: Vec::new(),
        theta_change_history: Vec::new(),
        converged: false,
        switch_iteration,
        abort_reason: None,
        phase1_seconds: 0.0,
        phase2_seconds: 0.0,
        iteration_seconds: Vec::new(),
    };

    for it in 1..=opts.max_outer {
        let params = &stages[stage].params;
        let t0 = Instant::now();
        let lt = scale_by_theta(lop, &theta)?;
        let attempt = match opts.pinv {
            PinvMethod::Implicit => phase1_with_retry(&aw, &lt.pseudo_inverse(), &bw, &opts.krylov)?,
            PinvMethod::Qr { cap } => phase1_with_retry(&aw, &pinv_via_qr(&lt, cap)?, &bw, &opts.krylov)?,
        };
        let p1 = match attempt {
            Ok(p) => p,
            Err(reason) => {
                result.abort_reason = Some(reason);
                break;
            }
        };
        result.phase1_seconds += t0.elapsed().as_secs_f64();
        result.inner_step_history.push(p1.inner_steps);
        let scale = lt.row_scale();
        z = p1.xi.iter().zip(scale).map(|(&v, &s)| v / s).collect();
        x = p1.x;
        if opts.track_objective {
            let ax = aw.apply(&x)?;
            res_sq = norm_sq(&sub(&bw, &ax));
            objective_history.push(objective_from_parts(res_sq, &z, &theta, lop, params)?);
        }

        let t1 = Instant::now();
        let new_theta = phase2_update(&z, part, params)?;
        result.phase2_seconds += t1.elapsed().as_secs_f64();
        result.iteration_seconds.push(t0.elapsed().as_secs_f64());
        let change = norm(&sub(&new_theta, &theta)) / norm(&theta);
        theta = new_theta;
        if opts.track_objective {
            objective_history.push(objective_from_parts(res_sq, &z, &theta, lop, params)?);
        }
        result.theta_change_history.push(change);
        result.outer_iterations = it;
        let residual_norm = if opts.track_objective {
            res_sq.sqrt()
        } else {
            norm(&sub(&bw, &aw.apply(&x)?))
        };
        observer(&IterationReport {
            iteration: it,
            x: &x,
            z: &z,
            theta: &theta,
            residual_norm,
            theta_change: change,
            inner_steps: result.inner_step_history[it - 1],
        });

        let settled = change < opts.delta;
        match stages[stage].switch {
            Some(rule) if stage + 1 < stages.len() => {
                let fire = settled
                    || match rule {
                        SwitchRule::FixedIteration { count } => it >= count,
                        SwitchRule::ThetaStagnation { tol } => change < tol,
                    };
                if fire {
                    stage += 1;
                    result.switch_iteration = Some(it);
                }
            }
            _ => {
                if settled {
                    result.converged = true;
                    break;
                }
            }
        }
    }
    result.x = x;
    result.z = z;
    result.theta = theta;
    result.objective_history = objective_history;
    Ok(result)
}

/// Phase I, retried once with a tighter tolerance and a larger step budget.
/// The inner `Err` carries the reason when both attempts fail to converge.
fn phase1_with_retry<T: Scalar, O: LinearOperator<T> + ?Sized, P: LinearOperator<T>>(
    a: &O,
    pinv: &P,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<std::result::Result<Phase1Output<T>, String>> {
    let first = phase1_with_pinv(a, pinv, b, opts)?;
    if first.diagnostics.converged {
        return Ok(Ok(first));
    }
    let tighter = KrylovOptions {
        max_steps: opts.max_steps.saturating_mul(2),
        rel_residual_tol: (opts.rel_residual_tol / T::lit(10.0)).max(T::epsilon() * T::lit(10.0)),
        reorthogonalize: true,
        low_memory: false,
    };
    let second = phase1_with_pinv(a, pinv, b, &tighter)?;
    if second.diagnostics.converged {
        Ok(Ok(second))
    } else {
        Ok(Err(format!(
            "Phase I did not converge: residual {} after {} steps",
            second.diagnostics.residual_norm, second.inner_steps
        )))
    }
}

/// `‖θ − f(z)‖/‖θ‖` with `f` the `r = 1` closed-form variance map, for a
/// componentwise partition.
pub fn fixed_point_residual<T: Scalar>(
    z: &[T],
    theta: &[T],
    params: &GenGammaParams<T>,
    sizes: &[usize],
) -> Result<T> {
    if params.r != T::one() {
        return Err(Error::Unsupported(format!("fixed-point residual needs r = 1, got {}", params.r)));
    }
    if sizes.iter().any(|&k| k != 1) {
        return Err(Error::Unsupported("fixed-point residual needs a componentwise partition".into()));
    }
    check_len("fixed_point_residual", z.len(), theta.len())?;
    check_len("fixed_point_residual", z.len(), sizes.len())?;
    params.validate(sizes.len())?;
    let etas = params.etas(sizes);
    let f: Vec<T> = z
        .iter()
        .zip(&params.vartheta)
        .zip(&etas)
        .map(|((&zj, &v), &e)| fixed_point_map_closed(zj, v, e))
        .collect();
    Ok(norm(&sub(theta, &f)) / norm(theta))
}

#[cfg(test)]
mod tests;
