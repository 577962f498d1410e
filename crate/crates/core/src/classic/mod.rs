//! Classical Tikhonov regularization with the Morozov discrepancy principle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::ias::phase1_update;
use crate::krylov::{KrylovOptions, TikhonovDiagnostics};
use crate::linalg::{norm_sq, sub};
use crate::operators::LinearOperator;
use crate::regularizer::{scale_by_theta, SparsifyingOperator};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorozovOptions {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Stop once `|h(α) − mσ²| ≤ rel_tol · mσ²`.
    pub rel_tol: f64,
    pub max_bisect: usize,
}

impl Default for MorozovOptions {
    fn default() -> Self {
        MorozovOptions {
            alpha_min: 1e-16,
            alpha_max: 1e10,
            rel_tol: 0.01,
            max_bisect: 60,
        }
    }
}

impl MorozovOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max && self.alpha_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha_min",
                reason: format!("need 0 < alpha_min < alpha_max, got [{}, {}]", self.alpha_min, self.alpha_max),
            });
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                reason: format!("must lie in (0, 1), got {}", self.rel_tol),
            });
        }
        if self.max_bisect == 0 {
            return Err(Error::InvalidParameter {
                name: "max_bisect",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Solution of `min ‖Ax − b‖² + α‖Lx‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TikhonovSolution<T: Scalar> {
    pub x: Vec<T>,
    pub diagnostics: TikhonovDiagnostics<T>,
}

/// Minimizes `‖Ax − b‖² + α‖Lx‖²` through the standard-form reduction with a
/// uniform variance `θ = 1/α` on every group of `lop`.
pub fn tikhonov_solve<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    lop: &SparsifyingOperator<T>,
    alpha: T,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<TikhonovSolution<T>> {
    if !(alpha > T::zero() && alpha.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be positive and finite, got {alpha}"),
        });
    }
    let theta = vec![T::one() / alpha; lop.partition().len()];
    let lt = scale_by_theta(lop, &theta)?;
    let out = phase1_update(a, &lt, b, opts)?;
    Ok(TikhonovSolution {
        x: out.x,
        diagnostics: out.diagnostics,
    })
}

/// `h = ‖Ax − b‖²`.
pub fn discrepancy<T: Scalar, O: LinearOperator<T> + ?Sized>(a: &O, x: &[T], b: &[T]) -> Result<T> {
    check_len("discrepancy", a.rows(), b.len())?;
    Ok(norm_sq(&sub(&a.apply(x)?, b)))
}

/// `α = σ/√θ`.
pub fn alpha_from_theta<T: Scalar>(sigma: T, theta: T) -> Result<T> {
    if !(theta > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("must be positive, got {theta}"),
        });
    }
    Ok(sigma / theta.sqrt())
}

/// One trial of the discrepancy search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorozovTrial {
    pub alpha: f64,
    pub h: f64,
    pub bracket: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MorozovResult<T: Scalar> {
    pub alpha: T,
    pub x: Vec<T>,
    /// Linear solves made by the bisection itself.
    pub evals: usize,
    /// Linear solves spent checking and expanding the initial bracket.
    pub bracket_evals: usize,
    /// `|h(α) − mσ²| ≤ rel_tol · mσ²` was reached.
    pub converged: bool,
    /// The target lies beyond `h(α_max)`; `α` is the upper end of the bracket.
    pub hit_alpha_max: bool,
    pub target: T,
    pub trace: Vec<MorozovTrial>,
}

impl<T: Scalar> MorozovResult<T> {
    pub fn total_evals(&self) -> usize {
        self.evals + self.bracket_evals
    }

    /// Writes the trial sequence as CSV with columns `alpha,h,bracket`.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["alpha", "h", "bracket"]).map_err(|e| Error::Io(e.to_string()))?;
        for t in &self.trace {
            w.write_record([format!("{:e}", t.alpha), format!("{:e}", t.h), t.bracket.to_string()])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Geometric bisection for `h(α) = mσ²`.
///
/// The bracket `[α_min, α_max]` must satisfy `h(α_min) < mσ² ≤ h(α_max)`. A
/// failing end is pushed out once by a factor 10³; a target above `‖b‖²`
/// can never be met and returns `α_max` flagged.
#[allow(clippy::too_many_arguments)]
pub fn morozov_bisect<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    lop: &SparsifyingOperator<T>,
    b: &[T],
    sigma: T,
    m: usize,
    mopts: &MorozovOptions,
    kopts: &KrylovOptions<T>,
) -> Result<MorozovResult<T>> {
    mopts.validate()?;
    check_len("morozov_bisect", a.rows(), b.len())?;
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be positive, got {sigma}"),
        });
    }
    let target = T::from_usize_lossy(m) * sigma * sigma;
    let tf = target.as_f64();
    let mut trace = Vec::new();
    let solve = |alpha: f64, bracket: bool, trace: &mut Vec<MorozovTrial>| -> Result<(Vec<T>, f64)> {
        let sol = tikhonov_solve(a, lop, T::lit(alpha), b, kopts)?;
        let h = discrepancy(a, &sol.x, b)?.as_f64();
        trace.push(MorozovTrial { alpha, h, bracket });
        Ok((sol.x, h))
    };

    let (mut lo, mut hi) = (mopts.alpha_min, mopts.alpha_max);
    let mut bracket_evals = 0;

    if target >= norm_sq(b) {
        let (x, _) = solve(hi, true, &mut trace)?;
        return Ok(MorozovResult {
            alpha: T::lit(hi),
            x,
            evals: 0,
            bracket_evals: 1,
            converged: false,
            hit_alpha_max: true,
            target,
            trace,
        });
    }

    let (mut x_hi, mut h_hi) = solve(hi, true, &mut trace)?;
    bracket_evals += 1;
    if h_hi < tf {
        hi *= 1e3;
        (x_hi, h_hi) = solve(hi, true, &mut trace)?;
        bracket_evals += 1;
        if h_hi < tf {
            return Ok(MorozovResult {
                alpha: T::lit(hi),
                x: x_hi,
                evals: 0,
                bracket_evals,
                converged: false,
                hit_alpha_max: true,
                target,
                trace,
            });
        }
    }
    let (_, mut h_lo) = solve(lo, true, &mut trace)?;
    bracket_evals += 1;
    if h_lo >= tf {
        lo /= 1e3;
        (_, h_lo) = solve(lo, true, &mut trace)?;
        bracket_evals += 1;
        if h_lo >= tf {
            return Err(Error::InvalidBracket {
                alpha_min: lo,
                alpha_max: hi,
                h_min: h_lo,
                h_max: h_hi,
                target: tf,
            });
        }
    }

    let mut best = (hi, x_hi, h_hi);
    let mut evals = 0;
    let mut converged = false;
    while evals < mopts.max_bisect {
        let alpha = (lo * hi).sqrt();
        let (x, h) = solve(alpha, false, &mut trace)?;
        evals += 1;
        if (h - tf).abs() < (best.2 - tf).abs() {
            best = (alpha, x, h);
        }
        if (h - tf).abs() <= mopts.rel_tol * tf {
            converged = true;
            break;
        }
        if h < tf {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    Ok(MorozovResult {
        alpha: T::lit(best.0),
        x: best.1,
        evals,
        bracket_evals,
        converged,
        hit_alpha_max: false,
        target,
        trace,
    })
}

#[cfg(test)]
mod tests;
