use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::krylov::{solve_shifted_normal, KrylovOptions};
use crate::linalg::norm;
use crate::operators::{Adjoint, LinearOperator};
use crate::scalar::Scalar;

/// Which normal equations were solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TikhonovPath {
    /// `(AAᵀ + I) ζ = b`, then `ξ = Aᵀ ζ`. Used when `m < n`.
    Wiener,
    /// `(AᵀA + I) ξ = Aᵀ b`. Used when `m ≥ n`.
    Tikhonov,
    /// The right-hand side vanished and `ξ = 0` exactly.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TikhonovDiagnostics<T: Scalar> {
    pub path: TikhonovPath,
    pub inner_steps: usize,
    pub residual_norm: T,
    pub converged: bool,
    pub breakdown: bool,
}

/// Minimizes `‖A ξ − b‖² + ‖ξ‖²` over the smaller of the two equivalent
/// normal systems.
pub fn solve_tikhonov_standard<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<(Vec<T>, TikhonovDiagnostics<T>)> {
    opts.validate()?;
    check_len("solve_tikhonov_standard", a.rows(), b.len())?;
    let (m, n) = (a.rows(), a.cols());
    let trivial = || {
        (
            vec![T::zero(); n],
            TikhonovDiagnostics {
                path: TikhonovPath::Trivial,
                inner_steps: 0,
                residual_norm: T::zero(),
                converged: true,
                breakdown: false,
            },
        )
    };
    if norm(b) == T::zero() {
        return Ok(trivial());
    }
    if m < n {
        let s = solve_shifted_normal(a, b, opts)?;
        let mut xi = vec![T::zero(); n];
        a.adjoint_into(&s.y, &mut xi);
        Ok((
            xi,
            TikhonovDiagnostics {
                path: TikhonovPath::Wiener,
                inner_steps: s.steps,
                residual_norm: s.residual_norm,
                converged: s.converged,
                breakdown: s.breakdown,
            },
        ))
    } else {
        let mut atb = vec![T::zero(); n];
        a.adjoint_into(b, &mut atb);
        if norm(&atb) == T::zero() {
            return Ok(trivial());
        }
        let s = solve_shifted_normal(&Adjoint::new(a), &atb, opts)?;
        Ok((
            s.y,
            TikhonovDiagnostics {
                path: TikhonovPath::Tikhonov,
                inner_steps: s.steps,
                residual_norm: s.residual_norm,
                converged: s.converged,
                breakdown: s.breakdown,
            },
        ))
    }
}
