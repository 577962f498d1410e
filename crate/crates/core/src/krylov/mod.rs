//! Lanczos tridiagonalization and bidiagonalization, and the shifted solves
//! built on them.
//!
//! The shifted system `(M + I) y = c` is solved by minimizing the residual over
//! the Krylov space `K_ℓ(M, c)`. Because the Lanczos basis of `M` is also a basis
//! for `M + I`, the projected problem is the small least-squares system
//! `min ‖(T_{ℓ+1,ℓ} + I_{ℓ+1,ℓ}) z − ‖c‖ e₁‖`, reduced incrementally with Givens
//! rotations. The magnitude of the last rotated right-hand side entry is the
//! norm of the true residual as long as the Lanczos vectors stay orthonormal.

mod bidiag;
mod projected;
mod tikhonov;
mod tridiag;

pub use bidiag::{lanczos_bidiag, solve_shifted_normal, BidiagFactors};
pub use projected::ProjectedLeastSquares;
pub use tikhonov::{solve_tikhonov_standard, TikhonovDiagnostics, TikhonovPath};
pub use tridiag::{lanczos_tridiag, solve_shifted_sym, TridiagFactors};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KrylovOptions<T: Scalar> {
    pub max_steps: usize,
    /// Stop once `‖(M + I) y − c‖ ≤ rel_residual_tol · ‖c‖`.
    pub rel_residual_tol: T,
    /// Full reorthogonalization against every stored Lanczos vector.
    pub reorthogonalize: bool,
    /// Keep two Lanczos vectors and replay the recurrence to assemble the
    /// solution. Disables reorthogonalization.
    pub low_memory: bool,
}

impl<T: Scalar> Default for KrylovOptions<T> {
    fn default() -> Self {
        KrylovOptions {
            max_steps: 1000,
            rel_residual_tol: T::lit(1e-8),
            reorthogonalize: true,
            low_memory: false,
        }
    }
}

impl<T: Scalar> KrylovOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_residual_tol > T::zero() && self.rel_residual_tol < T::one()) {
            return Err(Error::InvalidParameter {
                name: "rel_residual_tol",
                reason: format!("must lie in (0, 1), got {}", self.rel_residual_tol),
            });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.rel_residual_tol = tol;
        self
    }
}

/// Outcome of a shifted solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ShiftedSolve<T: Scalar> {
    pub y: Vec<T>,
    pub steps: usize,
    /// Residual norm of the projected problem, `|ĝ_{ℓ+1}|`.
    pub residual_norm: T,
    pub converged: bool,
    /// The Krylov space became invariant before the tolerance test fired.
    pub breakdown: bool,
}

/// Relative size below which a Lanczos coefficient counts as an exact breakdown.
pub(crate) fn breakdown_tol<T: Scalar>() -> T {
    T::epsilon() * T::lit(1e3)
}

/// One or two passes of modified Gram–Schmidt of `w` against `basis`.
pub(crate) fn reorthogonalize<T: Scalar>(w: &mut [T], basis: &[Vec<T>]) {
    use crate::linalg::{axpy, dot, norm};
    for pass in 0..2 {
        let before = norm(w);
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
        // "twice is enough": only repeat when cancellation was severe
        if pass == 0 && norm(w) > T::lit(0.7) * before {
            break;
        }
    }
}

/// Largest entry of `|VᵀV − I|`.
pub fn orthogonality_loss<T: Scalar>(basis: &[Vec<T>]) -> T {
    let mut worst = T::zero();
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((crate::linalg::dot(a, b) - target).abs());
        }
    }
    worst
}

#[cfg(debug_assertions)]
pub(crate) fn debug_check_symmetric<T: Scalar, O: crate::LinearOperator<T> + ?Sized>(m: &O) {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xabc);
    let n = m.cols();
    for _ in 0..5 {
        let v: Vec<T> = (0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
        let w: Vec<T> = (0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect();
        let mv = m.apply(&v).expect("square operator");
        let mw = m.apply(&w).expect("square operator");
        let lhs = crate::linalg::dot(&mv, &w);
        let rhs = crate::linalg::dot(&v, &mw);
        let scale = crate::linalg::norm(&mv) * crate::linalg::norm(&w)
            + crate::linalg::norm(&mw) * crate::linalg::norm(&v);
        debug_assert!(
            (lhs - rhs).abs() <= T::lit(1e-8) * scale.max(T::min_positive_value()),
            "operator is not symmetric: <Mv,w> = {lhs}, <v,Mw> = {rhs}"
        );
    }
}
