use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::krylov::{breakdown_tol, reorthogonalize, KrylovOptions, ProjectedLeastSquares, ShiftedSolve};
use crate::linalg::{axpy, dot, norm, scale};
use crate::operators::LinearOperator;
use crate::scalar::Scalar;

/// Output of `ℓ` steps of Lanczos tridiagonalization.
///
/// `alphas[j]` is the diagonal of column `j` and `gammas[j]` the subdiagonal
/// below it, so `gammas[ℓ-1]` is the trailing coefficient of `T_{ℓ+1,ℓ}`.
/// `v` holds `ℓ + 1` vectors unless the process broke down, in which case the
/// trailing coefficient is zero and only `ℓ` are kept.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TridiagFactors<T: Scalar> {
    pub v: Vec<Vec<T>>,
    pub alphas: Vec<T>,
    pub gammas: Vec<T>,
    pub terminated_early: bool,
}

impl<T: Scalar> TridiagFactors<T> {
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    /// Dense `(ℓ+1)×ℓ` matrix `T_{ℓ+1,ℓ}`, row-major.
    pub fn t_rect(&self) -> Vec<Vec<T>> {
        let l = self.steps();
        let mut t = vec![vec![T::zero(); l]; l + 1];
        for j in 0..l {
            t[j][j] = self.alphas[j];
            t[j + 1][j] = self.gammas[j];
            if j + 1 < l {
                t[j][j + 1] = self.gammas[j];
            }
        }
        t
    }

    pub fn orthogonality_loss(&self) -> T {
        crate::krylov::orthogonality_loss(&self.v)
    }
}

/// One step of the symmetric Lanczos recurrence.
pub(crate) struct TridiagProcess<'a, T, O: ?Sized> {
    m: &'a O,
    prev: Vec<T>,
    cur: Vec<T>,
    gamma_prev: T,
    scale: T,
}

impl<'a, T: Scalar, O: LinearOperator<T> + ?Sized> TridiagProcess<'a, T, O> {
    pub(crate) fn new(m: &'a O, c: &[T]) -> Self {
        let mut cur = c.to_vec();
        scale(T::one() / norm(c), &mut cur);
        TridiagProcess {
            m,
            prev: vec![T::zero(); c.len()],
            cur,
            gamma_prev: T::zero(),
            scale: T::zero(),
        }
    }

    pub(crate) fn current(&self) -> &[T] {
        &self.cur
    }

    /// Advances one step; returns `(α_j, γ_{j+1}, breakdown)`. `basis`, when
    /// given, receives full reorthogonalization.
    pub(crate) fn step(&mut self, basis: Option<&[Vec<T>]>) -> (T, T, bool) {
        let mut w = vec![T::zero(); self.cur.len()];
        self.m.forward_into(&self.cur, &mut w);
        // γ₀ = 0 makes the first subtraction a no-op
        axpy(-self.gamma_prev, &self.prev, &mut w);
        let alpha = dot(&self.cur, &w);
        axpy(-alpha, &self.cur, &mut w);
        if let Some(b) = basis {
            reorthogonalize(&mut w, b);
        }
        let mut gamma = norm(&w);
        self.scale = self.scale.max(alpha.abs()).max(gamma);
        let broke = gamma <= breakdown_tol::<T>() * self.scale;
        if broke {
            gamma = T::zero();
        } else {
            scale(T::one() / gamma, &mut w);
        }
        self.prev = std::mem::replace(&mut self.cur, w);
        self.gamma_prev = gamma;
        (alpha, gamma, broke)
    }
}

fn check_square<T: Scalar, O: LinearOperator<T> + ?Sized>(m: &O, c: &[T], ctx: &'static str) -> Result<()> {
    check_len(ctx, m.rows(), m.cols())?;
    check_len(ctx, m.rows(), c.len())?;
    if norm(c) == T::zero() {
        return Err(Error::ZeroStart(ctx));
    }
    #[cfg(debug_assertions)]
    crate::krylov::debug_check_symmetric(m);
    Ok(())
}

/// Runs Lanczos tridiagonalization of the symmetric `m` from `c`.
///
/// Stops at exact breakdown (flagged), after `opts.max_steps`, or after `dim` steps.
pub fn lanczos_tridiag<T: Scalar, O: LinearOperator<T> + ?Sized>(
    m: &O,
    c: &[T],
    opts: &KrylovOptions<T>,
) -> Result<TridiagFactors<T>> {
    opts.validate()?;
    check_square(m, c, "lanczos_tridiag")?;
    let limit = opts.max_steps.min(m.rows());
    let mut proc_ = TridiagProcess::new(m, c);
    let mut v = vec![proc_.current().to_vec()];
    let (mut alphas, mut gammas) = (Vec::new(), Vec::new());
    let mut terminated_early = false;
    for _ in 0..limit {
        let basis = if opts.reorthogonalize { Some(v.as_slice()) } else { None };
        let (a, g, broke) = proc_.step(basis);
        alphas.push(a);
        gammas.push(g);
        if broke {
            terminated_early = true;
            break;
        }
        v.push(proc_.current().to_vec());
    }
    Ok(TridiagFactors {
        v,
        alphas,
        gammas,
        terminated_early,
    })
}

/// Solves `(M + I) y = c` for symmetric positive semidefinite `M` by residual
/// minimization over `K_ℓ(M, c)`.
///
/// Never fails silently: hitting `max_steps` returns the iterate with
/// `converged = false`.
pub fn solve_shifted_sym<T: Scalar, O: LinearOperator<T> + ?Sized>(
    m: &O,
    c: &[T],
    opts: &KrylovOptions<T>,
) -> Result<ShiftedSolve<T>> {
    opts.validate()?;
    check_square(m, c, "solve_shifted_sym")?;
    let cnorm = norm(c);
    let target = opts.rel_residual_tol * cnorm;
    let limit = opts.max_steps.min(m.rows());
    let keep = !opts.low_memory;
    let reorth = opts.reorthogonalize && keep;

    let mut proc_ = TridiagProcess::new(m, c);
    let mut basis: Vec<Vec<T>> = if keep { vec![proc_.current().to_vec()] } else { Vec::new() };
    let mut ls = ProjectedLeastSquares::new(cnorm);
    let (mut alphas, mut gammas) = (Vec::new(), Vec::new());
    let mut gamma_above = T::zero();
    let mut breakdown = false;
    let mut residual = cnorm;
    for _ in 0..limit {
        let (a, g, broke) = proc_.step(if reorth { Some(basis.as_slice()) } else { None });
        residual = ls.push(gamma_above, a, g);
        alphas.push(a);
        gammas.push(g);
        gamma_above = g;
        if broke {
            breakdown = true;
            break;
        }
        if residual <= target {
            break;
        }
        if keep {
            basis.push(proc_.current().to_vec());
        }
    }
    let z = ls.solve();
    let y = if keep {
        combine(&basis, &z)
    } else {
        replay_tridiag(m, c, &alphas, &gammas, &z)
    };
    Ok(ShiftedSolve {
        y,
        steps: z.len(),
        residual_norm: residual,
        converged: residual <= target || breakdown,
        breakdown,
    })
}

pub(crate) fn combine<T: Scalar>(basis: &[Vec<T>], z: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); basis.first().map_or(0, Vec::len)];
    for (v, &zj) in basis.iter().zip(z) {
        axpy(zj, v, &mut y);
    }
    y
}

/// Regenerates `v_1, …, v_ℓ` from the stored coefficients and accumulates `Σ z_j v_j`.
fn replay_tridiag<T: Scalar, O: LinearOperator<T> + ?Sized>(
    m: &O,
    c: &[T],
    alphas: &[T],
    gammas: &[T],
    z: &[T],
) -> Vec<T> {
    let n = c.len();
    let mut cur = c.to_vec();
    scale(T::one() / norm(c), &mut cur);
    let mut prev = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    for j in 0..z.len() {
        axpy(z[j], &cur, &mut y);
        if j + 1 == z.len() || gammas[j] == T::zero() {
            break;
        }
        m.forward_into(&cur, &mut w);
        if j > 0 {
            axpy(-gammas[j - 1], &prev, &mut w);
        }
        axpy(-alphas[j], &cur, &mut w);
        scale(T::one() / gammas[j], &mut w);
        prev = std::mem::replace(&mut cur, w.clone());
    }
    y
}
