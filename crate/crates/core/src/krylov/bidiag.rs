use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::krylov::tridiag::combine;
use crate::krylov::{breakdown_tol, reorthogonalize, KrylovOptions, ProjectedLeastSquares, ShiftedSolve};
use crate::linalg::{axpy, norm, scale};
use crate::operators::LinearOperator;
use crate::scalar::Scalar;

/// Output of `ℓ` steps of Lanczos bidiagonalization of `A` started from `b`.
///
/// `A U_ℓ = V_{ℓ+1} C_{ℓ+1,ℓ}` and `Aᵀ V_ℓ = U_ℓ C_ℓᵀ`, where `C` is lower
/// bidiagonal with `rhos` on the diagonal and `sigmas` below it. `sigmas[j]`
/// is `σ_{j+2}` in one-based numbering, so it sits under `rhos[j]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BidiagFactors<T: Scalar> {
    pub u: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub rhos: Vec<T>,
    pub sigmas: Vec<T>,
    pub b_norm: T,
    pub terminated_early: bool,
}

impl<T: Scalar> BidiagFactors<T> {
    pub fn steps(&self) -> usize {
        self.rhos.len()
    }

    /// Dense `(ℓ+1)×ℓ` lower bidiagonal `C_{ℓ+1,ℓ}`.
    pub fn c_rect(&self) -> Vec<Vec<T>> {
        let l = self.steps();
        let mut c = vec![vec![T::zero(); l]; l + 1];
        for j in 0..l {
            c[j][j] = self.rhos[j];
            c[j + 1][j] = self.sigmas[j];
        }
        c
    }

    /// Coefficients of the tridiagonal `T_{ℓ+1,ℓ} = C_{ℓ+1,ℓ} C_ℓᵀ` of `AAᵀ`.
    pub fn tridiag(&self) -> (Vec<T>, Vec<T>) {
        let alphas = (0..self.steps())
            .map(|j| {
                let s = if j == 0 { T::zero() } else { self.sigmas[j - 1] };
                self.rhos[j] * self.rhos[j] + s * s
            })
            .collect();
        let gammas = self.rhos.iter().zip(&self.sigmas).map(|(&r, &s)| r * s).collect();
        (alphas, gammas)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stop {
    None,
    /// `ρ_j = 0`: `Aᵀ v_j` lies in the span of the previous `u`.
    Rho,
    /// `σ_{j+1} = 0`: `A u_j` lies in the span of the `v`.
    Sigma,
}

struct BidiagProcess<'a, T, O: ?Sized> {
    a: &'a O,
    v: Vec<T>,
    u_prev: Vec<T>,
    sigma: T,
}

impl<'a, T: Scalar, O: LinearOperator<T> + ?Sized> BidiagProcess<'a, T, O> {
    fn new(a: &'a O, b: &[T]) -> Self {
        let mut v = b.to_vec();
        scale(T::one() / norm(b), &mut v);
        BidiagProcess {
            a,
            v,
            u_prev: vec![T::zero(); a.cols()],
            sigma: T::zero(),
        }
    }

    /// Produces `(ρ_j, u_j, σ_{j+1}, v_{j+1})`, stopping early on breakdown.
    fn step(&mut self, ubasis: Option<&[Vec<T>]>, vbasis: Option<&[Vec<T>]>) -> (T, T, Stop) {
        let tol = breakdown_tol::<T>();
        let mut w = vec![T::zero(); self.a.cols()];
        self.a.adjoint_into(&self.v, &mut w);
        let raw = norm(&w);
        axpy(-self.sigma, &self.u_prev, &mut w);
        if let Some(b) = ubasis {
            reorthogonalize(&mut w, b);
        }
        let rho = norm(&w);
        if rho <= tol * raw.max(self.sigma) {
            return (T::zero(), T::zero(), Stop::Rho);
        }
        scale(T::one() / rho, &mut w);
        let mut p = vec![T::zero(); self.a.rows()];
        self.a.forward_into(&w, &mut p);
        let raw = norm(&p);
        axpy(-rho, &self.v, &mut p);
        if let Some(b) = vbasis {
            reorthogonalize(&mut p, b);
        }
        let sigma = norm(&p);
        self.u_prev = w;
        if sigma <= tol * raw.max(rho) {
            self.sigma = T::zero();
            return (rho, T::zero(), Stop::Sigma);
        }
        scale(T::one() / sigma, &mut p);
        self.v = p;
        self.sigma = sigma;
        (rho, sigma, Stop::None)
    }
}

fn check_start<T: Scalar, O: LinearOperator<T> + ?Sized>(a: &O, b: &[T], ctx: &'static str) -> Result<()> {
    check_len(ctx, a.rows(), b.len())?;
    if norm(b) == T::zero() {
        return Err(Error::ZeroStart(ctx));
    }
    Ok(())
}

/// Runs Lanczos bidiagonalization of `a` with starting vector `b`.
pub fn lanczos_bidiag<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<BidiagFactors<T>> {
    opts.validate()?;
    check_start(a, b, "lanczos_bidiag")?;
    let limit = opts.max_steps.min(a.rows()).min(a.cols());
    let mut pr = BidiagProcess::new(a, b);
    let mut f = BidiagFactors {
        u: Vec::new(),
        v: vec![pr.v.clone()],
        rhos: Vec::new(),
        sigmas: Vec::new(),
        b_norm: norm(b),
        terminated_early: false,
    };
    for _ in 0..limit {
        let (ub, vb) = if opts.reorthogonalize {
            (Some(f.u.as_slice()), Some(f.v.as_slice()))
        } else {
            (None, None)
        };
        let (rho, sigma, stop) = pr.step(ub, vb);
        if stop == Stop::Rho {
            f.terminated_early = true;
            break;
        }
        f.u.push(pr.u_prev.clone());
        f.rhos.push(rho);
        f.sigmas.push(sigma);
        if stop == Stop::Sigma {
            f.terminated_early = true;
            break;
        }
        f.v.push(pr.v.clone());
    }
    Ok(f)
}

/// Solves `(AAᵀ + I) ζ = b` through the bidiagonalization of `A`, never
/// forming `AAᵀ`.
pub fn solve_shifted_normal<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    opts: &KrylovOptions<T>,
) -> Result<ShiftedSolve<T>> {
    opts.validate()?;
    check_start(a, b, "solve_shifted_normal")?;
    let bnorm = norm(b);
    let target = opts.rel_residual_tol * bnorm;
    let limit = opts.max_steps.min(a.rows());
    let keep = !opts.low_memory;
    let reorth = opts.reorthogonalize && keep;

    let mut pr = BidiagProcess::new(a, b);
    let mut vbasis = vec![pr.v.clone()];
    let mut ubasis: Vec<Vec<T>> = Vec::new();
    let mut ls = ProjectedLeastSquares::new(bnorm);
    let (mut rhos, mut sigmas) = (Vec::new(), Vec::new());
    let mut sigma_j = T::zero();
    let mut gamma_above = T::zero();
    let mut residual = bnorm;
    let mut breakdown = false;
    for _ in 0..limit {
        let (ub, vb) = if reorth {
            (Some(ubasis.as_slice()), Some(vbasis.as_slice()))
        } else {
            (None, None)
        };
        let (rho, sigma, stop) = pr.step(ub, vb);
        let alpha = rho * rho + sigma_j * sigma_j;
        let gamma = rho * sigma;
        residual = ls.push(gamma_above, alpha, gamma);
        rhos.push(rho);
        sigmas.push(sigma);
        if stop != Stop::None {
            breakdown = true;
            break;
        }
        if residual <= target {
            break;
        }
        if keep {
            ubasis.push(pr.u_prev.clone());
            vbasis.push(pr.v.clone());
        }
        gamma_above = gamma;
        sigma_j = sigma;
    }
    let z = ls.solve();
    let y = if keep {
        combine(&vbasis, &z)
    } else {
        replay_bidiag(a, b, &rhos, &sigmas, &z)
    };
    Ok(ShiftedSolve {
        y,
        steps: z.len(),
        residual_norm: residual,
        converged: residual <= target || breakdown,
        breakdown,
    })
}

/// Regenerates `v_1, …, v_ℓ` from `ρ, σ` and accumulates `Σ z_j v_j`.
fn replay_bidiag<T: Scalar, O: LinearOperator<T> + ?Sized>(
    a: &O,
    b: &[T],
    rhos: &[T],
    sigmas: &[T],
    z: &[T],
) -> Vec<T> {
    let mut v = b.to_vec();
    scale(T::one() / norm(b), &mut v);
    let mut u = vec![T::zero(); a.cols()];
    let mut y = vec![T::zero(); b.len()];
    let mut sigma = T::zero();
    for j in 0..z.len() {
        axpy(z[j], &v, &mut y);
        if j + 1 == z.len() || rhos[j] == T::zero() || sigmas[j] == T::zero() {
            break;
        }
        let mut w = vec![T::zero(); a.cols()];
        a.adjoint_into(&v, &mut w);
        axpy(-sigma, &u, &mut w);
        scale(T::one() / rhos[j], &mut w);
        u = w;
        let mut p = vec![T::zero(); b.len()];
        a.forward_into(&u, &mut p);
        axpy(-rhos[j], &v, &mut p);
        scale(T::one() / sigmas[j], &mut p);
        v = p;
        sigma = sigmas[j];
    }
    y
}
