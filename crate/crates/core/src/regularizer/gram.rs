//! Solvers for the weighted Gram system `(Lᵀ W L) x = r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::operators::{LinearOperator, SparseMatrix};
use crate::scalar::Scalar;

/// How Gram systems are solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramStrategy {
    /// Envelope Cholesky unless the envelope exceeds [`ENVELOPE_CAP`] entries.
    #[default]
    Auto,
    Envelope,
    ConjugateGradient,
}

/// Largest envelope stored before falling back to conjugate gradients.
pub const ENVELOPE_CAP: usize = 50_000_000;

const CG_TOL: f64 = 1e-10;

/// Symbolic analysis of `LᵀL`, shared by every θ.
#[derive(Clone, Debug)]
pub enum GramSolver<T> {
    Envelope(Envelope<T>),
    ConjugateGradient { n: usize },
}

/// Skyline storage: row `j` of the lower factor covers columns `first[j]..=j`
/// and starts at `offset[j]`.
#[derive(Clone, Debug)]
pub struct Envelope<T> {
    first: Vec<usize>,
    offset: Vec<usize>,
    /// `(storage position, row of L, l_ij · l_ik)` for every product entering `LᵀWL`.
    contrib: Vec<(usize, usize, T)>,
}

/// Numeric factor for one set of row weights.
#[derive(Clone, Debug)]
pub enum GramFactor<T> {
    Envelope(Vec<T>),
    ConjugateGradient,
}

impl<T: Scalar> GramSolver<T> {
    /// Builds the symbolic structure and checks full column rank with unit weights.
    pub fn new(l: &SparseMatrix<T>, strategy: GramStrategy) -> Result<Self> {
        let n = l.cols();
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..l.rows() {
            let (cols, _) = l.row(i);
            if let Some(&lo) = cols.iter().min() {
                for &c in cols {
                    first[c] = first[c].min(lo);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for (j, &f) in first.iter().enumerate() {
            offset.push(total);
            total += j - f + 1;
        }
        offset.push(total);
        let use_envelope = match strategy {
            GramStrategy::Auto => total <= ENVELOPE_CAP,
            GramStrategy::Envelope => true,
            GramStrategy::ConjugateGradient => false,
        };
        if !use_envelope {
            return Ok(GramSolver::ConjugateGradient { n });
        }
        let mut contrib = Vec::new();
        for i in 0..l.rows() {
            let (cols, vals) = l.row(i);
            for (a, (&cj, &vj)) in cols.iter().zip(vals).enumerate() {
                for (&ck, &vk) in cols.iter().zip(vals).take(a + 1) {
                    let (hi, lo) = if cj >= ck { (cj, ck) } else { (ck, cj) };
                    contrib.push((offset[hi] + lo - first[hi], i, vj * vk));
                }
            }
        }
        let solver = GramSolver::Envelope(Envelope { first, offset, contrib });
        solver.factor(&vec![T::one(); l.rows()])?;
        Ok(solver)
    }

    pub fn n(&self) -> usize {
        match self {
            GramSolver::Envelope(e) => e.first.len(),
            GramSolver::ConjugateGradient { n } => *n,
        }
    }

    /// Stored entries of the envelope, or zero for conjugate gradients.
    pub fn envelope_size(&self) -> usize {
        match self {
            GramSolver::Envelope(e) => *e.offset.last().unwrap_or(&0),
            GramSolver::ConjugateGradient { .. } => 0,
        }
    }

    /// Numeric factorization of `Lᵀ diag(weights) L`.
    pub fn factor(&self, weights: &[T]) -> Result<GramFactor<T>> {
        let e = match self {
            GramSolver::ConjugateGradient { .. } => return Ok(GramFactor::ConjugateGradient),
            GramSolver::Envelope(e) => e,
        };
        let n = e.first.len();
        let mut v = vec![T::zero(); *e.offset.last().unwrap_or(&0)];
        for &(pos, row, val) in &e.contrib {
            v[pos] += weights[row] * val;
        }
        let idx = |j: usize, k: usize| e.offset[j] + k - e.first[j];
        let tol = T::epsilon() * T::lit(16.0) * T::from_usize_lossy(n.max(1));
        for j in 0..n {
            let fj = e.first[j];
            for k in fj..j {
                let lo = fj.max(e.first[k]);
                let mut s = v[idx(j, k)];
                for p in lo..k {
                    s -= v[idx(j, p)] * v[idx(k, p)];
                }
                v[idx(j, k)] = s / v[idx(k, k)];
            }
            let diag = v[idx(j, j)];
            let mut s = diag;
            for p in fj..j {
                s -= v[idx(j, p)] * v[idx(j, p)];
            }
            if !(s > tol * diag) || !s.is_finite() {
                return Err(Error::RankDeficient(format!(
                    "Gram matrix pivot {j} is {s:e} against diagonal {diag:e}; L lacks full column rank"
                )));
            }
            v[idx(j, j)] = s.sqrt();
        }
        Ok(GramFactor::Envelope(v))
    }

    /// Solves `(Lᵀ diag(weights) L) x = rhs` with a factor from [`GramSolver::factor`].
    pub fn solve(&self, factor: &GramFactor<T>, l: &SparseMatrix<T>, weights: &[T], rhs: &[T]) -> Vec<T> {
        match (self, factor) {
            (GramSolver::Envelope(e), GramFactor::Envelope(v)) => {
                let n = e.first.len();
                let idx = |j: usize, k: usize| e.offset[j] + k - e.first[j];
                let mut x = rhs.to_vec();
                for j in 0..n {
                    let mut s = x[j];
                    for p in e.first[j]..j {
                        s -= v[idx(j, p)] * x[p];
                    }
                    x[j] = s / v[idx(j, j)];
                }
                for j in (0..n).rev() {
                    x[j] /= v[idx(j, j)];
                    let xj = x[j];
                    for p in e.first[j]..j {
                        x[p] -= v[idx(j, p)] * xj;
                    }
                }
                x
            }
            _ => conjugate_gradient(l, weights, rhs),
        }
    }
}

fn gram_apply<T: Scalar>(l: &SparseMatrix<T>, weights: &[T], x: &[T]) -> Vec<T> {
    let mut lx = vec![T::zero(); l.rows()];
    l.forward_into(x, &mut lx);
    for (v, &w) in lx.iter_mut().zip(weights) {
        *v *= w;
    }
    let mut y = vec![T::zero(); l.cols()];
    l.adjoint_into(&lx, &mut y);
    y
}

fn conjugate_gradient<T: Scalar>(l: &SparseMatrix<T>, weights: &[T], rhs: &[T]) -> Vec<T> {
    let n = rhs.len();
    let mut x = vec![T::zero(); n];
    let bnorm = norm(rhs);
    if bnorm == T::zero() {
        return x;
    }
    let tol = T::lit(CG_TOL).max(T::epsilon() * T::lit(10.0)) * bnorm;
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..10 * n + 100 {
        let q = gram_apply(l, weights, &p);
        let alpha = rr / dot(&p, &q);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol {
            break;
        }
        let beta = rr_new / rr;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    x
}
