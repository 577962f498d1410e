//! Small dense vector and matrix kernels.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    // scaled accumulation keeps tiny and huge vectors finite
    let scale = a.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = a.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Relative Euclidean distance `‖a − b‖ / ‖b‖`, or the absolute distance when `b = 0`.
pub fn rel_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    let d = norm(&sub(a, b));
    let nb = norm(b);
    if nb > T::zero() {
        d / nb
    } else {
        d
    }
}

/// Row-major dense matrix used for small factorizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    /// Lower-triangular Cholesky factor `C` with `self = C Cᵀ`.
    pub fn cholesky(&self) -> Result<Dense<T>> {
        if self.rows != self.cols {
            return Err(Error::Factorization("cholesky of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut c = Dense::zeros(n, n);
        for j in 0..n {
            let mut d = self.get(j, j);
            for p in 0..j {
                d -= c.get(j, p) * c.get(j, p);
            }
            if !(d > T::zero()) {
                return Err(Error::Factorization(format!(
                    "matrix is not positive definite (pivot {j} = {d})"
                )));
            }
            let djj = d.sqrt();
            c.set(j, j, djj);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for p in 0..j {
                    s -= c.get(i, p) * c.get(j, p);
                }
                c.set(i, j, s / djj);
            }
        }
        Ok(c)
    }

    /// Solves `self · x = b` for lower-triangular `self`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.get(i, j) * x[j];
            }
            x[i] = s / self.get(i, i);
        }
        x
    }

    /// Solves `selfᵀ · x = b` for lower-triangular `self`.
    pub fn solve_lower_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.get(j, i) * x[j];
            }
            x[i] = s / self.get(i, i);
        }
        x
    }
}

/// Givens rotation `(c, s, r)` with `[c s; -s c]ᵀ`-style elimination: `c·a + s·b = r`, `-s·a + c·b = 0`.
#[inline]
pub fn givens<T: Scalar>(a: T, b: T) -> (T, T, T) {
    if b == T::zero() {
        (T::one(), T::zero(), a)
    } else {
        let r = a.hypot(b);
        (a / r, b / r, r)
    }
}
