//! Explicit pseudoinverse through a dense Householder QR factorization, kept
//! as a reference path for correctness and timing comparisons.

use crate::error::{Error, Result};
use crate::operators::{LinearOperator, OperatorKind};
use crate::regularizer::ScaledOperator;
use crate::scalar::Scalar;

/// Default limit on `k·n` for [`pinv_via_qr`].
pub const DEFAULT_QR_CAP: usize = 40_000_000;

/// `L_θ† = R⁻¹ Qᵀ` from a lean QR factorization `L_θ = Q R`.
#[derive(Clone, Debug)]
pub struct QrPseudoInverse<T> {
    k: usize,
    n: usize,
    /// Column-major `k×n`: Householder vectors below the diagonal, `R` on and above.
    qr: Vec<T>,
    tau: Vec<T>,
}

/// Materializes `L_θ` and factors it. Refuses when `k·n > cap`.
pub fn pinv_via_qr<T: Scalar>(lt: &ScaledOperator<'_, T>, cap: usize) -> Result<QrPseudoInverse<T>> {
    let (k, n) = (lt.rows(), lt.cols());
    if k.saturating_mul(n) > cap {
        return Err(Error::SizeCap { rows: k, cols: n, cap });
    }
    let mut a = vec![T::zero(); k * n];
    let l = lt.base().matrix();
    for i in 0..k {
        let (cols, vals) = l.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            a[j * k + i] = v * lt.row_scale()[i];
        }
    }
    let mut tau = vec![T::zero(); n];
    for j in 0..n {
        let (done, rest) = a.split_at_mut((j + 1) * k);
        let col = &mut done[j * k..];
        let x = &mut col[j..];
        let alpha = x[0];
        let tail: T = x[1..].iter().map(|&v| v * v).sum();
        let nrm = (alpha * alpha + tail).sqrt();
        if nrm == T::zero() {
            return Err(Error::RankDeficient(format!("column {j} of L_theta vanishes in QR")));
        }
        let beta = if alpha > T::zero() { -nrm } else { nrm };
        let v0 = alpha - beta;
        for v in x[1..].iter_mut() {
            *v /= v0;
        }
        tau[j] = (beta - alpha) / beta;
        x[0] = beta;
        let x = &col[j..];
        for c in rest.chunks_exact_mut(k) {
            let y = &mut c[j..];
            let mut s = y[0];
            for (yi, &vi) in y[1..].iter().zip(&x[1..]) {
                s += *yi * vi;
            }
            s *= tau[j];
            y[0] -= s;
            for (yi, &vi) in y[1..].iter_mut().zip(&x[1..]) {
                *yi -= s * vi;
            }
        }
    }
    for j in 0..n {
        if a[j * k + j].abs() <= T::epsilon() * T::lit(16.0) * a[0].abs() {
            return Err(Error::RankDeficient(format!("R[{j},{j}] vanishes in QR")));
        }
    }
    Ok(QrPseudoInverse { k, n, qr: a, tau })
}

impl<T: Scalar> QrPseudoInverse<T> {
    fn reflect(&self, j: usize, y: &mut [T]) {
        let v = &self.qr[j * self.k + j..(j + 1) * self.k];
        let mut s = y[j];
        for (yi, &vi) in y[j + 1..].iter().zip(&v[1..]) {
            s += *yi * vi;
        }
        s *= self.tau[j];
        y[j] -= s;
        for (yi, &vi) in y[j + 1..].iter_mut().zip(&v[1..]) {
            *yi -= s * vi;
        }
    }

    fn r(&self, i: usize, j: usize) -> T {
        self.qr[j * self.k + i]
    }
}

impl<T: Scalar> LinearOperator<T> for QrPseudoInverse<T> {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.k
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Dense
    }
    fn forward_into(&self, xi: &[T], x: &mut [T]) {
        let mut y = xi.to_vec();
        for j in 0..self.n {
            self.reflect(j, &mut y);
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for j in i + 1..self.n {
                s -= self.r(i, j) * x[j];
            }
            x[i] = s / self.r(i, i);
        }
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        // y = Q R⁻ᵀ w
        y.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..self.n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.r(j, i) * y[j];
            }
            y[i] = s / self.r(i, i);
        }
        for j in (0..self.n).rev() {
            self.reflect(j, y);
        }
    }
}
