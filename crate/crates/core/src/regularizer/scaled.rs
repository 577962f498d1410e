use crate::error::{check_len, Error, Result};
use crate::operators::{LinearOperator, OperatorKind};
use crate::regularizer::gram::GramFactor;
use crate::regularizer::SparsifyingOperator;
use crate::scalar::Scalar;

/// `L_θ = D_θ^{-1/2} L`: row `i` of `L` divided by `√θ` of its group, with the
/// Gram matrix `L_θᵀ L_θ` factored for this `θ`.
#[derive(Clone, Debug)]
pub struct ScaledOperator<'a, T: Scalar> {
    base: &'a SparsifyingOperator<T>,
    theta: Vec<T>,
    row_scale: Vec<T>,
    weights: Vec<T>,
    factor: GramFactor<T>,
}

/// Builds `L_θ` and refreshes the numeric Gram factorization.
pub fn scale_by_theta<'a, T: Scalar>(lop: &'a SparsifyingOperator<T>, theta: &[T]) -> Result<ScaledOperator<'a, T>> {
    let part = lop.partition();
    check_len("scale_by_theta", part.len(), theta.len())?;
    if let Some((group, &value)) = theta.iter().enumerate().find(|(_, &t)| !(t > T::zero() && t.is_finite())) {
        return Err(Error::NonPositiveTheta {
            group,
            value: value.as_f64(),
        });
    }
    let weights: Vec<T> = part.expand(theta).into_iter().map(|t| T::one() / t).collect();
    let row_scale = weights.iter().map(|w| w.sqrt()).collect();
    let factor = lop.gram().factor(&weights)?;
    Ok(ScaledOperator {
        base: lop,
        theta: theta.to_vec(),
        row_scale,
        weights,
        factor,
    })
}

impl<'a, T: Scalar> ScaledOperator<'a, T> {
    pub fn base(&self) -> &'a SparsifyingOperator<T> {
        self.base
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    /// `1/√θ_{group(i)}` for every row `i`.
    pub fn row_scale(&self) -> &[T] {
        &self.row_scale
    }

    /// Solves `(L_θᵀ L_θ) x = rhs`.
    pub fn gram_solve(&self, rhs: &[T]) -> Vec<T> {
        self.base.gram().solve(&self.factor, self.base.matrix(), &self.weights, rhs)
    }

    pub fn pseudo_inverse(&self) -> PseudoInverse<'_, 'a, T> {
        PseudoInverse { op: self }
    }
}

impl<T: Scalar> LinearOperator<T> for ScaledOperator<'_, T> {
    fn rows(&self) -> usize {
        self.base.k()
    }
    fn cols(&self) -> usize {
        self.base.n()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Scaled
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        self.base.matrix().forward_into(x, y);
        for (v, &s) in y.iter_mut().zip(&self.row_scale) {
            *v *= s;
        }
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        let sw: Vec<T> = w.iter().zip(&self.row_scale).map(|(&a, &s)| a * s).collect();
        self.base.matrix().adjoint_into(&sw, y);
    }
    fn frobenius_sq_exact(&self) -> Option<T> {
        let l = self.base.matrix();
        Some(
            (0..self.base.k())
                .map(|i| {
                    let (_, v) = l.row(i);
                    self.weights[i] * v.iter().map(|&x| x * x).sum::<T>()
                })
                .sum(),
        )
    }
}

/// `x = L_θ† ξ`, the solution of `(L_θᵀ L_θ) x = L_θᵀ ξ`.
pub fn pinv_apply<T: Scalar>(lt: &ScaledOperator<'_, T>, xi: &[T]) -> Result<Vec<T>> {
    check_len("pinv_apply", lt.rows(), xi.len())?;
    let mut r = vec![T::zero(); lt.cols()];
    lt.adjoint_into(xi, &mut r);
    Ok(lt.gram_solve(&r))
}

/// `ζ = (L_θ†)ᵀ y = L_θ (L_θᵀ L_θ)^{-1} y`.
pub fn pinv_adjoint_apply<T: Scalar>(lt: &ScaledOperator<'_, T>, y: &[T]) -> Result<Vec<T>> {
    check_len("pinv_adjoint_apply", lt.cols(), y.len())?;
    let z = lt.gram_solve(y);
    let mut zeta = vec![T::zero(); lt.rows()];
    lt.forward_into(&z, &mut zeta);
    Ok(zeta)
}

/// `L_θ†` as an `n×k` operator.
#[derive(Clone, Copy, Debug)]
pub struct PseudoInverse<'s, 'a, T: Scalar> {
    op: &'s ScaledOperator<'a, T>,
}

impl<T: Scalar> LinearOperator<T> for PseudoInverse<'_, '_, T> {
    fn rows(&self) -> usize {
        self.op.cols()
    }
    fn cols(&self) -> usize {
        self.op.rows()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::MatrixFree
    }
    fn forward_into(&self, xi: &[T], y: &mut [T]) {
        let mut r = vec![T::zero(); self.op.cols()];
        self.op.adjoint_into(xi, &mut r);
        y.copy_from_slice(&self.op.gram_solve(&r));
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        let z = self.op.gram_solve(w);
        self.op.forward_into(&z, y);
    }
}
