//! Matrix-free linear operators.
//!
//! Every solver in the crate reaches matrices only through [`LinearOperator`]:
//! a forward map `x ↦ A x`, its adjoint `w ↦ Aᵀ w`, and the dimensions. Dense and
//! sparse storage, compositions, scalings and noise whitening all implement the
//! same contract, so a forward model can be anything that can multiply a vector.

mod combinators;
mod dense;
mod noise;
mod norms;
mod sparse;

pub use combinators::{Adjoint, Composed, FnOperator, Identity, Scaled, ZeroOperator};
pub use dense::DenseMatrix;
pub use noise::{whiten, NoiseModel, Whitened, Whitener};
pub use norms::{column_norms, frobenius_norm_sq, FrobeniusEstimate, FrobeniusOptions};
pub use sparse::SparseMatrix;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::scalar::Scalar;

/// Realization tag of an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Identity,
    Zero,
    Dense,
    SparseTriplet,
    Composed,
    Scaled,
    Whitened,
    Adjoint,
    MatrixFree,
}

/// A linear map `R^cols → R^rows` known through its action and that of its adjoint.
///
/// Implementations must be immutable after construction; the `*_into` methods
/// overwrite their output buffer and may assume correctly sized slices.
pub trait LinearOperator<T: Scalar>: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn kind(&self) -> OperatorKind;

    /// `y ← A x`
    fn forward_into(&self, x: &[T], y: &mut [T]);

    /// `y ← Aᵀ w`
    fn adjoint_into(&self, w: &[T], y: &mut [T]);

    /// Exact `‖A‖_F²` when the entries are stored.
    fn frobenius_sq_exact(&self) -> Option<T> {
        None
    }

    /// Exact column norms when the entries are stored.
    fn column_norms_exact(&self) -> Option<Vec<T>> {
        None
    }

    /// Checked forward application.
    fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("apply", self.cols(), v.len())?;
        let mut y = vec![T::zero(); self.rows()];
        self.forward_into(v, &mut y);
        Ok(y)
    }

    /// Checked adjoint application.
    fn apply_adjoint(&self, w: &[T]) -> Result<Vec<T>> {
        check_len("apply_adjoint", self.rows(), w.len())?;
        let mut y = vec![T::zero(); self.cols()];
        self.adjoint_into(w, &mut y);
        Ok(y)
    }
}

/// Free-function form of [`LinearOperator::apply`].
pub fn apply<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, v: &[T]) -> Result<Vec<T>> {
    op.apply(v)
}

/// Free-function form of [`LinearOperator::apply_adjoint`].
pub fn apply_adjoint<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, w: &[T]) -> Result<Vec<T>> {
    op.apply_adjoint(w)
}

/// Dense copy of any operator, built column by column from forward applications.
pub fn materialize<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O) -> DenseMatrix<T> {
    let (m, n) = (op.rows(), op.cols());
    let mut out = DenseMatrix::zeros(m, n);
    let mut e = vec![T::zero(); n];
    let mut col = vec![T::zero(); m];
    for j in 0..n {
        e[j] = T::one();
        op.forward_into(&e, &mut col);
        e[j] = T::zero();
        for i in 0..m {
            out.set(i, j, col[i]);
        }
    }
    out
}

macro_rules! forward_impl {
    ($($ptr:ty),*) => {$(
        impl<T: Scalar, O: LinearOperator<T> + ?Sized> LinearOperator<T> for $ptr {
            fn rows(&self) -> usize { (**self).rows() }
            fn cols(&self) -> usize { (**self).cols() }
            fn kind(&self) -> OperatorKind { (**self).kind() }
            fn forward_into(&self, x: &[T], y: &mut [T]) { (**self).forward_into(x, y) }
            fn adjoint_into(&self, w: &[T], y: &mut [T]) { (**self).adjoint_into(w, y) }
            fn frobenius_sq_exact(&self) -> Option<T> { (**self).frobenius_sq_exact() }
            fn column_norms_exact(&self) -> Option<Vec<T>> { (**self).column_norms_exact() }
        }
    )*};
}

forward_impl!(&O, Box<O>, Arc<O>);

/// Shared, type-erased operator handle.
pub type SharedOperator<T> = Arc<dyn LinearOperator<T>>;
