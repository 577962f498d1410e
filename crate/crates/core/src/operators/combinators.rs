use crate::operators::{LinearOperator, OperatorKind};
use crate::scalar::Scalar;

/// `I_n`
#[derive(Clone, Copy, Debug)]
pub struct Identity {
    n: usize,
}

impl Identity {
    pub fn new(n: usize) -> Self {
        Identity { n }
    }
}

impl<T: Scalar> LinearOperator<T> for Identity {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Identity
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        y.copy_from_slice(w);
    }
    fn frobenius_sq_exact(&self) -> Option<T> {
        Some(T::from_usize_lossy(self.n))
    }
    fn column_norms_exact(&self) -> Option<Vec<T>> {
        Some(vec![T::one(); self.n])
    }
}

/// The zero map `R^cols → R^rows`.
#[derive(Clone, Copy, Debug)]
pub struct ZeroOperator {
    rows: usize,
    cols: usize,
}

impl ZeroOperator {
    pub fn new(rows: usize, cols: usize) -> Self {
        ZeroOperator { rows, cols }
    }
}

impl<T: Scalar> LinearOperator<T> for ZeroOperator {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Zero
    }
    fn forward_into(&self, _x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
    }
    fn adjoint_into(&self, _w: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
    }
    fn frobenius_sq_exact(&self) -> Option<T> {
        Some(T::zero())
    }
    fn column_norms_exact(&self) -> Option<Vec<T>> {
        Some(vec![T::zero(); self.cols])
    }
}

/// `outer ∘ inner`
#[derive(Clone, Debug)]
pub struct Composed<A, B> {
    outer: A,
    inner: B,
}

impl<A, B> Composed<A, B> {
    /// Panics when the inner range does not match the outer domain.
    pub fn new<T: Scalar>(outer: A, inner: B) -> Self
    where
        A: LinearOperator<T>,
        B: LinearOperator<T>,
    {
        assert_eq!(
            outer.cols(),
            inner.rows(),
            "composition of a {}x{} after a {}x{} operator",
            outer.rows(),
            outer.cols(),
            inner.rows(),
            inner.cols()
        );
        Composed { outer, inner }
    }

    pub fn outer(&self) -> &A {
        &self.outer
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<T: Scalar, A: LinearOperator<T>, B: LinearOperator<T>> LinearOperator<T> for Composed<A, B> {
    fn rows(&self) -> usize {
        self.outer.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Composed
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        let mut mid = vec![T::zero(); self.inner.rows()];
        self.inner.forward_into(x, &mut mid);
        self.outer.forward_into(&mid, y);
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        let mut mid = vec![T::zero(); self.outer.cols()];
        self.outer.adjoint_into(w, &mut mid);
        self.inner.adjoint_into(&mid, y);
    }
}

/// `alpha · A`
#[derive(Clone, Debug)]
pub struct Scaled<T, A> {
    alpha: T,
    op: A,
}

impl<T: Scalar, A: LinearOperator<T>> Scaled<T, A> {
    pub fn new(alpha: T, op: A) -> Self {
        Scaled { alpha, op }
    }
}

impl<T: Scalar, A: LinearOperator<T>> LinearOperator<T> for Scaled<T, A> {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Scaled
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        self.op.forward_into(x, y);
        crate::linalg::scale(self.alpha, y);
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        self.op.adjoint_into(w, y);
        crate::linalg::scale(self.alpha, y);
    }
    fn frobenius_sq_exact(&self) -> Option<T> {
        self.op.frobenius_sq_exact().map(|f| f * self.alpha * self.alpha)
    }
    fn column_norms_exact(&self) -> Option<Vec<T>> {
        self.op
            .column_norms_exact()
            .map(|c| c.into_iter().map(|v| v * self.alpha.abs()).collect())
    }
}

/// `Aᵀ` as an operator in its own right.
#[derive(Clone, Debug)]
pub struct Adjoint<A> {
    op: A,
}

impl<A> Adjoint<A> {
    pub fn new(op: A) -> Self {
        Adjoint { op }
    }
}

impl<T: Scalar, A: LinearOperator<T>> LinearOperator<T> for Adjoint<A> {
    fn rows(&self) -> usize {
        self.op.cols()
    }
    fn cols(&self) -> usize {
        self.op.rows()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Adjoint
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        self.op.adjoint_into(x, y)
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        self.op.forward_into(w, y)
    }
    fn frobenius_sq_exact(&self) -> Option<T> {
        self.op.frobenius_sq_exact()
    }
}

/// Operator defined by a pair of closures.
pub struct FnOperator<F, G> {
    rows: usize,
    cols: usize,
    forward: F,
    adjoint: G,
}

impl<F, G> FnOperator<F, G> {
    pub fn new(rows: usize, cols: usize, forward: F, adjoint: G) -> Self {
        FnOperator {
            rows,
            cols,
            forward,
            adjoint,
        }
    }
}

impl<T, F, G> LinearOperator<T> for FnOperator<F, G>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]) + Send + Sync,
    G: Fn(&[T], &mut [T]) + Send + Sync,
{
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::MatrixFree
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        (self.forward)(x, y)
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        (self.adjoint)(w, y)
    }
}
