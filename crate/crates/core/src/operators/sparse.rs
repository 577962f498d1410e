
use crate::error::{Error, Result};
use crate::operators::{DenseMatrix, LinearOperator, OperatorKind};
use crate::scalar::Scalar;

/// Sparse matrix assembled from `(row, col, value)` triplets.
///
/// Duplicates are summed. Both a row-compressed and a column-compressed copy are
/// kept so that forward and adjoint products are gather loops.
#[derive(Clone, Debug)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<T>,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<T>,
}

fn compress<T: Scalar>(
    outer: usize,
    triplets: &mut [(usize, usize, T)],
) -> (Vec<usize>, Vec<usize>, Vec<T>) {
    triplets.sort_unstable_by_key(|&(a, b, _)| (a, b));
    let mut ptr = vec![0usize; outer + 1];
    let mut idx = Vec::with_capacity(triplets.len());
    let mut val: Vec<T> = Vec::with_capacity(triplets.len());
    let mut last: Option<(usize, usize)> = None;
    for &(a, b, v) in triplets.iter() {
        if last == Some((a, b)) {
            *val.last_mut().unwrap() += v;
        } else {
            idx.push(b);
            val.push(v);
            ptr[a + 1] += 1;
            last = Some((a, b));
        }
    }
    for i in 0..outer {
        ptr[i + 1] += ptr[i];
    }
    (ptr, idx, val)
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidParameter {
                    name: "triplet",
                    reason: format!("entry ({i}, {j}) outside a {rows}x{cols} matrix"),
                });
            }
        }
        let mut by_row: Vec<_> = triplets.to_vec();
        let (row_ptr, row_idx, row_val) = compress(rows, &mut by_row);
        let mut by_col: Vec<_> = triplets.iter().map(|&(i, j, v)| (j, i, v)).collect();
        let (col_ptr, col_idx, col_val) = compress(cols, &mut by_col);
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            row_idx,
            row_val,
            col_ptr,
            col_idx,
            col_val,
        })
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, T::one())).collect();
        Self::from_triplets(n, n, &t).expect("identity triplets are in range")
    }

    pub fn nnz(&self) -> usize {
        self.row_val.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.row_idx[r.clone()], &self.row_val[r])
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.col_idx[r.clone()], &self.col_val[r])
    }

    /// Triplets in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            out.extend(idx.iter().zip(val).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d.set(i, j, v);
        }
        d
    }

    /// Same sparsity with row `i` multiplied by `s[i]`.
    pub fn scale_rows(&self, s: &[T]) -> Self {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (i, j, v * s[i]))
            .collect();
        Self::from_triplets(self.rows, self.cols, &t).expect("same shape")
    }
}

impl<T: Scalar> LinearOperator<T> for SparseMatrix<T> {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::SparseTriplet
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (idx, val) = self.row(i);
            *yi = idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        for (j, yj) in y.iter_mut().enumerate() {
            let (idx, val) = self.col(j);
            *yj = idx.iter().zip(val).map(|(&i, &v)| v * w[i]).sum();
        }
    }

    fn frobenius_sq_exact(&self) -> Option<T> {
        Some(self.row_val.iter().map(|&v| v * v).sum())
    }

    fn column_norms_exact(&self) -> Option<Vec<T>> {
        Some(
            (0..self.cols)
                .map(|j| self.col(j).1.iter().map(|&v| v * v).sum::<T>().sqrt())
                .collect(),
        )
    }
}
