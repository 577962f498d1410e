//! Sparsifying operators `L`, row partitions, the θ-scaled operator
//! `L_θ = D_θ^{-1/2} L`, and its pseudoinverse applied without forming a QR
//! factorization.

mod gram;
mod qr;
mod scaled;

pub use gram::{GramSolver, GramStrategy};
pub use qr::{pinv_via_qr, QrPseudoInverse, DEFAULT_QR_CAP};
pub use scaled::{pinv_adjoint_apply, pinv_apply, scale_by_theta, PseudoInverse, ScaledOperator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::SparseMatrix;
use crate::scalar::Scalar;

/// Disjoint groups of row indices covering `0..k`.
///
/// Serialized as a JSON list of index arrays with 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Partition {
    /// One group per row.
    pub fn componentwise(k: usize) -> Self {
        Partition {
            groups: (0..k).map(|i| vec![i]).collect(),
            group_of: (0..k).collect(),
        }
    }

    /// A single group holding every row.
    pub fn trivial(k: usize) -> Self {
        Partition {
            groups: vec![(0..k).collect()],
            group_of: vec![0; k],
        }
    }

    /// Validates zero-based `groups` as a partition of `0..k`.
    pub fn from_groups(groups: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        let mut group_of = vec![usize::MAX; k];
        for (g, idx) in groups.iter().enumerate() {
            if idx.is_empty() {
                return Err(invalid(format!("group {g} is empty")));
            }
            for &i in idx {
                if i >= k {
                    return Err(invalid(format!("index {i} in group {g} is out of range for {k} rows")));
                }
                if group_of[i] != usize::MAX {
                    return Err(invalid(format!("row {i} appears in groups {} and {g}", group_of[i])));
                }
                group_of[i] = g;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(invalid(format!("row {i} belongs to no group")));
        }
        Ok(Partition { groups, group_of })
    }

    /// Number of rows `k` covered.
    pub fn rows(&self) -> usize {
        self.group_of.len()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, row: usize) -> usize {
        self.group_of[row]
    }

    /// `k_ℓ` for every group.
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Expands one value per group to one value per row.
    pub fn expand<T: Copy>(&self, per_group: &[T]) -> Vec<T> {
        self.group_of.iter().map(|&g| per_group[g]).collect()
    }

    /// `‖z_ℓ‖²` for every group.
    pub fn group_norms_sq<T: Scalar>(&self, z: &[T]) -> Vec<T> {
        self.groups.iter().map(|g| g.iter().map(|&i| z[i] * z[i]).sum()).collect()
    }
}

fn invalid(reason: String) -> Error {
    Error::InvalidParameter {
        name: "partition",
        reason,
    }
}

impl TryFrom<Vec<Vec<usize>>> for Partition {
    type Error = Error;

    fn try_from(one_based: Vec<Vec<usize>>) -> Result<Self> {
        let k = one_based.iter().map(Vec::len).sum();
        let mut groups = Vec::with_capacity(one_based.len());
        for g in one_based {
            let mut zero = Vec::with_capacity(g.len());
            for i in g {
                if i == 0 {
                    return Err(invalid("indices are 1-based; found 0".into()));
                }
                zero.push(i - 1);
            }
            groups.push(zero);
        }
        Partition::from_groups(groups, k)
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.groups.into_iter().map(|g| g.into_iter().map(|i| i + 1).collect()).collect()
    }
}

/// Which sparsifying operator to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LKind {
    Identity { n: usize },
    /// Forward differences plus an anchor row on the first sample.
    Diff1 { n: usize },
    /// The `n×n` tridiagonal matrix with `−2` on the diagonal and `1` beside it.
    Diff2 { n: usize },
    /// Edge increments of an `nx × ny` node grid whose boundary nodes are fixed at zero.
    GridIncidence { nx: usize, ny: usize },
}

/// `L` together with its row partition and Gram-matrix solver.
#[derive(Clone, Debug)]
pub struct SparsifyingOperator<T: Scalar> {
    l: SparseMatrix<T>,
    partition: Partition,
    gram: GramSolver<T>,
}

impl<T: Scalar> SparsifyingOperator<T> {
    /// Checks `k ≥ n` and full column rank, and prepares the Gram solver.
    pub fn new(l: SparseMatrix<T>, partition: Partition, strategy: GramStrategy) -> Result<Self> {
        use crate::operators::LinearOperator;
        let (k, n) = (l.rows(), l.cols());
        if k < n {
            return Err(Error::RankDeficient(format!("L is {k}x{n}; needs at least as many rows as columns")));
        }
        if partition.rows() != k {
            return Err(Error::DimensionMismatch {
                context: "partition",
                expected: k,
                actual: partition.rows(),
            });
        }
        let gram = GramSolver::new(&l, strategy)?;
        Ok(SparsifyingOperator { l, partition, gram })
    }

    /// Replaces the partition, keeping `L` and its symbolic factorization.
    pub fn with_partition(mut self, partition: Partition) -> Result<Self> {
        if partition.rows() != self.k() {
            return Err(Error::DimensionMismatch {
                context: "partition",
                expected: self.k(),
                actual: partition.rows(),
            });
        }
        self.partition = partition;
        Ok(self)
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.l
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn gram(&self) -> &GramSolver<T> {
        &self.gram
    }

    pub fn k(&self) -> usize {
        crate::operators::LinearOperator::rows(&self.l)
    }

    pub fn n(&self) -> usize {
        crate::operators::LinearOperator::cols(&self.l)
    }
}

/// Builds `L` with a componentwise partition.
pub fn build_l<T: Scalar>(kind: LKind) -> Result<SparsifyingOperator<T>> {
    let l = build_matrix(kind)?;
    let k = crate::operators::LinearOperator::rows(&l);
    SparsifyingOperator::new(l, Partition::componentwise(k), GramStrategy::default())
}

/// The bare sparse matrix of [`build_l`].
pub fn build_matrix<T: Scalar>(kind: LKind) -> Result<SparseMatrix<T>> {
    let one = T::one();
    let need_two = |n: usize| {
        if n < 2 {
            Err(Error::InvalidParameter {
                name: "n",
                reason: format!("difference operators need n >= 2, got {n}"),
            })
        } else {
            Ok(())
        }
    };
    match kind {
        LKind::Identity { n } => {
            if n == 0 {
                return Err(Error::InvalidParameter {
                    name: "n",
                    reason: "must be positive".into(),
                });
            }
            Ok(SparseMatrix::identity(n))
        }
        LKind::Diff1 { n } => {
            need_two(n)?;
            let mut t = Vec::with_capacity(2 * n);
            for i in 0..n - 1 {
                t.push((i, i, -one));
                t.push((i, i + 1, one));
            }
            t.push((n - 1, 0, one));
            SparseMatrix::from_triplets(n, n, &t)
        }
        LKind::Diff2 { n } => {
            need_two(n)?;
            let mut t = Vec::with_capacity(3 * n);
            for i in 0..n {
                if i > 0 {
                    t.push((i, i - 1, one));
                }
                t.push((i, i, -(one + one)));
                if i + 1 < n {
                    t.push((i, i + 1, one));
                }
            }
            SparseMatrix::from_triplets(n, n, &t)
        }
        LKind::GridIncidence { nx, ny } => {
            if nx < 3 || ny < 3 {
                return Err(Error::InvalidParameter {
                    name: "grid",
                    reason: format!("a {nx}x{ny} grid has no interior nodes"),
                });
            }
            let (mx, my) = (nx - 2, ny - 2);
            let interior = |ix: usize, iy: usize| -> Option<usize> {
                (ix >= 1 && ix <= mx && iy >= 1 && iy <= my).then(|| (iy - 1) * mx + (ix - 1))
            };
            let mut t = Vec::new();
            let mut row = 0;
            let mut edge = |a: Option<usize>, b: Option<usize>, t: &mut Vec<(usize, usize, T)>| {
                if a.is_none() && b.is_none() {
                    return;
                }
                if let Some(a) = a {
                    t.push((row, a, -one));
                }
                if let Some(b) = b {
                    t.push((row, b, one));
                }
                row += 1;
            };
            for iy in 1..=my {
                for ix in 0..nx - 1 {
                    edge(interior(ix, iy), interior(ix + 1, iy), &mut t);
                }
            }
            for iy in 0..ny - 1 {
                for ix in 1..=mx {
                    edge(interior(ix, iy), interior(ix, iy + 1), &mut t);
                }
            }
            SparseMatrix::from_triplets(row, mx * my, &t)
        }
    }
}
