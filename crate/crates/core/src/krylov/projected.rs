use crate::linalg::givens;
use crate::scalar::Scalar;

/// Incremental Givens QR of the shifted `(ℓ+1)×ℓ` tridiagonal `T_{ℓ+1,ℓ} + I_{ℓ+1,ℓ}`.
///
/// Column `j` carries `γ_j` above the diagonal, `α_j + 1` on it and `γ_{j+1}`
/// below it. After each column the rotated right-hand side gives the
/// least-squares residual in O(1) work.
#[derive(Clone, Debug, Default)]
pub struct ProjectedLeastSquares<T> {
    rotations: Vec<(T, T)>,
    /// `[r_{j-2,j}, r_{j-1,j}, r_{j,j}]`
    r: Vec<[T; 3]>,
    g: Vec<T>,
}

impl<T: Scalar> ProjectedLeastSquares<T> {
    pub fn new(rhs_norm: T) -> Self {
        ProjectedLeastSquares {
            rotations: Vec::new(),
            r: Vec::new(),
            g: vec![rhs_norm],
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Adds column `j = len()` of `T + I` and returns the new residual norm.
    pub fn push(&mut self, gamma_above: T, alpha: T, gamma_below: T) -> T {
        let j = self.r.len();
        let mut col = [T::zero(), gamma_above, alpha + T::one(), gamma_below];
        if j >= 2 {
            let (c, s) = self.rotations[j - 2];
            let (a, b) = (col[0], col[1]);
            col[0] = c * a + s * b;
            col[1] = -s * a + c * b;
        }
        if j >= 1 {
            let (c, s) = self.rotations[j - 1];
            let (a, b) = (col[1], col[2]);
            col[1] = c * a + s * b;
            col[2] = -s * a + c * b;
        }
        let (c, s, r) = givens(col[2], col[3]);
        self.rotations.push((c, s));
        self.r.push([col[0], col[1], r]);
        let gj = self.g[j];
        self.g[j] = c * gj;
        self.g.push(-s * gj);
        self.residual()
    }

    pub fn residual(&self) -> T {
        self.g.last().copied().unwrap_or_else(T::zero).abs()
    }

    /// Coefficients `z` of the projected minimizer.
    pub fn solve(&self) -> Vec<T> {
        let l = self.r.len();
        let mut z = vec![T::zero(); l];
        for i in (0..l).rev() {
            let mut s = self.g[i];
            if i + 1 < l {
                s -= self.r[i + 1][1] * z[i + 1];
            }
            if i + 2 < l {
                s -= self.r[i + 2][0] * z[i + 2];
            }
            z[i] = s / self.r[i][2];
        }
        z
    }
}
