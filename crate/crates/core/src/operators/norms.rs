use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::norm_sq;
use crate::operators::LinearOperator;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrobeniusOptions {
    /// Rademacher probes for the matrix-free estimate.
    pub probes: usize,
    pub seed: u64,
    /// Use the estimator even when exact entries are available.
    pub force_estimate: bool,
}

impl Default for FrobeniusOptions {
    fn default() -> Self {
        FrobeniusOptions {
            probes: 100,
            seed: 0x5eed,
            force_estimate: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FrobeniusEstimate<T: Scalar> {
    pub value: T,
    /// Zero for the exact path.
    pub std_error: T,
    pub exact: bool,
}

/// `‖A‖_F²`: exact entry sum when the operator stores its entries, otherwise a
/// Hutchinson estimate `E‖A g‖²` over Rademacher vectors `g`.
pub fn frobenius_norm_sq<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    opts: &FrobeniusOptions,
) -> FrobeniusEstimate<T> {
    if !opts.force_estimate {
        if let Some(value) = op.frobenius_sq_exact() {
            return FrobeniusEstimate {
                value,
                std_error: T::zero(),
                exact: true,
            };
        }
    }
    let probes = opts.probes.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut g = vec![T::zero(); op.cols()];
    let mut ag = vec![T::zero(); op.rows()];
    let mut samples = Vec::with_capacity(probes);
    for _ in 0..probes {
        for gi in g.iter_mut() {
            *gi = if rng.random::<bool>() { T::one() } else { -T::one() };
        }
        op.forward_into(&g, &mut ag);
        samples.push(norm_sq(&ag));
    }
    let p = T::from_usize_lossy(probes);
    let mean = samples.iter().copied().sum::<T>() / p;
    let var = samples.iter().map(|&s| (s - mean) * (s - mean)).sum::<T>() / (p - T::one());
    FrobeniusEstimate {
        value: mean,
        std_error: (var / p).sqrt(),
        exact: false,
    }
}

/// `‖A e_j‖` for every column `j`; `cols` forward applications for matrix-free kinds.
pub fn column_norms<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O) -> Vec<T> {
    if let Some(c) = op.column_norms_exact() {
        return c;
    }
    let n = op.cols();
    let mut e = vec![T::zero(); n];
    let mut col = vec![T::zero(); op.rows()];
    (0..n)
        .map(|j| {
            e[j] = T::one();
            op.forward_into(&e, &mut col);
            e[j] = T::zero();
            crate::linalg::norm(&col)
        })
        .collect()
}
