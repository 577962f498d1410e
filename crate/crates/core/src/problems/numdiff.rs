//! Numerical differentiation of `u(t) = 1 + erf(6t − 3)` on `[0, 1]`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::operators::{DenseMatrix, NoiseModel};
use crate::problems::{Problem, ProblemMetadata};
use crate::regularizer::LKind;
use crate::scalar::Scalar;

/// `u(t) = 1 + erf(6t − 3)`.
pub fn numdiff_function(t: f64) -> f64 {
    1.0 + erf(6.0 * t - 3.0)
}

/// `u′(t) = (12/√π) exp(−(6t − 3)²)`.
pub fn numdiff_derivative(t: f64) -> f64 {
    12.0 / std::f64::consts::PI.sqrt() * (-(6.0 * t - 3.0).powi(2)).exp()
}

/// `A = (1/n)·tril(ones)`, `b0_j = u(j/n)`, `x_true_j = u′(j/n)` for `j = 1..n`, and
/// `b = b0 + σ w` with `σ² = σ_rel² ‖b0‖² / n`.
///
/// `sigma_rel = 0` returns noiseless data; that problem cannot be whitened.
pub fn make_numdiff<T: Scalar>(n: usize, sigma_rel: f64, seed: u64) -> Result<Problem<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("needs n >= 2, got {n}"),
        });
    }
    if !(0.0..1.0).contains(&sigma_rel) {
        return Err(Error::InvalidParameter {
            name: "sigma_rel",
            reason: format!("must lie in [0, 1), got {sigma_rel}"),
        });
    }
    let h = 1.0 / n as f64;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            a.set(i, j, T::lit(h));
        }
    }
    let b0: Vec<f64> = (1..=n).map(|j| numdiff_function(j as f64 * h)).collect();
    let x_true: Vec<T> = (1..=n).map(|j| T::lit(numdiff_derivative(j as f64 * h))).collect();
    let sigma = sigma_rel * (norm_sq(&b0) / n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<T> = b0
        .iter()
        .map(|&v| {
            let w: f64 = StandardNormal.sample(&mut rng);
            T::lit(v + sigma * w)
        })
        .collect();
    let mut extra = std::collections::BTreeMap::new();
    extra.insert("sigma_rel".into(), serde_json::json!(sigma_rel));
    Ok(Problem {
        a: Arc::new(a),
        b,
        b0: Some(b0.into_iter().map(T::lit).collect()),
        noise: NoiseModel::iid(T::lit(sigma)),
        sigma: T::lit(sigma),
        x_true: Some(x_true),
        default_l: Some(LKind::Diff2 { n }),
        metadata: ProblemMetadata {
            name: "numdiff".into(),
            rows: n,
            cols: n,
            seed: Some(seed),
            extra,
        },
    })
}
