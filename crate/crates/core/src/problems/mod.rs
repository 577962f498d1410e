//! Problem containers, the two experiment generators, and SNR utilities.

mod numdiff;
mod tomo;

pub use numdiff::{make_numdiff, numdiff_derivative, numdiff_function};
pub use tomo::{make_tomo, Phantom, TomoConfig, TomoGeometry};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm_sq;
use crate::operators::{LinearOperator, NoiseModel, SharedOperator};
use crate::regularizer::LKind;
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetadata {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub seed: Option<u64>,
    /// Generator-specific values (geometry, noise level, dropped rays, ...).
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// A linear inverse problem `b = A x + ε`.
#[derive(Clone)]
pub struct Problem<T: Scalar> {
    pub a: SharedOperator<T>,
    pub b: Vec<T>,
    /// Noiseless data, when known.
    pub b0: Option<Vec<T>>,
    pub noise: NoiseModel<T>,
    /// Effective noise standard deviation.
    pub sigma: T,
    pub x_true: Option<Vec<T>>,
    /// Regularization operator suggested by the generator.
    pub default_l: Option<LKind>,
    pub metadata: ProblemMetadata,
}

impl<T: Scalar> std::fmt::Debug for Problem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("rows", &self.a.rows())
            .field("cols", &self.a.cols())
            .field("sigma", &self.sigma)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> Problem<T> {
    /// Problem with iid noise of standard deviation `sigma`.
    pub fn new(a: impl LinearOperator<T> + 'static, b: Vec<T>, sigma: T) -> Result<Self> {
        Self::with_noise(Arc::new(a), b, NoiseModel::iid(sigma))
    }

    pub fn with_noise(a: SharedOperator<T>, b: Vec<T>, noise: NoiseModel<T>) -> Result<Self> {
        check_len("Problem", a.rows(), b.len())?;
        noise.validate(b.len())?;
        let sigma = effective_sigma(&noise, b.len());
        let metadata = ProblemMetadata {
            name: "custom".into(),
            rows: a.rows(),
            cols: a.cols(),
            ..Default::default()
        };
        Ok(Problem {
            a,
            b,
            b0: None,
            noise,
            sigma,
            x_true: None,
            default_l: None,
            metadata,
        })
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("Problem", self.a.rows(), self.b.len())?;
        self.noise.validate(self.b.len())?;
        if let Some(x) = &self.x_true {
            check_len("Problem x_true", self.a.cols(), x.len())?;
        }
        if let Some(b0) = &self.b0 {
            check_len("Problem b0", self.a.rows(), b0.len())?;
        }
        Ok(())
    }
}

pub(crate) fn effective_sigma<T: Scalar>(noise: &NoiseModel<T>, m: usize) -> T {
    match noise {
        NoiseModel::IidScalar { sigma } => *sigma,
        NoiseModel::Diagonal { variances } => (variances.iter().copied().sum::<T>() / T::from_usize_lossy(m)).sqrt(),
        NoiseModel::Full { covariance } => {
            ((0..m).map(|i| covariance.get(i, i)).sum::<T>() / T::from_usize_lossy(m)).sqrt()
        }
    }
}

/// `SNR = ‖b‖² / (m σ²)`.
pub fn snr_estimate<T: Scalar>(b: &[T], m: usize, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be positive, got {sigma}"),
        });
    }
    Ok(norm_sq(b) / (T::from_usize_lossy(m) * sigma * sigma))
}

/// `SNR = (β ϑ ‖A‖_F² + m σ²) / (m σ²)`.
pub fn snr_prior<T: Scalar>(frob_sq: T, m: usize, sigma: T, beta: T, vartheta: T) -> Result<T> {
    if !(sigma > T::zero()) || m == 0 {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("needs sigma > 0 and m > 0, got {sigma} and {m}"),
        });
    }
    let noise = T::from_usize_lossy(m) * sigma * sigma;
    Ok((beta * vartheta * frob_sq + noise) / noise)
}
