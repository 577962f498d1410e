use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::Dense;
use crate::operators::{DenseMatrix, LinearOperator, OperatorKind};
use crate::scalar::Scalar;

/// Additive Gaussian noise description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
#[serde(bound = "")]
pub enum NoiseModel<T: Scalar> {
    /// `ε ~ N(0, σ² I)`
    IidScalar { sigma: T },
    Diagonal { variances: Vec<T> },
    Full { covariance: DenseMatrix<T> },
}

impl<T: Scalar> NoiseModel<T> {
    pub fn iid(sigma: T) -> Self {
        NoiseModel::IidScalar { sigma }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            NoiseModel::IidScalar { sigma } => {
                if !(*sigma > T::zero()) {
                    return Err(Error::InvalidParameter {
                        name: "sigma",
                        reason: format!("must be positive, got {sigma}"),
                    });
                }
            }
            NoiseModel::Diagonal { variances } => {
                check_len("NoiseModel::Diagonal", m, variances.len())?;
                if let Some((i, v)) = variances.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
                    return Err(Error::InvalidParameter {
                        name: "variances",
                        reason: format!("entry {i} is {v}, must be positive"),
                    });
                }
            }
            NoiseModel::Full { covariance } => {
                check_len("NoiseModel::Full", m, covariance.rows())?;
                check_len("NoiseModel::Full", m, covariance.cols())?;
                let tol = T::lit(1e-12);
                for i in 0..m {
                    for j in 0..i {
                        let (a, b) = (covariance.get(i, j), covariance.get(j, i));
                        if (a - b).abs() > tol * (T::one() + a.abs().max(b.abs())) {
                            return Err(Error::InvalidParameter {
                                name: "covariance",
                                reason: format!("not symmetric at ({i}, {j})"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Noise whitening factor `S` with `SᵀS = Σ⁻¹`.
#[derive(Clone, Debug)]
pub enum Whitener<T> {
    Iid { inv_sigma: T },
    Diagonal { inv_std: Vec<T> },
    /// `S = C⁻¹` for the Cholesky factor `Σ = C Cᵀ`.
    Full { chol: Dense<T> },
}

impl<T: Scalar> Whitener<T> {
    pub fn from_noise(noise: &NoiseModel<T>, m: usize) -> Result<Self> {
        noise.validate(m)?;
        Ok(match noise {
            NoiseModel::IidScalar { sigma } => Whitener::Iid {
                inv_sigma: T::one() / *sigma,
            },
            NoiseModel::Diagonal { variances } => Whitener::Diagonal {
                inv_std: variances.iter().map(|v| T::one() / v.sqrt()).collect(),
            },
            NoiseModel::Full { covariance } => Whitener::Full {
                chol: covariance.as_linalg().cholesky()?,
            },
        })
    }

    /// `S v`
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        match self {
            Whitener::Iid { inv_sigma } => v.iter().map(|&x| x * *inv_sigma).collect(),
            Whitener::Diagonal { inv_std } => v.iter().zip(inv_std).map(|(&x, &s)| x * s).collect(),
            Whitener::Full { chol } => chol.solve_lower(v),
        }
    }

    /// `Sᵀ v`
    pub fn apply_transpose(&self, v: &[T]) -> Vec<T> {
        match self {
            Whitener::Full { chol } => chol.solve_lower_transpose(v),
            _ => self.apply(v),
        }
    }
}

/// `S · A`
#[derive(Clone, Debug)]
pub struct Whitened<A, T> {
    op: A,
    whitener: Whitener<T>,
}

impl<A, T: Scalar> Whitened<A, T> {
    pub fn whitener(&self) -> &Whitener<T> {
        &self.whitener
    }

    pub fn inner(&self) -> &A {
        &self.op
    }
}

impl<T: Scalar, A: LinearOperator<T>> LinearOperator<T> for Whitened<A, T> {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn kind(&self) -> OperatorKind {
        OperatorKind::Whitened
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        let mut ax = vec![T::zero(); self.op.rows()];
        self.op.forward_into(x, &mut ax);
        y.copy_from_slice(&self.whitener.apply(&ax));
    }
    fn adjoint_into(&self, w: &[T], y: &mut [T]) {
        let stw = self.whitener.apply_transpose(w);
        self.op.adjoint_into(&stw, y);
    }
    fn frobenius_sq_exact(&self) -> Option<T> {
        match &self.whitener {
            Whitener::Iid { inv_sigma } => self
                .op
                .frobenius_sq_exact()
                .map(|f| f * *inv_sigma * *inv_sigma),
            _ => None,
        }
    }
}

/// Whitens a linear model `b = A x + ε`, returning `(S A, S b, σ_eff)`.
///
/// `σ_eff` is σ itself for iid noise and `sqrt(trace Σ / m)` otherwise.
pub fn whiten<T: Scalar, A: LinearOperator<T>>(
    a: A,
    b: &[T],
    noise: &NoiseModel<T>,
) -> Result<(Whitened<A, T>, Vec<T>, T)> {
    let m = a.rows();
    check_len("whiten", m, b.len())?;
    let whitener = Whitener::from_noise(noise, m)?;
    let sigma_eff = match noise {
        NoiseModel::IidScalar { sigma } => *sigma,
        NoiseModel::Diagonal { variances } => {
            (variances.iter().copied().sum::<T>() / T::from_usize_lossy(m)).sqrt()
        }
        NoiseModel::Full { covariance } => {
            ((0..m).map(|i| covariance.get(i, i)).sum::<T>() / T::from_usize_lossy(m)).sqrt()
        }
    };
    let bw = whitener.apply(b);
    Ok((Whitened { op: a, whitener }, bw, sigma_eff))
}
