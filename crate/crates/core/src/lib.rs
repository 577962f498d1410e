//! Distributed Tikhonov regularization through hierarchical Bayesian models.
//!
//! The unknown `x` of a linear model `b = A x + ε` is regularized by a
//! conditionally Gaussian prior on `z = L x` whose group variances `θ` carry a
//! generalized-gamma hyperprior. The MAP estimate of `(z, θ)` is computed by the
//! Iterative Alternating Sequential (IAS) scheme: a standard-form Tikhonov solve
//! for `z` done with Lanczos bidiagonalization, followed by a closed-form or
//! ODE-based update of every variance. A classical Tikhonov/Morozov baseline and
//! two reproducible experiments (numerical differentiation, fan-beam tomography)
//! ship alongside.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

pub mod classic;
pub mod error;
pub mod experiments;
pub mod hyperprior;
pub mod ias;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod regularizer;
pub mod scalar;

pub use error::{Error, Result};
pub use operators::{LinearOperator, NoiseModel};
pub use scalar::Scalar;

pub type DenseMatrix64 = operators::DenseMatrix<f64>;
pub type SparseMatrix64 = operators::SparseMatrix<f64>;
pub type NoiseModel64 = operators::NoiseModel<f64>;
pub type KrylovOptions64 = krylov::KrylovOptions<f64>;
pub type GenGammaParams64 = hyperprior::GenGammaParams<f64>;
pub type SparsifyingOperator64 = regularizer::SparsifyingOperator<f64>;
pub type IasOptions64 = ias::IasOptions<f64>;
pub type IasResult64 = ias::IasResult<f64>;
pub type Problem64 = problems::Problem<f64>;

pub type DenseMatrix32 = operators::DenseMatrix<f32>;
pub type SparseMatrix32 = operators::SparseMatrix<f32>;
pub type GenGammaParams32 = hyperprior::GenGammaParams<f32>;
pub type IasResult32 = ias::IasResult<f32>;
