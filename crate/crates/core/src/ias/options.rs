use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperprior::GenGammaParams;
use crate::krylov::KrylovOptions;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct IasOptions<T: Scalar> {
    /// Stop once `‖θ^{t+1} − θ^t‖ / ‖θ^t‖ < delta`.
    pub delta: T,
    pub max_outer: usize,
    pub krylov: KrylovOptions<T>,
    /// Starting variances; defaults to `ϑ`.
    pub initial_theta: Option<Vec<T>>,
    pub hybrid: Option<HybridOptions<T>>,
    /// Evaluate the objective after every half-step.
    pub track_objective: bool,
    pub pinv: PinvMethod,
}

/// How Phase I applies `L_θ†`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PinvMethod {
    /// Sparse Gram solves, no matrix formed.
    #[default]
    Implicit,
    /// Dense QR of `L_θ` rebuilt every outer iteration, refused above `cap` entries.
    Qr { cap: usize },
}

impl<T: Scalar> Default for IasOptions<T> {
    fn default() -> Self {
        IasOptions {
            delta: T::lit(0.01),
            max_outer: 100,
            krylov: KrylovOptions::default(),
            initial_theta: None,
            hybrid: None,
            track_objective: true,
            pinv: PinvMethod::Implicit,
        }
    }
}

impl<T: Scalar> IasOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > T::zero() && self.delta < T::one()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must lie in (0, 1), got {}", self.delta),
            });
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter {
                name: "max_outer",
                reason: "must be positive".into(),
            });
        }
        self.krylov.validate()
    }
}

/// When the hybrid scheme leaves the gamma hyperprior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", tag = "rule", rename_all = "kebab-case")]
pub enum SwitchRule<T: Scalar> {
    /// After `count` first-stage iterations; `0` runs the second stage only.
    FixedIteration { count: usize },
    /// Once the relative θ-change drops below `tol`.
    ThetaStagnation { tol: T },
}

impl<T: Scalar> SwitchRule<T> {
    /// Stagnation at `10·δ`.
    pub fn default_for(delta: T) -> Self {
        SwitchRule::ThetaStagnation { tol: T::lit(10.0) * delta }
    }
}

/// Second-stage parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "kebab-case")]
pub enum Params2<T: Scalar> {
    /// Solve the compatibility conditions against the first stage.
    Auto,
    Explicit(GenGammaParams<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct HybridOptions<T: Scalar> {
    pub switch_rule: SwitchRule<T>,
    pub r2: T,
    pub params2: Params2<T>,
}

impl<T: Scalar> HybridOptions<T> {
    /// Stagnation switch at `10·δ` with compatible parameters for `r2`.
    pub fn new(r2: T, delta: T) -> Self {
        HybridOptions {
            switch_rule: SwitchRule::default_for(delta),
            r2,
            params2: Params2::Auto,
        }
    }
}
