//! Generalized-gamma hyperprior: the penalty `Φ(θ)`, the per-group variance
//! update, scale selection rules, and hybrid-scheme compatibility.
//!
//! After non-dimensionalization `θ_ℓ = ϑ_ℓ λ_ℓ`, `t_ℓ = ‖z_ℓ‖/√ϑ_ℓ`, each group
//! minimizes `g̃(λ) = t²/(2λ) + λ^r − η log λ`, whose stationarity condition is
//! `r λ^{r+1} − η λ − t²/2 = 0`.

mod compat;

pub use compat::{compat_pair, gamma_ratio, hybrid_compat_solve};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::regularizer::Partition;
use crate::scalar::Scalar;

/// Per-group hyperparameters `(r, β_ℓ, ϑ_ℓ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct GenGammaParams<T: Scalar> {
    pub r: T,
    pub beta: Vec<T>,
    pub vartheta: Vec<T>,
}

impl<T: Scalar> GenGammaParams<T> {
    pub fn uniform(r: T, beta: T, vartheta: T, groups: usize) -> Self {
        GenGammaParams {
            r,
            beta: vec![beta; groups],
            vartheta: vec![vartheta; groups],
        }
    }

    /// Chooses `β_ℓ` so that every group has the same `η_ℓ = eta`.
    pub fn with_eta(r: T, eta: T, vartheta: T, sizes: &[usize]) -> Self {
        let beta = sizes
            .iter()
            .map(|&k| (half_k2::<T>(k) + eta) / r)
            .collect();
        GenGammaParams {
            r,
            beta,
            vartheta: vec![vartheta; sizes.len()],
        }
    }

    pub fn groups(&self) -> usize {
        self.beta.len()
    }

    /// `η_ℓ = r β_ℓ − (k_ℓ + 2)/2`.
    pub fn etas(&self, sizes: &[usize]) -> Vec<T> {
        self.beta
            .iter()
            .zip(sizes)
            .map(|(&b, &k)| self.r * b - half_k2::<T>(k))
            .collect()
    }

    pub fn validate(&self, groups: usize) -> Result<()> {
        check_len("hyperparameters", groups, self.beta.len())?;
        check_len("hyperparameters", groups, self.vartheta.len())?;
        if self.r == T::zero() || !self.r.is_finite() {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: "must be finite and nonzero".into(),
            });
        }
        if let Some(b) = self.beta.iter().find(|b| !(**b > T::zero() && b.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("every shape parameter must be positive, got {b}"),
            });
        }
        if let Some(v) = self.vartheta.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "vartheta",
                reason: format!("every scale parameter must be positive, got {v}"),
            });
        }
        Ok(())
    }

    /// Checks that the variance update is well defined for every group.
    pub fn check_admissible(&self, sizes: &[usize]) -> Result<()> {
        self.validate(sizes.len())?;
        let r = self.r;
        for (l, (&b, &k)) in self.beta.iter().zip(sizes).enumerate() {
            let eta = r * b - half_k2::<T>(k);
            let ok = if r == T::one() {
                eta > T::zero()
            } else if r == -T::one() {
                eta < T::zero()
            } else {
                b - half_k2::<T>(k) / r > T::zero()
            };
            if !ok {
                return Err(Error::InvalidParameter {
                    name: "beta",
                    reason: format!("group {l}: beta = {b} with k = {k} and r = {r} gives eta = {eta}, outside the admissible range"),
                });
            }
        }
        Ok(())
    }
}

fn half_k2<T: Scalar>(k: usize) -> T {
    T::from_usize_lossy(k + 2) / T::lit(2.0)
}

/// `Φ(θ) = Σ (θ_ℓ/ϑ_ℓ)^r − Σ η_ℓ log(θ_ℓ/ϑ_ℓ)`.
pub fn phi<T: Scalar>(theta: &[T], params: &GenGammaParams<T>, sizes: &[usize]) -> Result<T> {
    params.validate(sizes.len())?;
    check_positive(theta)?;
    let etas = params.etas(sizes);
    Ok(theta
        .iter()
        .zip(&params.vartheta)
        .zip(&etas)
        .map(|((&t, &v), &e)| {
            let q = t / v;
            q.powf(params.r) - e * q.ln()
        })
        .sum())
}

/// `∂Φ/∂θ_ℓ = (r (θ_ℓ/ϑ_ℓ)^r − η_ℓ)/θ_ℓ`.
pub fn phi_gradient<T: Scalar>(theta: &[T], params: &GenGammaParams<T>, sizes: &[usize]) -> Result<Vec<T>> {
    params.validate(sizes.len())?;
    check_positive(theta)?;
    let etas = params.etas(sizes);
    Ok(theta
        .iter()
        .zip(&params.vartheta)
        .zip(&etas)
        .map(|((&t, &v), &e)| (params.r * (t / v).powf(params.r) - e) / t)
        .collect())
}

fn check_positive<T: Scalar>(theta: &[T]) -> Result<()> {
    match theta.iter().position(|t| !(*t > T::zero() && t.is_finite())) {
        Some(group) => Err(Error::NonPositiveTheta {
            group,
            value: theta[group].as_f64(),
        }),
        None => Ok(()),
    }
}

/// `g̃′(λ) = −t²/(2λ²) + r λ^{r−1} − η/λ`.
pub fn g_tilde_prime<T: Scalar>(lambda: T, t: T, eta: T, r: T) -> T {
    -t * t / (T::lit(2.0) * lambda * lambda) + r * lambda.powf(r - T::one()) - eta / lambda
}

/// `g̃(λ) = t²/(2λ) + λ^r − η log λ`.
pub fn g_tilde<T: Scalar>(lambda: T, t: T, eta: T, r: T) -> T {
    t * t / (T::lit(2.0) * lambda) + lambda.powf(r) - eta * lambda.ln()
}

/// Closed-form minimizer of `g̃` for `r = 1` (`η > 0`) and `r = −1` (`η < 0`).
pub fn update_variance_closed<T: Scalar>(t: T, eta: T, r: T) -> Result<T> {
    let two = T::lit(2.0);
    if r == T::one() {
        if !(eta > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("r = 1 needs eta > 0, got {eta}"),
            });
        }
        Ok((eta + (eta * eta + two * t * t).sqrt()) / two)
    } else if r == -T::one() {
        if !(eta < T::zero()) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("r = -1 needs eta < 0, got {eta}"),
            });
        }
        Ok((t * t / two + T::one()) / eta.abs())
    } else {
        Err(Error::Unsupported(format!("no closed-form variance update for r = {r}")))
    }
}

/// Integrates `φ′(s) = 2sφ/(2r²φ^{r+1} + s²)` from `φ(0) = (β − (k+2)/(2r))^{1/r}`
/// to `s = t` with classical RK4, then polishes with Newton on the stationarity
/// condition.
pub fn update_variance_ode<T: Scalar>(t: T, beta: T, k: usize, r: T) -> Result<T> {
    if r == T::zero() || !r.is_finite() {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "must be finite and nonzero".into(),
        });
    }
    let base = beta - half_k2::<T>(k) / r;
    if !(base > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("initial condition needs beta - (k+2)/(2r) > 0, got {base}"),
        });
    }
    let phi0 = base.powf(T::one() / r);
    let t = t.abs();
    if t == T::zero() {
        return Ok(phi0);
    }
    let two = T::lit(2.0);
    let f = |s: T, p: T| two * s * p / (two * r * r * p.powf(r + T::one()) + s * s);
    let h0 = t.min(T::lit(0.01) * t.max(T::one()));
    let steps = (t / h0).ceil().to_usize().unwrap_or(1).max(1);
    let h = t / T::from_usize_lossy(steps);
    let mut p = phi0;
    for i in 0..steps {
        let s = h * T::from_usize_lossy(i);
        let k1 = f(s, p);
        let k2 = f(s + h / two, p + h / two * k1);
        let k3 = f(s + h / two, p + h / two * k2);
        let k4 = f(s + h, p + h * k3);
        p += h / T::lit(6.0) * (k1 + two * k2 + two * k3 + k4);
    }
    let eta = r * beta - half_k2::<T>(k);
    Ok(newton_polish(p, t, eta, r))
}

/// Newton on `h(λ) = r λ^{r+1} − η λ − t²/2`, accepting only steps that stay
/// positive and shrink `|h|`.
fn newton_polish<T: Scalar>(mut lambda: T, t: T, eta: T, r: T) -> T {
    let half_t2 = t * t / T::lit(2.0);
    let h = |l: T| r * l.powf(r + T::one()) - eta * l - half_t2;
    let mut hv = h(lambda);
    for _ in 0..4 {
        let dh = r * (r + T::one()) * lambda.powf(r) - eta;
        if dh == T::zero() || !dh.is_finite() {
            break;
        }
        let next = lambda - hv / dh;
        if !(next > T::zero()) {
            break;
        }
        let hn = h(next);
        if !(hn.abs() < hv.abs()) {
            break;
        }
        lambda = next;
        hv = hn;
    }
    lambda
}

/// Normalized variance `λ` for one group, by closed form when `r = ±1`.
pub fn update_variance<T: Scalar>(t: T, beta: T, k: usize, r: T) -> Result<T> {
    if r == T::one() || r == -T::one() {
        update_variance_closed(t, r * beta - half_k2::<T>(k), r)
    } else {
        update_variance_ode(t, beta, k, r)
    }
}

/// Groups at or above this count are updated in parallel.
const PARALLEL_GROUPS: usize = 512;

/// Phase II: `θ_ℓ = ϑ_ℓ λ_ℓ(‖z_ℓ‖/√ϑ_ℓ)` for every group.
pub fn phase2_update<T: Scalar>(z: &[T], partition: &Partition, params: &GenGammaParams<T>) -> Result<Vec<T>> {
    check_len("phase2_update", partition.rows(), z.len())?;
    params.validate(partition.len())?;
    let norms = partition.group_norms_sq(z);
    let sizes = partition.sizes();
    let one = |l: usize| {
        let v = params.vartheta[l];
        let t = (norms[l] / v).sqrt();
        update_variance(t, params.beta[l], sizes[l], params.r).map(|lam| v * lam)
    };
    if partition.len() >= PARALLEL_GROUPS {
        (0..partition.len()).into_par_iter().map(one).collect()
    } else {
        (0..partition.len()).map(one).collect()
    }
}

/// `ϑ = m σ² (SNR − 1) / (β ‖A‖_F²)`.
pub fn select_scale_snr<T: Scalar>(frob_sq: T, m: usize, sigma: T, snr: T, beta: T) -> Result<T> {
    if !(snr > T::one()) {
        return Err(Error::InvalidParameter {
            name: "snr",
            reason: format!("must exceed 1, got {snr}"),
        });
    }
    for (name, v) in [("frob_sq", frob_sq), ("sigma", sigma), ("beta", beta)] {
        if !(v > T::zero()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be positive, got {v}"),
            });
        }
    }
    Ok(T::from_usize_lossy(m) * sigma * sigma * (snr - T::one()) / (beta * frob_sq))
}

/// `ϑ_j = α · SNR / ‖a^{(j)}‖²` from the column norms `‖a^{(j)}‖`.
pub fn sensitivity_weights<T: Scalar>(col_norms: &[T], snr: T, alpha: T) -> Result<Vec<T>> {
    col_norms
        .iter()
        .enumerate()
        .map(|(column, &c)| {
            if c > T::zero() {
                Ok(alpha * snr / (c * c))
            } else {
                Err(Error::ZeroColumn { column })
            }
        })
        .collect()
}

/// The gamma-hyperprior fixed-point map in the form stated by the convergence
/// theorem, `ϑ(η/2 + √(η²/4 + 2z²/ϑ))`. Diagnostic only: it is not the closed
/// form used by the solver, which is [`fixed_point_map_closed`].
pub fn fixed_point_map_stated<T: Scalar>(z: T, vartheta: T, eta: T) -> T {
    let two = T::lit(2.0);
    vartheta * (eta / two + (eta * eta / T::lit(4.0) + two * z * z / vartheta).sqrt())
}

/// `ϑ λ(|z|/√ϑ)` for `r = 1`: `ϑ(η/2 + √(η²/4 + z²/(2ϑ)))`.
pub fn fixed_point_map_closed<T: Scalar>(z: T, vartheta: T, eta: T) -> T {
    let two = T::lit(2.0);
    vartheta * (eta / two + (eta * eta / T::lit(4.0) + z * z / (two * vartheta)).sqrt())
}

#[cfg(test)]
mod tests;
