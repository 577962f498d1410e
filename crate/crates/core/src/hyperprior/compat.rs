//! Parameters of a second hyperprior that agree with a gamma (`r = 1`)
//! hyperprior on the baseline variance and on the expected variance.

use crate::error::{Error, Result};
use crate::hyperprior::GenGammaParams;
use crate::scalar::Scalar;

/// `Γ(β + 1/r) / Γ(β)` for the exponents whose reciprocal is an integer that
/// the hybrid scheme supports.
pub fn gamma_ratio(beta: f64, r: f64) -> Result<f64> {
    if r == 1.0 {
        Ok(beta)
    } else if r == 0.5 {
        Ok(beta * (beta + 1.0))
    } else if r == -0.5 {
        Ok(1.0 / ((beta - 1.0) * (beta - 2.0)))
    } else if r == -1.0 {
        Ok(1.0 / (beta - 1.0))
    } else {
        Err(unsupported(r))
    }
}

fn unsupported(r: f64) -> Error {
    Error::Unsupported(format!("hybrid compatibility is available for r2 in {{1/2, -1/2, -1}}, got {r}"))
}

/// Smallest `β₂` keeping the gamma ratio finite and positive.
fn gamma_floor(r: f64) -> f64 {
    if r == -0.5 {
        2.0
    } else if r == -1.0 {
        1.0
    } else {
        0.0
    }
}

/// Solves for `(β₂, ϑ₂)` of one group of size `k`.
///
/// `ϑ₂ = ϑ₁ β₁ / (Γ(β₂+1/r₂)/Γ(β₂))` matches the expected variances; `β₂`
/// then follows from matching the baseline variances by bisection.
pub fn compat_pair(beta1: f64, vartheta1: f64, r2: f64, k: usize) -> Result<(f64, f64)> {
    if r2 == 1.0 {
        return Ok((beta1, vartheta1));
    }
    gamma_ratio(2.5, r2)?;
    let kk = (k + 2) as f64;
    let target = beta1 - kk / 2.0;
    if !(target > 0.0) || !(vartheta1 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "params1",
            reason: format!("r = 1 needs beta > (k+2)/2 and vartheta > 0, got beta = {beta1}, vartheta = {vartheta1}"),
        });
    }
    let c2 = kk / (2.0 * r2);
    let resid = |b: f64| -> f64 {
        let ratio = gamma_ratio(b, r2).unwrap_or(f64::NAN);
        beta1 * (b - c2).powf(1.0 / r2) / ratio - target
    };
    let lo0 = c2.max(gamma_floor(r2));
    let mut lo = lo0;
    let mut hi = lo0 + 1.0;
    let mut f_hi = resid(hi);
    while !(f_hi > 0.0) {
        lo = hi;
        hi = lo0 + 2.0 * (hi - lo0);
        if hi > 1e12 {
            return Err(Error::NoRoot {
                lo: lo0,
                hi,
                f_lo: -target,
                f_hi,
            });
        }
        f_hi = resid(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = resid(mid);
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let beta2 = if resid(hi).abs() < resid(lo).abs() || resid(lo).is_nan() { hi } else { lo };
    let vartheta2 = vartheta1 * beta1 / gamma_ratio(beta2, r2)?;
    Ok((beta2, vartheta2))
}

/// Per-group compatible parameters for exponent `r2`.
pub fn hybrid_compat_solve<T: Scalar>(
    params1: &GenGammaParams<T>,
    r2: T,
    sizes: &[usize],
) -> Result<GenGammaParams<T>> {
    params1.validate(sizes.len())?;
    if params1.r != T::one() {
        return Err(Error::InvalidParameter {
            name: "params1",
            reason: format!("the first model must have r = 1, got {}", params1.r),
        });
    }
    let r2f = r2.as_f64();
    let mut beta = Vec::with_capacity(sizes.len());
    let mut vartheta = Vec::with_capacity(sizes.len());
    for ((&b, &v), &k) in params1.beta.iter().zip(&params1.vartheta).zip(sizes) {
        let (b2, v2) = compat_pair(b.as_f64(), v.as_f64(), r2f, k)?;
        beta.push(T::lit(b2));
        vartheta.push(T::lit(v2));
    }
    Ok(GenGammaParams { r: r2, beta, vartheta })
}
