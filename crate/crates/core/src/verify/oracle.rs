//! Reference computations written as plain weighted sums over ticks.
//!
//! Nothing here goes through the moment algebra used by the main path, so an
//! agreement between the two is evidence that the algebra is right.

use crate::error::{Error, Result};

/// `|a − b| / max(|a|, |b|)`, and zero when both are exactly equal.
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

fn check_columns(values: &[f64], volumes: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if values.len() != volumes.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            actual: volumes.len(),
        });
    }
    Ok(())
}

/// `Σ c_i / Σ u_i`
pub fn weighted_mean_price(values: &[f64], volumes: &[f64]) -> Result<f64> {
    check_columns(values, volumes)?;
    let c: f64 = values.iter().sum();
    let u: f64 = volumes.iter().sum();
    Ok(c / u)
}

/// `Σ (p_i − p)² u_i² / Σ u_i²`
pub fn weighted_price_variance(values: &[f64], volumes: &[f64]) -> Result<f64> {
    weighted_price_covariance(values, volumes, values, volumes)
}

/// `Σ (p_ji − p_j)(p_ki − p_k) u_ji u_ki / Σ u_ji u_ki`
pub fn weighted_price_covariance(
    values_j: &[f64],
    volumes_j: &[f64],
    values_k: &[f64],
    volumes_k: &[f64],
) -> Result<f64> {
    check_columns(values_j, volumes_j)?;
    check_columns(values_k, volumes_k)?;
    if values_j.len() != values_k.len() {
        return Err(Error::LengthMismatch {
            expected: values_j.len(),
            actual: values_k.len(),
        });
    }
    let pj = weighted_mean_price(values_j, volumes_j)?;
    let pk = weighted_mean_price(values_k, volumes_k)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..values_j.len() {
        let w = volumes_j[i] * volumes_k[i];
        num += (values_j[i] / volumes_j[i] - pj) * (values_k[i] / volumes_k[i] - pk) * w;
        den += w;
    }
    Ok(num / den)
}

/// Portfolio moments from the aggregated trades alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMoments {
    pub mean_price: f64,
    pub price_variance: f64,
    pub mean_return: f64,
    pub return_variance: f64,
}

/// Mean and variance of the aggregated portfolio price and of the return of
/// each portfolio trade `Q_i / (s0 W_i)`.
pub fn portfolio_moments(values: &[f64], volumes: &[f64], composition_price: f64) -> Result<OracleMoments> {
    check_columns(values, volumes)?;
    if !(composition_price.is_finite() && composition_price > 0.0) {
        return Err(Error::InvalidReferencePrice(composition_price));
    }
    let mean_price = weighted_mean_price(values, volumes)?;
    let price_variance = weighted_price_variance(values, volumes)?;
    let past: Vec<f64> = volumes.iter().map(|w| composition_price * w).collect();
    let mean_return = values.iter().sum::<f64>() / past.iter().sum::<f64>();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..values.len() {
        let r = values[i] / past[i];
        num += (r - mean_return) * (r - mean_return) * volumes[i] * volumes[i];
        den += volumes[i] * volumes[i];
    }
    Ok(OracleMoments {
        mean_price,
        price_variance,
        mean_return,
        return_variance: num / den,
    })
}
