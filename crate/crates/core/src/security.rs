//! Market-based and frequency-based moments of a single security.
//!
//! The market-based mean price is the VWAP `p(t) = C_Σ / U_Σ`, i.e. prices
//! averaged with weights `μ(t_i;1) = U(t_i) / Σ U`. The market-based price
//! variance averages squared deviations from that VWAP with the second-order
//! weights `μ(t_i;2) = U²(t_i) / Σ U²`, which gives
//!
//! ```text
//! φ(t) = [Ψ_C + p²(t) Ψ_U − 2 p(t) cov{C,U}] / U(t;2)
//! ```
//!
//! Returns are gross returns `R(t_i,t0) = p(t_i) / p(t0)` against an explicit
//! reference price; net returns differ by a constant and share the variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trade::{covariance, mean, raw_moment_of, TradeSeries};

/// Relative size below which a negative variance is treated as rounding noise.
pub const VARIANCE_CLAMP: f64 = 1e-12;

/// Accepts tiny negative values produced by cancellation and clamps them to 0;
/// anything more negative than `VARIANCE_CLAMP * scale` is an error.
pub(crate) fn settle_variance(value: f64, scale: f64, quantity: &'static str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value.abs() < VARIANCE_CLAMP * scale {
        Ok(0.0)
    } else {
        Err(Error::InternalInconsistency {
            quantity,
            left: value,
            right: 0.0,
        })
    }
}

/// Market-based price moments of one security together with the raw
/// value/volume moments they are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityStats {
    pub mean_price: f64,
    pub price_variance: f64,
    pub mean_value: f64,
    pub mean_volume: f64,
    pub value_variance: f64,
    pub volume_variance: f64,
    pub value_volume_cov: f64,
    pub second_volume_moment: f64,
    pub first_order_weights: Vec<f64>,
    pub second_order_weights: Vec<f64>,
}

impl SecurityStats {
    pub fn compute(series: &TradeSeries) -> Result<Self> {
        let values = series.values();
        let volumes = series.volumes();
        let mean_value = mean(&values)?;
        let mean_volume = mean(&volumes)?;
        let mean_price = mean_value / mean_volume;
        let value_variance = covariance(&values, &values)?;
        let volume_variance = covariance(&volumes, &volumes)?;
        let value_volume_cov = covariance(&values, &volumes)?;
        let second_volume_moment = raw_moment_of(&volumes, 2)?;

        let raw = (value_variance + mean_price * mean_price * volume_variance
            - 2.0 * mean_price * value_volume_cov)
            / second_volume_moment;
        let price_variance = settle_variance(raw, mean_price * mean_price, "price variance")?;

        let volume_total: f64 = volumes.iter().sum();
        let square_total: f64 = volumes.iter().map(|u| u * u).sum();
        Ok(Self {
            mean_price,
            price_variance,
            mean_value,
            mean_volume,
            value_variance,
            volume_variance,
            value_volume_cov,
            second_volume_moment,
            first_order_weights: volumes.iter().map(|u| u / volume_total).collect(),
            second_order_weights: volumes.iter().map(|u| u * u / square_total).collect(),
        })
    }
}

/// Volume-weighted average price `C(t;1) / U(t;1)`.
pub fn vwap(series: &TradeSeries) -> f64 {
    let (value, volume) = series
        .ticks()
        .iter()
        .fold((0.0, 0.0), |(c, u), t| (c + t.value(), u + t.volume()));
    value / volume
}

/// Market-based price variance from value/volume moments.
pub fn price_variance(series: &TradeSeries) -> Result<f64> {
    Ok(SecurityStats::compute(series)?.price_variance)
}

/// Unweighted mean of the tick prices.
pub fn frequency_mean_price(series: &TradeSeries) -> f64 {
    let prices = series.prices();
    prices.iter().sum::<f64>() / prices.len() as f64
}

/// Unweighted population variance of the tick prices.
pub fn frequency_price_variance(series: &TradeSeries) -> f64 {
    let prices = series.prices();
    covariance(&prices, &prices).unwrap_or(0.0)
}

/// Market-based return moments relative to a reference price `p(t0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub reference_price: f64,
    pub mean_gross_return: f64,
    pub return_variance: f64,
    /// `C_0(t_i,t0) = p(t0) U(t_i)`: current volumes valued at the reference price.
    pub past_values: Vec<f64>,
    pub past_value_variance: f64,
    pub current_past_cov: f64,
    pub second_past_moment: f64,
}

impl ReturnStats {
    pub fn compute(series: &TradeSeries, reference_price: f64) -> Result<Self> {
        check_reference_price(reference_price)?;
        let values = series.values();
        let past_values: Vec<f64> = series
            .ticks()
            .iter()
            .map(|t| reference_price * t.volume())
            .collect();
        let mean_gross_return = mean(&values)? / mean(&past_values)?;
        let value_variance = covariance(&values, &values)?;
        let past_value_variance = covariance(&past_values, &past_values)?;
        let current_past_cov = covariance(&values, &past_values)?;
        let second_past_moment = raw_moment_of(&past_values, 2)?;
        let r = mean_gross_return;
        let raw = (value_variance + r * r * past_value_variance - 2.0 * r * current_past_cov)
            / second_past_moment;
        let return_variance = settle_variance(raw, r * r, "return variance")?;
        Ok(Self {
            reference_price,
            mean_gross_return,
            return_variance,
            past_values,
            past_value_variance,
            current_past_cov,
            second_past_moment,
        })
    }

    pub fn mean_net_return(&self) -> f64 {
        self.mean_gross_return - 1.0
    }
}

pub(crate) fn check_reference_price(p0: f64) -> Result<()> {
    if p0.is_finite() && p0 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidReferencePrice(p0))
    }
}

/// Market-based mean gross return `R(t,t0) = p(t) / p(t0)`.
pub fn mean_return(series: &TradeSeries, reference_price: f64) -> Result<f64> {
    check_reference_price(reference_price)?;
    Ok(vwap(series) / reference_price)
}

/// Market-based return variance `θ(t,t0)` from past-value moments.
pub fn return_variance(series: &TradeSeries, reference_price: f64) -> Result<f64> {
    Ok(ReturnStats::compute(series, reference_price)?.return_variance)
}

fn gross_returns(series: &TradeSeries, reference_price: f64) -> Result<Vec<f64>> {
    check_reference_price(reference_price)?;
    Ok(series
        .prices()
        .into_iter()
        .map(|p| p / reference_price)
        .collect())
}

pub fn frequency_mean_return(series: &TradeSeries, reference_price: f64) -> Result<f64> {
    mean(&gross_returns(series, reference_price)?)
}

pub fn frequency_return_variance(series: &TradeSeries, reference_price: f64) -> Result<f64> {
    let r = gross_returns(series, reference_price)?;
    covariance(&r, &r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trade::rescale;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn worked() -> TradeSeries {
        TradeSeries::from_columns("A", &[10.0, 30.0], &[1.0, 2.0]).unwrap()
    }

    #[test]
    fn vwap_examples() {
        assert!(rel(vwap(&worked()), 40.0 / 3.0) < 1e-15);
        let flat = TradeSeries::from_columns("B", &[5.0, 15.0, 2.5], &[1.0, 3.0, 0.5]).unwrap();
        assert!(rel(vwap(&flat), 5.0) < 1e-15);
        let equal = TradeSeries::from_columns("C", &[10.0, 20.0], &[1.0, 1.0]).unwrap();
        assert_eq!(vwap(&equal), 15.0);
    }

    #[test]
    fn price_variance_examples() {
        let flat = TradeSeries::from_columns("B", &[5.0, 15.0, 2.5], &[1.0, 3.0, 0.5]).unwrap();
        assert!(price_variance(&flat).unwrap().abs() < 1e-12);
        assert!(rel(price_variance(&worked()).unwrap(), 40.0 / 9.0) < 1e-14);
        let equal = TradeSeries::from_columns("C", &[10.0, 20.0], &[1.0, 1.0]).unwrap();
        assert_eq!(price_variance(&equal).unwrap(), 25.0);
    }

    #[test]
    fn weights_sum_to_one() {
        let s = TradeSeries::from_columns("A", &[3.0, 1.0, 8.0, 2.0], &[0.5, 2.0, 1.5, 4.0]).unwrap();
        let stats = SecurityStats::compute(&s).unwrap();
        assert!((stats.first_order_weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((stats.second_order_weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frequency_moments() {
        let equal = TradeSeries::from_columns("C", &[10.0, 20.0], &[1.0, 1.0]).unwrap();
        assert_eq!(frequency_mean_price(&equal), 15.0);
        assert_eq!(frequency_price_variance(&equal), 25.0);
        assert_eq!(frequency_mean_price(&equal), vwap(&equal));
        assert_eq!(frequency_price_variance(&equal), price_variance(&equal).unwrap());

        let s = worked();
        assert_eq!(frequency_mean_price(&s), 12.5);
        assert_eq!(frequency_price_variance(&s), 6.25);
        assert!(rel(price_variance(&s).unwrap(), 40.0 / 9.0) < 1e-14);
    }

    #[test]
    fn mean_return_examples() {
        let s = worked();
        assert_eq!(mean_return(&s, 1.0).unwrap(), vwap(&s));
        assert!(rel(mean_return(&s, 10.0).unwrap(), 4.0 / 3.0) < 1e-15);
        let flat = TradeSeries::from_columns("B", &[5.0, 10.0], &[1.0, 2.0]).unwrap();
        assert_eq!(mean_return(&flat, 5.0).unwrap(), 1.0);
        let stats = ReturnStats::compute(&s, 10.0).unwrap();
        assert!(rel(stats.mean_gross_return, 4.0 / 3.0) < 1e-15);
        assert_eq!(stats.past_values, vec![10.0, 20.0]);
        for bad in [0.0, -1.0, f64::NAN] {
            assert!(matches!(mean_return(&s, bad), Err(Error::InvalidReferencePrice(_))));
            assert!(matches!(return_variance(&s, bad), Err(Error::InvalidReferencePrice(_))));
        }
    }

    #[test]
    fn return_variance_examples() {
        let flat = TradeSeries::from_columns("B", &[5.0, 10.0], &[1.0, 2.0]).unwrap();
        assert!(return_variance(&flat, 3.0).unwrap().abs() < 1e-15);
        let s = worked();
        assert!(rel(return_variance(&s, 10.0).unwrap(), 4.0 / 90.0) < 1e-14);
        let phi = price_variance(&s).unwrap();
        assert!(rel(return_variance(&s, 10.0).unwrap() * 100.0, phi) < 1e-14);
    }

    #[test]
    fn net_returns_share_the_variance() {
        let s = TradeSeries::from_columns("A", &[3.0, 1.0, 8.0, 2.0], &[0.5, 2.0, 1.5, 4.0]).unwrap();
        let stats = ReturnStats::compute(&s, 2.0).unwrap();
        let gross: Vec<f64> = s.prices().iter().map(|p| p / 2.0).collect();
        let net: Vec<f64> = gross.iter().map(|r| r - 1.0).collect();
        let w = SecurityStats::compute(&s).unwrap().second_order_weights;
        let weighted = |xs: &[f64], m: f64| -> f64 {
            xs.iter().zip(&w).map(|(x, w)| (x - m).powi(2) * w).sum()
        };
        let g = weighted(&gross, stats.mean_gross_return);
        let n = weighted(&net, stats.mean_net_return());
        assert!(rel(g, n) < 1e-12);
        assert!(rel(g, stats.return_variance) < 1e-12);
    }

    #[test]
    fn frequency_returns() {
        let s = TradeSeries::from_columns("C", &[10.0, 20.0], &[1.0, 1.0]).unwrap();
        assert_eq!(frequency_mean_return(&s, 10.0).unwrap(), 1.5);
        assert_eq!(frequency_return_variance(&s, 10.0).unwrap(), 0.25);
        assert_eq!(frequency_mean_return(&s, 10.0).unwrap(), mean_return(&s, 10.0).unwrap());
        assert!(rel(
            frequency_return_variance(&s, 10.0).unwrap(),
            return_variance(&s, 10.0).unwrap()
        ) < 1e-15);
        let r = worked();
        assert!(rel(frequency_return_variance(&r, 10.0).unwrap(), 0.0625) < 1e-15);
        assert!((frequency_return_variance(&r, 10.0).unwrap() - return_variance(&r, 10.0).unwrap()).abs() > 1e-3);
        assert!(frequency_mean_return(&r, 0.0).is_err());
    }

    #[test]
    fn clamp_policy() {
        assert_eq!(settle_variance(-1e-15, 1.0, "x").unwrap(), 0.0);
        assert_eq!(settle_variance(2.0, 1.0, "x").unwrap(), 2.0);
        assert!(settle_variance(-1e-6, 1.0, "x").is_err());
    }

    #[test]
    fn rescale_invariance_of_vwap_and_variance() {
        let s = TradeSeries::from_columns("A", &[3.0, 1.0, 8.0, 2.0], &[0.5, 2.0, 1.5, 4.0]).unwrap();
        for lambda in [1e-3, 0.37, 1.0, 1e3] {
            let r = rescale(&s, lambda).unwrap();
            assert!(rel(vwap(&r), vwap(&s)) < 1e-12);
            assert!(rel(price_variance(&r).unwrap(), price_variance(&s).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn single_tick_has_zero_variance() {
        let s = TradeSeries::from_columns("A", &[7.0], &[2.0]).unwrap();
        assert_eq!(price_variance(&s).unwrap(), 0.0);
        assert_eq!(return_variance(&s, 1.5).unwrap(), 0.0);
        assert_eq!(vwap(&s), 3.5);
    }
}
