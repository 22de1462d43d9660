//! Market-based versus frequency-based moments of one security.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::security::{frequency_mean_price, frequency_price_variance, price_variance, vwap};
use crate::trade::{mean, TradeSeries};

use super::oracle::relative_error;

/// Side-by-side moments of one series. With constant volumes every gap should
/// vanish; otherwise the gaps measure how far the two definitions drift apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyComparison {
    pub security_id: String,
    pub constant_volume: bool,
    pub market_mean: f64,
    pub frequency_mean: f64,
    pub market_variance: f64,
    pub frequency_variance: f64,
    pub mean_gap: f64,
    pub variance_gap: f64,
    /// Plain averages of `p` and `p²` over the ticks.
    pub price_moments: [f64; 2],
    /// `C(t;1) / U` and `C(t;2) / U²` with `U` the average volume.
    pub reconstructed_moments: [f64; 2],
    pub reconstruction_gaps: [f64; 2],
}

impl FrequencyComparison {
    pub fn max_gap(&self) -> f64 {
        [
            self.mean_gap,
            self.variance_gap,
            self.reconstruction_gaps[0],
            self.reconstruction_gaps[1],
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// True when volumes vary, or when they are constant and every gap is
    /// within `tolerance`.
    pub fn is_consistent(&self, tolerance: f64) -> bool {
        !self.constant_volume || self.max_gap() <= tolerance
    }
}

pub fn frequency_moment_suite(series: &TradeSeries) -> Result<FrequencyComparison> {
    let prices = series.prices();
    let values = series.values();
    let volumes = series.volumes();
    let constant_volume = volumes.iter().all(|u| *u == volumes[0]);

    let market_mean = vwap(series);
    let frequency_mean = frequency_mean_price(series);
    let market_variance = price_variance(series)?;
    let frequency_variance = frequency_price_variance(series);

    let squares: Vec<f64> = prices.iter().map(|p| p * p).collect();
    let price_moments = [mean(&prices)?, mean(&squares)?];
    let u = mean(&volumes)?;
    let value_squares: Vec<f64> = values.iter().map(|c| c * c).collect();
    let reconstructed_moments = [mean(&values)? / u, mean(&value_squares)? / (u * u)];

    // Variances can be zero in exact arithmetic; compare them on the scale of
    // the squared mean so that rounding noise does not read as a gap.
    let variance_scale = market_mean * market_mean;
    let variance_gap = if market_variance == frequency_variance {
        0.0
    } else {
        (market_variance - frequency_variance).abs()
            / market_variance.abs().max(frequency_variance.abs()).max(variance_scale * f64::EPSILON)
    };

    Ok(FrequencyComparison {
        security_id: series.security_id().to_owned(),
        constant_volume,
        market_mean,
        frequency_mean,
        market_variance,
        frequency_variance,
        mean_gap: relative_error(market_mean, frequency_mean),
        variance_gap,
        price_moments,
        reconstructed_moments,
        reconstruction_gaps: [
            relative_error(price_moments[0], reconstructed_moments[0]),
            relative_error(price_moments[1], reconstructed_moments[1]),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_volume_collapses() {
        let s = TradeSeries::from_columns("A", &[3.0, 9.0, 4.5], &[1.5, 1.5, 1.5]).unwrap();
        let c = frequency_moment_suite(&s).unwrap();
        assert!(c.constant_volume);
        assert!(c.max_gap() < 1e-14, "{c:?}");
        assert!(c.is_consistent(1e-12));
    }

    #[test]
    fn varying_volume_reports_gap() {
        let s = TradeSeries::from_columns("A", &[10.0, 30.0], &[1.0, 2.0]).unwrap();
        let c = frequency_moment_suite(&s).unwrap();
        assert!(!c.constant_volume);
        // Market mean 40/3, frequency mean 12.5; market variance 40/9, frequency 6.25.
        assert!((c.market_mean - 40.0 / 3.0).abs() < 1e-14);
        assert!((c.frequency_mean - 12.5).abs() < 1e-14);
        assert!((c.frequency_variance - 6.25).abs() < 1e-14);
        assert!(c.mean_gap > 0.05);
        assert!(c.is_consistent(1e-12));
    }
}
