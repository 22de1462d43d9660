//! Trade time series over an averaging window.
//!
//! A [`TradeSeries`] holds the N trades of one security made at the common
//! tick grid `t_1..t_N` of an [`AveragingWindow`]. Each trade carries a value
//! `C` and a volume `U`; its price `p = C / U` is always derived, never stored.
//!
//! All moments here use the population convention (divide by N).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `tick_count` trade times spaced `tick_spacing` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingWindow {
    label: String,
    tick_count: usize,
    tick_spacing: f64,
}

impl AveragingWindow {
    pub fn new(label: impl Into<String>, tick_count: usize, tick_spacing: f64) -> Result<Self> {
        if tick_count == 0 {
            return Err(Error::InvalidWindow("tick count must be >= 1".into()));
        }
        if !(tick_spacing.is_finite() && tick_spacing > 0.0) {
            return Err(Error::InvalidWindow(format!(
                "tick spacing {tick_spacing} must be finite and > 0"
            )));
        }
        Ok(Self {
            label: label.into(),
            tick_count,
            tick_spacing,
        })
    }

    /// Unlabelled window with unit spacing.
    pub fn with_ticks(tick_count: usize) -> Result<Self> {
        Self::new("", tick_count, 1.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tick_count(&self) -> usize {
        self.tick_count
    }

    pub fn tick_spacing(&self) -> f64 {
        self.tick_spacing
    }

    /// Window length `N * spacing`.
    pub fn length(&self) -> f64 {
        self.tick_count as f64 * self.tick_spacing
    }

    /// Two windows are compatible when they share the tick grid.
    pub fn is_aligned_with(&self, other: &AveragingWindow) -> bool {
        self.tick_count == other.tick_count && self.tick_spacing == other.tick_spacing
    }
}

/// A single trade: value and (strictly positive) volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeTick {
    value: f64,
    volume: f64,
}

impl TradeTick {
    pub fn new(value: f64, volume: f64) -> Result<Self> {
        Self::checked(0, value, volume)
    }

    fn checked(tick: usize, value: f64, volume: f64) -> Result<Self> {
        if !value.is_finite() || !volume.is_finite() {
            return Err(Error::InvalidTick {
                tick,
                reason: format!("non-finite value {value} or volume {volume}"),
            });
        }
        if volume <= 0.0 {
            return Err(Error::InvalidTick {
                tick,
                reason: format!("volume must be > 0, got {volume}"),
            });
        }
        if value <= 0.0 {
            return Err(Error::InvalidTick {
                tick,
                reason: format!("value must be > 0, got {value}"),
            });
        }
        Ok(Self { value, volume })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn price(&self) -> f64 {
        self.value / self.volume
    }
}

/// Which column of a trade series a moment is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Value,
    Volume,
}

/// Aligned trades of one security over an averaging window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeSeries {
    security_id: String,
    window: AveragingWindow,
    ticks: Vec<TradeTick>,
}

impl TradeSeries {
    pub fn new(
        security_id: impl Into<String>,
        window: AveragingWindow,
        ticks: Vec<TradeTick>,
    ) -> Result<Self> {
        if ticks.len() != window.tick_count() {
            return Err(Error::LengthMismatch {
                expected: window.tick_count(),
                actual: ticks.len(),
            });
        }
        Ok(Self {
            security_id: security_id.into(),
            window,
            ticks,
        })
    }

    /// Builds a series on an unlabelled unit-spacing window from parallel
    /// value and volume columns.
    pub fn from_columns(
        security_id: impl Into<String>,
        values: &[f64],
        volumes: &[f64],
    ) -> Result<Self> {
        if values.len() != volumes.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: volumes.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let window = AveragingWindow::with_ticks(values.len())?;
        Self::from_columns_in(security_id, window, values, volumes)
    }

    pub fn from_columns_in(
        security_id: impl Into<String>,
        window: AveragingWindow,
        values: &[f64],
        volumes: &[f64],
    ) -> Result<Self> {
        if values.len() != volumes.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                actual: volumes.len(),
            });
        }
        let ticks = values
            .iter()
            .zip(volumes)
            .enumerate()
            .map(|(i, (&c, &u))| TradeTick::checked(i + 1, c, u))
            .collect::<Result<Vec<_>>>()?;
        Self::new(security_id, window, ticks)
    }

    pub fn security_id(&self) -> &str {
        &self.security_id
    }

    pub fn window(&self) -> &AveragingWindow {
        &self.window
    }

    pub fn ticks(&self) -> &[TradeTick] {
        &self.ticks
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.ticks.iter().map(TradeTick::value).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.ticks.iter().map(TradeTick::volume).collect()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.ticks.iter().map(TradeTick::price).collect()
    }

    pub fn column(&self, field: Field) -> Vec<f64> {
        match field {
            Field::Value => self.values(),
            Field::Volume => self.volumes(),
        }
    }

    /// Fails unless both series live on the same tick grid.
    pub fn ensure_aligned(&self, other: &TradeSeries) -> Result<()> {
        if self.window.is_aligned_with(&other.window) && self.len() == other.len() {
            Ok(())
        } else {
            Err(Error::WindowMismatch {
                left: self.security_id.clone(),
                left_n: self.len(),
                right: other.security_id.clone(),
                right_n: other.len(),
            })
        }
    }
}

/// n-th raw moment `(1/N) sum field(t_i)^n`.
pub fn raw_moment(series: &TradeSeries, field: Field, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidMomentOrder);
    }
    let column = series.column(field);
    raw_moment_of(&column, n)
}

pub(crate) fn raw_moment_of(xs: &[f64], n: u32) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let exp = i32::try_from(n).map_err(|_| Error::InvalidMomentOrder)?;
    Ok(xs.iter().map(|x| x.powi(exp)).sum::<f64>() / xs.len() as f64)
}

/// Total of a column over the window.
pub fn total(series: &TradeSeries, field: Field) -> f64 {
    match field {
        Field::Value => series.ticks.iter().map(TradeTick::value).sum(),
        Field::Volume => series.ticks.iter().map(TradeTick::volume).sum(),
    }
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyWindow);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Population covariance, two-pass.
pub fn covariance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let ma = mean(a)?;
    let mb = mean(b)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / a.len() as f64)
}

pub fn variance(a: &[f64]) -> Result<f64> {
    covariance(a, a)
}

/// Scales every value and volume by `lambda`; prices are untouched.
pub fn rescale(series: &TradeSeries, lambda: f64) -> Result<TradeSeries> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidScale(lambda));
    }
    let ticks = series
        .ticks
        .iter()
        .enumerate()
        .map(|(i, t)| TradeTick::checked(i + 1, lambda * t.value, lambda * t.volume))
        .collect::<Result<Vec<_>>>()?;
    Ok(TradeSeries {
        security_id: series.security_id.clone(),
        window: series.window.clone(),
        ticks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64], volumes: &[f64]) -> TradeSeries {
        TradeSeries::from_columns("A", values, volumes).unwrap()
    }

    #[test]
    fn raw_moments_of_small_series() {
        let s = series(&[10.0, 30.0], &[1.0, 2.0]);
        assert_eq!(raw_moment(&s, Field::Value, 1).unwrap(), 20.0);
        assert_eq!(raw_moment(&s, Field::Value, 2).unwrap(), 500.0);
        let flat = series(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        for n in 1..5 {
            assert_eq!(raw_moment(&flat, Field::Volume, n).unwrap(), 1.0);
        }
        assert!(matches!(
            raw_moment(&s, Field::Value, 0),
            Err(Error::InvalidMomentOrder)
        ));
        assert!(matches!(raw_moment_of(&[], 1), Err(Error::EmptyWindow)));
    }

    #[test]
    fn totals() {
        let s = series(&[10.0, 30.0], &[1.0, 2.0]);
        assert_eq!(total(&s, Field::Volume), 3.0);
        assert_eq!(total(&s, Field::Value), 40.0);
        assert_eq!(
            total(&s, Field::Value),
            s.len() as f64 * raw_moment(&s, Field::Value, 1).unwrap()
        );
    }

    #[test]
    fn covariance_cases() {
        assert_eq!(covariance(&[10.0, 30.0], &[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(covariance(&[4.0, 4.0, 4.0], &[1.0, 7.0, 2.0]).unwrap(), 0.0);
        let a = [1.0, 5.0, 2.5];
        assert_eq!(covariance(&a, &a).unwrap(), variance(&a).unwrap());
        assert!(matches!(
            covariance(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(covariance(&[], &[]), Err(Error::EmptyWindow)));
    }

    #[test]
    fn rescale_keeps_prices() {
        let s = series(&[10.0, 30.0], &[1.0, 2.0]);
        assert_eq!(rescale(&s, 1.0).unwrap(), s);
        let half = rescale(&s, 0.5).unwrap();
        assert_eq!(half.values(), vec![5.0, 15.0]);
        assert_eq!(half.volumes(), vec![0.5, 1.0]);
        assert_eq!(half.prices(), vec![10.0, 15.0]);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(rescale(&s, bad), Err(Error::InvalidScale(_))));
        }
    }

    #[test]
    fn tick_validation() {
        assert!(TradeTick::new(1.0, 0.0).is_err());
        assert!(TradeTick::new(1.0, -2.0).is_err());
        assert!(TradeTick::new(0.0, 1.0).is_err());
        assert!(TradeTick::new(f64::NAN, 1.0).is_err());
        let t = TradeTick::new(7.5, 2.5).unwrap();
        assert_eq!(t.price(), 3.0);
        assert_eq!(t.price() * t.volume(), t.value());
    }

    #[test]
    fn window_rules() {
        assert!(AveragingWindow::with_ticks(0).is_err());
        assert!(AveragingWindow::new("w", 3, 0.0).is_err());
        let w = AveragingWindow::new("w", 4, 0.25).unwrap();
        assert_eq!(w.length(), 1.0);
        let err = TradeSeries::new("A", w, vec![TradeTick::new(1.0, 1.0).unwrap()]);
        assert!(matches!(err, Err(Error::LengthMismatch { expected: 4, actual: 1 })));
    }

    #[test]
    fn misaligned_series_are_detected() {
        let a = series(&[1.0, 2.0], &[1.0, 1.0]);
        let b = series(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        assert!(matches!(a.ensure_aligned(&b), Err(Error::WindowMismatch { .. })));
        assert!(a.ensure_aligned(&a).is_ok());
    }
}
