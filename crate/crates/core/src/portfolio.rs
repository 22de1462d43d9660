//! Portfolio composition and its aggregation into one synthetic trade series.
//!
//! Each security's trades are rescaled by `λ_j = U_j(t0) / Σ_i U_j(t_i)` so the
//! window's total normalized volume equals the holding. Summing normalized
//! values and volumes tick by tick gives the portfolio's own trade series
//! `Q(t_i)`, `W(t_i)` with price `s(t_i) = Q(t_i) / W(t_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trade::{rescale, total, Field, TradeSeries, TradeTick};

/// Security id given to the aggregated portfolio series.
pub const PORTFOLIO_ID: &str = "portfolio";

/// Default liquidity factor: warn when window volume < 10 × holding.
pub const DEFAULT_LIQUIDITY_FACTOR: f64 = 10.0;

/// Holdings fixed at composition time `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub security_ids: Vec<String>,
    pub holdings: Vec<f64>,
    pub composition_prices: Vec<f64>,
    pub values: Vec<f64>,
    pub total_value: f64,
    pub total_volume: f64,
    /// `s(t0) = Q_Σ(t0) / W_Σ(t0)`
    pub price: f64,
    /// `x_j = U_j(t0) / W_Σ(t0)`
    pub share_weights: Vec<f64>,
    /// `X_j = C_j(t0) / Q_Σ(t0)`
    pub value_weights: Vec<f64>,
}

impl Portfolio {
    pub fn compose<S: AsRef<str>>(
        security_ids: &[S],
        holdings: &[f64],
        composition_prices: &[f64],
    ) -> Result<Self> {
        if security_ids.is_empty() {
            return Err(Error::EmptyPortfolio);
        }
        for len in [holdings.len(), composition_prices.len()] {
            if len != security_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: security_ids.len(),
                    actual: len,
                });
            }
        }
        let ids: Vec<String> = security_ids.iter().map(|s| s.as_ref().to_owned()).collect();
        for (idx, id) in ids.iter().enumerate() {
            if ids[..idx].contains(id) {
                return Err(Error::InvalidHolding {
                    security: id.clone(),
                    reason: "duplicate security".into(),
                });
            }
            let (u, p) = (holdings[idx], composition_prices[idx]);
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::InvalidHolding {
                    security: id.clone(),
                    reason: format!("holding must be > 0, got {u}"),
                });
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidHolding {
                    security: id.clone(),
                    reason: format!("price at t0 must be > 0, got {p}"),
                });
            }
        }

        let values: Vec<f64> = holdings
            .iter()
            .zip(composition_prices)
            .map(|(u, p)| u * p)
            .collect();
        let total_value: f64 = values.iter().sum();
        let total_volume: f64 = holdings.iter().sum();
        Ok(Self {
            security_ids: ids,
            holdings: holdings.to_vec(),
            composition_prices: composition_prices.to_vec(),
            price: total_value / total_volume,
            share_weights: holdings.iter().map(|u| u / total_volume).collect(),
            value_weights: values.iter().map(|c| c / total_value).collect(),
            values,
            total_value,
            total_volume,
        })
    }

    pub fn len(&self) -> usize {
        self.security_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.security_ids.is_empty()
    }

    pub fn index_of(&self, security_id: &str) -> Option<usize> {
        self.security_ids.iter().position(|s| s == security_id)
    }
}

/// Raised when a window's traded volume is not much larger than the holding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiquidityWarning {
    pub security_id: String,
    pub traded_volume: f64,
    pub holding: f64,
    pub factor: f64,
}

impl std::fmt::Display for LiquidityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "security '{}': traded volume {} is below {} x holding {}",
            self.security_id, self.traded_volume, self.factor, self.holding
        )
    }
}

/// A series rescaled so its total volume equals the holding.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    pub scale: f64,
    pub series: TradeSeries,
    pub warning: Option<LiquidityWarning>,
}

/// Rescales `series` by `λ = holding / Σ U(t_i)`.
pub fn normalize_to_holdings(
    series: &TradeSeries,
    holding: f64,
    liquidity_factor: f64,
) -> Result<NormalizedSeries> {
    if !(holding.is_finite() && holding > 0.0) {
        return Err(Error::InvalidHolding {
            security: series.security_id().to_owned(),
            reason: format!("holding must be > 0, got {holding}"),
        });
    }
    let traded = total(series, Field::Volume);
    if traded.is_nan() || traded <= 0.0 {
        return Err(Error::ZeroTradedVolume(series.security_id().to_owned()));
    }
    let scale = holding / traded;
    let warning = (traded < liquidity_factor * holding).then(|| LiquidityWarning {
        security_id: series.security_id().to_owned(),
        traded_volume: traded,
        holding,
        factor: liquidity_factor,
    });
    Ok(NormalizedSeries {
        scale,
        series: rescale(series, scale)?,
        warning,
    })
}

/// Normalized component series plus the aggregated portfolio series.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    /// In portfolio order.
    pub normalized: Vec<TradeSeries>,
    pub scales: Vec<f64>,
    /// Values `Q(t_i)`, volumes `W(t_i)`.
    pub aggregate: TradeSeries,
    /// `W_Σ(t0)`
    pub total_holdings: f64,
    /// `s(t0)`
    pub composition_price: f64,
    pub warnings: Vec<LiquidityWarning>,
}

impl PortfolioSeries {
    pub fn aggregate_values(&self) -> Vec<f64> {
        self.aggregate.values()
    }

    pub fn aggregate_volumes(&self) -> Vec<f64> {
        self.aggregate.volumes()
    }

    /// `s(t_i)`
    pub fn aggregate_prices(&self) -> Vec<f64> {
        self.aggregate.prices()
    }

    pub fn tick_count(&self) -> usize {
        self.aggregate.len()
    }
}

/// Normalizes every series to its holding and sums them tick by tick.
///
/// `raw_series` may come in any order; it is matched to the portfolio by id.
pub fn aggregate(
    portfolio: &Portfolio,
    raw_series: &[TradeSeries],
    liquidity_factor: f64,
) -> Result<PortfolioSeries> {
    let ordered = order_by_portfolio(portfolio, raw_series)?;
    let first = ordered[0];
    for s in &ordered[1..] {
        first.ensure_aligned(s)?;
    }

    let mut normalized = Vec::with_capacity(ordered.len());
    let mut scales = Vec::with_capacity(ordered.len());
    let mut warnings = Vec::new();
    for (s, &holding) in ordered.iter().zip(&portfolio.holdings) {
        let n = normalize_to_holdings(s, holding, liquidity_factor)?;
        scales.push(n.scale);
        warnings.extend(n.warning);
        normalized.push(n.series);
    }

    let ticks = (0..first.len())
        .map(|i| {
            let (q, w) = normalized.iter().fold((0.0, 0.0), |(q, w), s| {
                let t = s.ticks()[i];
                (q + t.value(), w + t.volume())
            });
            TradeTick::new(q, w)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = TradeSeries::new(PORTFOLIO_ID, first.window().clone(), ticks)?;

    Ok(PortfolioSeries {
        normalized,
        scales,
        aggregate,
        total_holdings: portfolio.total_volume,
        composition_price: portfolio.price,
        warnings,
    })
}

fn order_by_portfolio<'a>(
    portfolio: &Portfolio,
    raw_series: &'a [TradeSeries],
) -> Result<Vec<&'a TradeSeries>> {
    let mut slots: Vec<Option<&TradeSeries>> = vec![None; portfolio.len()];
    for s in raw_series {
        let idx = portfolio.index_of(s.security_id()).ok_or_else(|| {
            Error::SecuritySetMismatch(format!("series '{}' is not in the portfolio", s.security_id()))
        })?;
        if slots[idx].replace(s).is_some() {
            return Err(Error::SecuritySetMismatch(format!(
                "duplicate series for '{}'",
                s.security_id()
            )));
        }
    }
    slots
        .into_iter()
        .zip(&portfolio.security_ids)
        .map(|(slot, id)| {
            slot.ok_or_else(|| Error::SecuritySetMismatch(format!("no series for holding '{id}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn compose_examples() {
        let single = Portfolio::compose(&["A"], &[10.0], &[2.0]).unwrap();
        assert_eq!(single.price, 2.0);
        assert_eq!(single.share_weights, vec![1.0]);
        assert_eq!(single.value_weights, vec![1.0]);

        let even = Portfolio::compose(&["A", "B"], &[1.0, 3.0], &[4.0, 4.0]).unwrap();
        assert_eq!(even.price, 4.0);
        assert_eq!(even.share_weights, vec![0.25, 0.75]);
        assert_eq!(even.value_weights, vec![0.25, 0.75]);

        let p = Portfolio::compose(&["A", "B"], &[2.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(p.total_value, 8.0);
        assert_eq!(p.total_volume, 4.0);
        assert_eq!(p.price, 2.0);
        assert_eq!(p.share_weights, vec![0.5, 0.5]);
        assert_eq!(p.value_weights, vec![0.25, 0.75]);
        let s: f64 = p.composition_prices.iter().zip(&p.share_weights).map(|(a, b)| a * b).sum();
        assert_eq!(s, p.price);
        for j in 0..2 {
            assert!(rel(
                p.value_weights[j],
                p.composition_prices[j] * p.holdings[j] / (p.price * p.total_volume)
            ) < 1e-15);
        }
    }

    #[test]
    fn compose_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(Portfolio::compose(&empty, &[], &[]), Err(Error::EmptyPortfolio)));
        assert!(Portfolio::compose(&["A"], &[0.0], &[1.0]).is_err());
        assert!(Portfolio::compose(&["A"], &[-1.0], &[1.0]).is_err());
        assert!(Portfolio::compose(&["A"], &[1.0], &[0.0]).is_err());
        assert!(Portfolio::compose(&["A", "A"], &[1.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(Portfolio::compose(&["A", "B"], &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let s = TradeSeries::from_columns("A", &[10.0, 20.0, 20.0, 5.0, 5.0], &[10.0; 5]).unwrap();
        let n = normalize_to_holdings(&s, 5.0, DEFAULT_LIQUIDITY_FACTOR).unwrap();
        assert_eq!(n.scale, 0.1);
        assert!(rel(total(&n.series, Field::Volume), 5.0) < 1e-15);
        assert!(n.warning.is_none());

        let same = normalize_to_holdings(&s, 50.0, DEFAULT_LIQUIDITY_FACTOR).unwrap();
        assert_eq!(same.scale, 1.0);
        assert_eq!(same.series, s);
        assert!(same.warning.is_some());

        let t = TradeSeries::from_columns("B", &[3.0, 4.0, 8.0], &[1.0, 2.0, 2.0]).unwrap();
        let n = normalize_to_holdings(&t, 10.0, DEFAULT_LIQUIDITY_FACTOR).unwrap();
        assert_eq!(n.scale, 2.0);
        assert_eq!(n.series.volumes(), vec![2.0, 4.0, 4.0]);
        assert_eq!(n.series.prices(), t.prices());

        let again = normalize_to_holdings(&n.series, 10.0, DEFAULT_LIQUIDITY_FACTOR).unwrap();
        assert_eq!(again.scale, 1.0);
    }

    #[test]
    fn aggregate_single_security() {
        let p = Portfolio::compose(&["A"], &[3.0], &[5.0]).unwrap();
        let s = TradeSeries::from_columns("A", &[10.0, 30.0, 4.0], &[1.0, 2.0, 0.5]).unwrap();
        let ps = aggregate(&p, std::slice::from_ref(&s), DEFAULT_LIQUIDITY_FACTOR).unwrap();
        assert_eq!(ps.aggregate.values(), ps.normalized[0].values());
        assert_eq!(ps.aggregate.volumes(), ps.normalized[0].volumes());
        for (a, b) in ps.aggregate_prices().iter().zip(s.prices()) {
            assert!(rel(*a, b) < 1e-15);
        }
    }

    #[test]
    fn aggregate_equal_prices() {
        let p = Portfolio::compose(&["A", "B"], &[3.0, 1.0], &[7.0, 7.0]).unwrap();
        let a = TradeSeries::from_columns("A", &[7.0, 14.0, 3.5], &[1.0, 2.0, 0.5]).unwrap();
        let b = TradeSeries::from_columns("B", &[21.0, 7.0, 70.0], &[3.0, 1.0, 10.0]).unwrap();
        let ps = aggregate(&p, &[b, a], DEFAULT_LIQUIDITY_FACTOR).unwrap();
        for s in ps.aggregate_prices() {
            assert!(rel(s, 7.0) < 1e-15);
        }
        assert_eq!(ps.normalized[0].security_id(), "A");
    }

    #[test]
    fn aggregate_worked_instance() {
        // U = (2, 2), p0 = (1, 3); both scales are 2/3.
        let p = Portfolio::compose(&["A", "B"], &[2.0, 2.0], &[1.0, 3.0]).unwrap();
        let a = TradeSeries::from_columns("A", &[10.0, 30.0], &[1.0, 2.0]).unwrap();
        let b = TradeSeries::from_columns("B", &[8.0, 8.0], &[2.0, 1.0]).unwrap();
        let ps = aggregate(&p, &[a, b], 0.0).unwrap();
        let q = ps.aggregate_values();
        let w = ps.aggregate_volumes();
        let s = ps.aggregate_prices();
        let expected_q = [12.0, 76.0 / 3.0];
        let expected_s = [6.0, 38.0 / 3.0];
        for i in 0..2 {
            assert!(rel(q[i], expected_q[i]) < 1e-15);
            assert!(rel(w[i], 2.0) < 1e-15);
            assert!(rel(s[i], expected_s[i]) < 1e-15);
        }
        assert!(rel(w.iter().sum(), p.total_volume) < 1e-15);
        assert!(ps.warnings.is_empty());
    }

    #[test]
    fn aggregate_rejects_mismatches() {
        let p = Portfolio::compose(&["A", "B"], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let a = TradeSeries::from_columns("A", &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        let b = TradeSeries::from_columns("B", &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        let c = TradeSeries::from_columns("C", &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        let short = TradeSeries::from_columns("B", &[1.0], &[1.0]).unwrap();
        assert!(matches!(aggregate(&p, std::slice::from_ref(&a), 10.0), Err(Error::SecuritySetMismatch(_))));
        assert!(matches!(
            aggregate(&p, &[a.clone(), b.clone(), c], 10.0),
            Err(Error::SecuritySetMismatch(_))
        ));
        assert!(matches!(aggregate(&p, &[a.clone(), a.clone()], 10.0), Err(Error::SecuritySetMismatch(_))));
        assert!(matches!(aggregate(&p, &[a, short], 10.0), Err(Error::WindowMismatch { .. })));
    }
}
