//! Portfolio moments and their decomposition by securities.
//!
//! The aggregated series `Q(t_i)`, `W(t_i)` is treated like any other
//! security: its VWAP is the portfolio mean price `s(t)` and its market-based
//! variance is `Φ(t)`. Expanding `Q = Σ_j c_j` and `W = Σ_j u_j` inside those
//! formulas gives the decomposition by securities,
//!
//! ```text
//! Φ(t) = 1/(1+χ²) · [ Σ_jk ψ_jk b_j b_k − 2 (Σ_jk φ_jk b_j x_k)(Σ_l b_l) + (Σ_jk χ_jk x_j x_k)(Σ_l b_l)² ]
//! ```
//!
//! with `b_j = p_j(t) x_j(t0)` for prices. For returns `b_j = R_j(t,t0) X_j(t0)`
//! and the result is `Θ(t,t0) = Φ(t) / s²(t0)`. Volume-indexed factors always
//! carry share weights `x`, value-indexed factors carry `b`. The sums are
//! evaluated as matrix contractions instead of the O(J⁴) loops.
//!
//! Under constant trade volumes `φ_jk = χ_jk = 0` and both variances reduce to
//! quadratic forms in the weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{asymmetry, PairMatrix};
use crate::portfolio::{Portfolio, PortfolioSeries};
use crate::security::{check_reference_price, settle_variance, vwap};
use crate::trade::{covariance, mean, raw_moment_of};

/// Relative tolerance for algebraic identities over quartic sums.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for simple two-route identities.
pub const DUAL_PATH_TOLERANCE: f64 = 1e-12;

/// Market-based moments of the aggregated portfolio series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats {
    /// `s(t)`
    pub mean_price: f64,
    /// `Φ(t)`
    pub price_variance: f64,
    /// `R(t,t0) = s(t) / s(t0)`
    pub mean_return: f64,
    /// `Θ(t,t0)`
    pub return_variance: f64,
    pub composition_price: f64,
    pub mean_value: f64,
    pub mean_volume: f64,
    pub value_variance: f64,
    pub volume_variance: f64,
    pub value_volume_cov: f64,
    pub second_volume_moment: f64,
    /// `ψ²(t) = Ψ_Q / Q²(t;1)`
    pub value_dispersion: f64,
    /// `χ²(t) = Ψ_W / W²(t;1)`
    pub volume_dispersion: f64,
    /// `φ(t) = cov{Q,W} / (Q(t;1) W(t;1))`
    pub value_volume_coefficient: f64,
    /// `Q_0(t_i,t0) = s(t0) W(t_i)`
    pub past_values: Vec<f64>,
    pub past_value_variance: f64,
    pub current_past_cov: f64,
    pub second_past_moment: f64,
}

impl PortfolioStats {
    /// Computes all moments and cross-checks `Φ` along three routes: value and
    /// volume moments, coefficients of variation, and the direct weighted sum.
    pub fn compute(ps: &PortfolioSeries) -> Result<Self> {
        let q = ps.aggregate_values();
        let w = ps.aggregate_volumes();
        let s0 = ps.composition_price;
        check_reference_price(s0)?;

        let mean_price = q.iter().sum::<f64>() / ps.total_holdings;
        let mean_value = mean(&q)?;
        let mean_volume = mean(&w)?;
        let value_variance = covariance(&q, &q)?;
        let volume_variance = covariance(&w, &w)?;
        let value_volume_cov = covariance(&q, &w)?;
        let second_volume_moment = raw_moment_of(&w, 2)?;

        let from_moments = (value_variance + mean_price * mean_price * volume_variance
            - 2.0 * mean_price * value_volume_cov)
            / second_volume_moment;

        let value_dispersion = value_variance / (mean_value * mean_value);
        let volume_dispersion = volume_variance / (mean_volume * mean_volume);
        let value_volume_coefficient = value_volume_cov / (mean_value * mean_volume);
        let from_coefficients = (value_dispersion - 2.0 * value_volume_coefficient
            + volume_dispersion)
            / (1.0 + volume_dispersion)
            * mean_price
            * mean_price;

        let (num, den) = q.iter().zip(&w).fold((0.0, 0.0), |(n, d), (qi, wi)| {
            let dev = qi / wi - mean_price;
            (n + dev * dev * wi * wi, d + wi * wi)
        });
        let from_weighted_sum = num / den;

        let scale = mean_price * mean_price;
        for (quantity, other) in [
            ("portfolio price variance (coefficient form)", from_coefficients),
            ("portfolio price variance (weighted sum)", from_weighted_sum),
        ] {
            if (from_moments - other).abs()
                > IDENTITY_TOLERANCE * from_moments.abs().max(other.abs()) + DUAL_PATH_TOLERANCE * scale
            {
                return Err(Error::InternalInconsistency {
                    quantity,
                    left: from_moments,
                    right: other,
                });
            }
        }
        let price_variance = settle_variance(from_moments, scale, "portfolio price variance")?;

        let mean_return = mean_price / s0;
        let past_values: Vec<f64> = w.iter().map(|wi| s0 * wi).collect();
        let past_value_variance = covariance(&past_values, &past_values)?;
        let current_past_cov = covariance(&q, &past_values)?;
        let second_past_moment = raw_moment_of(&past_values, 2)?;
        let r = mean_return;
        let raw_theta = (value_variance + r * r * past_value_variance - 2.0 * r * current_past_cov)
            / second_past_moment;
        let return_variance = settle_variance(raw_theta, r * r, "portfolio return variance")?;

        Ok(Self {
            mean_price,
            price_variance,
            mean_return,
            return_variance,
            composition_price: s0,
            mean_value,
            mean_volume,
            value_variance,
            volume_variance,
            value_volume_cov,
            second_volume_moment,
            value_dispersion,
            volume_dispersion,
            value_volume_coefficient,
            past_values,
            past_value_variance,
            current_past_cov,
            second_past_moment,
        })
    }

    /// `Θ` through `Φ / s²(t0)`.
    pub fn return_variance_from_price(&self) -> f64 {
        self.price_variance / (self.composition_price * self.composition_price)
    }

    /// `[ψ² − 2φ + χ²] / (1 + χ²) · R²`
    pub fn return_variance_from_coefficients(&self) -> f64 {
        (self.value_dispersion - 2.0 * self.value_volume_coefficient + self.volume_dispersion)
            / (1.0 + self.volume_dispersion)
            * self.mean_return
            * self.mean_return
    }
}

/// `s(t) = Q_Σ(t;1) / W_Σ(t0)`.
pub fn portfolio_mean_price(ps: &PortfolioSeries) -> f64 {
    ps.aggregate.values().iter().sum::<f64>() / ps.total_holdings
}

/// `s(t) = Σ_j p_j(t) x_j(t0)`.
pub fn mean_price_decomposition(portfolio: &Portfolio, mean_prices: &[f64]) -> Result<f64> {
    check_len(portfolio.len(), mean_prices.len())?;
    Ok(mean_prices
        .iter()
        .zip(&portfolio.share_weights)
        .map(|(p, x)| p * x)
        .sum())
}

pub fn portfolio_price_variance(ps: &PortfolioSeries) -> Result<(f64, PortfolioStats)> {
    let stats = PortfolioStats::compute(ps)?;
    Ok((stats.price_variance, stats))
}

/// Portfolio mean return computed directly and as a value-weighted average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanReturn {
    /// `s(t) / s(t0)`
    pub direct: f64,
    /// `Σ_j R_j(t,t0) X_j(t0)`
    pub decomposed: f64,
}

/// Mean gross returns `R_j(t,t0) = p_j(t) / p_j(t0)` of the components.
pub fn component_mean_returns(portfolio: &Portfolio, ps: &PortfolioSeries) -> Result<Vec<f64>> {
    check_len(portfolio.len(), ps.normalized.len())?;
    ps.normalized
        .iter()
        .zip(&portfolio.composition_prices)
        .map(|(s, &p0)| {
            check_reference_price(p0)?;
            Ok(vwap(s) / p0)
        })
        .collect()
}

pub fn portfolio_mean_return(portfolio: &Portfolio, ps: &PortfolioSeries) -> Result<MeanReturn> {
    check_reference_price(portfolio.price)?;
    let returns = component_mean_returns(portfolio, ps)?;
    Ok(MeanReturn {
        direct: portfolio_mean_price(ps) / portfolio.price,
        decomposed: returns
            .iter()
            .zip(&portfolio.value_weights)
            .map(|(r, w)| r * w)
            .sum(),
    })
}

/// `Θ(t,t0)` from past values; fails if it disagrees with `Φ / s²(t0)`.
pub fn portfolio_return_variance(portfolio: &Portfolio, ps: &PortfolioSeries) -> Result<f64> {
    check_reference_price(portfolio.price)?;
    let stats = PortfolioStats::compute(ps)?;
    let via_price = stats.return_variance_from_price();
    let scale = stats.mean_return * stats.mean_return;
    if (stats.return_variance - via_price).abs()
        > IDENTITY_TOLERANCE * stats.return_variance.abs().max(via_price.abs())
            + DUAL_PATH_TOLERANCE * scale
    {
        return Err(Error::InternalInconsistency {
            quantity: "portfolio return variance",
            left: stats.return_variance,
            right: via_price,
        });
    }
    Ok(stats.return_variance)
}

/// Which portfolio variance a decomposition expands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// Factors `p_j(t)`, weights `x_j(t0)`.
    Price,
    /// Factors `R_j(t,t0)`, weights `X_j(t0)`.
    Return,
}

/// Quartic decomposition of a portfolio variance.
///
/// `cubic` already includes its `−2` factor, so
/// `total = prefactor · (quadratic + cubic + quartic)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub basis: Basis,
    pub factors: Vec<f64>,
    pub weights: Vec<f64>,
    pub volume_weights: Vec<f64>,
    pub quadratic: f64,
    pub cubic: f64,
    pub quartic: f64,
    /// `χ²(t)`
    pub volume_dispersion: f64,
    /// `1 / (1 + χ²(t))`
    pub prefactor: f64,
    pub total: f64,
}

impl VarianceDecomposition {
    /// Contributions after applying the prefactor.
    pub fn scaled_terms(&self) -> [f64; 3] {
        [
            self.prefactor * self.quadratic,
            self.prefactor * self.cubic,
            self.prefactor * self.quartic,
        ]
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

fn evaluate(
    basis: Basis,
    pairs: &PairMatrix,
    factors: &[f64],
    weights: &[f64],
    volume_weights: &[f64],
    volume_dispersion: f64,
) -> Result<VarianceDecomposition> {
    let j = pairs.len();
    check_len(j, factors.len())?;
    check_len(j, weights.len())?;
    check_len(j, volume_weights.len())?;
    let b = DVector::from_iterator(j, factors.iter().zip(weights).map(|(a, w)| a * w));
    let x = DVector::from_column_slice(volume_weights);
    let level: f64 = b.sum();

    let quadratic = b.dot(&(&pairs.value_value * &b));
    let cubic = -2.0 * b.dot(&(&pairs.value_volume * &x)) * level;
    let quartic = x.dot(&(&pairs.volume_volume * &x)) * level * level;
    let prefactor = 1.0 / (1.0 + volume_dispersion);
    Ok(VarianceDecomposition {
        basis,
        factors: factors.to_vec(),
        weights: weights.to_vec(),
        volume_weights: volume_weights.to_vec(),
        quadratic,
        cubic,
        quartic,
        volume_dispersion,
        prefactor,
        total: prefactor * (quadratic + cubic + quartic),
    })
}

/// Quartic decomposition of `Φ(t)` in the share weights `x_j(t0)`.
///
/// `pairs` must be computed on the normalized series; `volume_dispersion` is
/// the portfolio `χ²(t)` from the aggregated volumes.
pub fn price_variance_decomposition(
    portfolio: &Portfolio,
    pairs: &PairMatrix,
    mean_prices: &[f64],
    volume_dispersion: f64,
) -> Result<VarianceDecomposition> {
    check_len(portfolio.len(), pairs.len())?;
    evaluate(
        Basis::Price,
        pairs,
        mean_prices,
        &portfolio.share_weights,
        &portfolio.share_weights,
        volume_dispersion,
    )
}

/// Quartic decomposition of `Θ(t,t0)` in the value weights `X_j(t0)`.
pub fn return_variance_decomposition(
    portfolio: &Portfolio,
    pairs: &PairMatrix,
    mean_returns: &[f64],
    volume_dispersion: f64,
) -> Result<VarianceDecomposition> {
    check_len(portfolio.len(), pairs.len())?;
    evaluate(
        Basis::Return,
        pairs,
        mean_returns,
        &portfolio.value_weights,
        &portfolio.share_weights,
        volume_dispersion,
    )
}

/// `Σ_jk χ_jk x_j x_k`, which equals the portfolio `χ²(t)`.
pub fn volume_dispersion_from_components(pairs: &PairMatrix, share_weights: &[f64]) -> Result<f64> {
    check_len(pairs.len(), share_weights.len())?;
    let x = DVector::from_column_slice(share_weights);
    Ok(x.dot(&(&pairs.volume_volume * &x)))
}

/// Classical quadratic form `Σ_jk θ_jk X_j X_k`.
pub fn markowitz_variance(theta: &DMatrix<f64>, weights: &[f64]) -> Result<f64> {
    if !theta.is_square() {
        return Err(Error::DimensionMismatch {
            expected: theta.nrows(),
            actual: theta.ncols(),
        });
    }
    check_len(theta.nrows(), weights.len())?;
    if asymmetry(theta) > DUAL_PATH_TOLERANCE {
        let (mut row, mut col, mut gap) = (0, 0, 0.0);
        for a in 0..theta.nrows() {
            for b in (a + 1)..theta.ncols() {
                let g = (theta[(a, b)] - theta[(b, a)]).abs();
                if g > gap {
                    (row, col, gap) = (a, b, g);
                }
            }
        }
        return Err(Error::AsymmetricMatrix { row, col, gap });
    }
    let x = DVector::from_column_slice(weights);
    Ok(x.dot(&(theta * &x)))
}

/// Per-tick portfolio return via the component decomposition and directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTradeReturn {
    pub tick: usize,
    /// `Σ_j R_j(t_i,t0) X_j(t0) · u_j(t_i) W_Σ(t0) / (W(t_i) U_j(t0))`
    pub decomposed: f64,
    /// `Q(t_i) / (s(t0) W(t_i))`
    pub direct: f64,
    /// `u_j(t_i) W_Σ(t0) / (W(t_i) U_j(t0))` per security.
    pub correction_factors: Vec<f64>,
}

/// Return of the portfolio trade at tick `tick` (0-based).
pub fn per_trade_portfolio_return(
    portfolio: &Portfolio,
    ps: &PortfolioSeries,
    tick: usize,
) -> Result<PerTradeReturn> {
    let n = ps.tick_count();
    if tick >= n {
        return Err(Error::TickOutOfRange { index: tick, len: n });
    }
    check_len(portfolio.len(), ps.normalized.len())?;
    check_reference_price(portfolio.price)?;
    let agg = ps.aggregate.ticks()[tick];
    let w_i = agg.volume();

    let mut decomposed = 0.0;
    let mut correction_factors = Vec::with_capacity(portfolio.len());
    for (j, s) in ps.normalized.iter().enumerate() {
        let t = s.ticks()[tick];
        let r = t.price() / portfolio.composition_prices[j];
        let factor = t.volume() * portfolio.total_volume / (w_i * portfolio.holdings[j]);
        decomposed += r * portfolio.value_weights[j] * factor;
        correction_factors.push(factor);
    }
    Ok(PerTradeReturn {
        tick,
        decomposed,
        direct: agg.value() / (portfolio.price * w_i),
        correction_factors,
    })
}

/// Checks the decomposition identity for an arbitrary basis; used by callers
/// that want an error rather than a number.
pub fn ensure_matches(decomposition: &VarianceDecomposition, direct: f64, scale: f64) -> Result<()> {
    let total = decomposition.total;
    if (total - direct).abs() > IDENTITY_TOLERANCE * total.abs().max(direct.abs()) + DUAL_PATH_TOLERANCE * scale {
        return Err(Error::InternalInconsistency {
            quantity: match decomposition.basis {
                Basis::Price => "price variance decomposition",
                Basis::Return => "return variance decomposition",
            },
            left: total,
            right: direct,
        });
    }
    Ok(())
}
