//! End-to-end analysis of a portfolio over one averaging window.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomposition::{
    component_mean_returns, markowitz_variance, mean_price_decomposition, per_trade_portfolio_return,
    price_variance_decomposition, return_variance_decomposition, volume_dispersion_from_components,
    PerTradeReturn, PortfolioStats, VarianceDecomposition, DUAL_PATH_TOLERANCE, IDENTITY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::pair::PairMatrix;
use crate::portfolio::{aggregate, Portfolio, DEFAULT_LIQUIDITY_FACTOR};
use crate::security::{
    frequency_mean_price, frequency_price_variance, frequency_return_variance, ReturnStats,
    SecurityStats,
};
use crate::trade::TradeSeries;
use crate::verify::campaign::{Check, ROUNDING_FLOOR};
use crate::verify::oracle::{portfolio_moments, relative_error};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub identity_tolerance: f64,
    pub dual_path_tolerance: f64,
    pub liquidity_factor: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            identity_tolerance: IDENTITY_TOLERANCE,
            dual_path_tolerance: DUAL_PATH_TOLERANCE,
            liquidity_factor: DEFAULT_LIQUIDITY_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub security_id: String,
    pub holding: f64,
    pub composition_price: f64,
    pub share_weight: f64,
    pub value_weight: f64,
    /// Factor applied to the traded volume to match the holding.
    pub scale: f64,
    pub mean_price: f64,
    pub price_variance: f64,
    pub mean_return: f64,
    pub return_variance: f64,
    pub frequency_mean_price: f64,
    pub frequency_price_variance: f64,
    pub frequency_return_variance: f64,
}

/// `ψ_jk`, `φ_jk` and `χ_jk` for all ordered pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrices {
    pub value_value: Vec<Vec<f64>>,
    pub value_volume: Vec<Vec<f64>>,
    pub volume_volume: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub composition_price: f64,
    pub total_value: f64,
    pub total_holdings: f64,
    pub mean_price: f64,
    pub price_variance: f64,
    pub mean_return: f64,
    pub return_variance: f64,
    pub value_dispersion: f64,
    pub volume_dispersion: f64,
    pub value_volume_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tick_count: usize,
    pub securities: Vec<SecurityReport>,
    pub price_covariance: Vec<Vec<f64>>,
    pub return_covariance: Vec<Vec<f64>>,
    pub frequency_return_covariance: Vec<Vec<f64>>,
    pub coefficients: CoefficientMatrices,
    pub price_covariance_psd: bool,
    pub portfolio: PortfolioReport,
    pub price_decomposition: VarianceDecomposition,
    pub return_decomposition: VarianceDecomposition,
    pub per_trade_returns: Vec<PerTradeReturn>,
    pub markowitz_variance: f64,
    /// `(Θ − Θ_markowitz) / Θ`; absent when `Θ` is zero.
    pub markowitz_discrepancy: Option<f64>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

pub fn analyze(series: &[TradeSeries], portfolio: &Portfolio, options: &AnalysisOptions) -> Result<AnalysisReport> {
    let ps = aggregate(portfolio, series, options.liquidity_factor)?;
    let raw: Vec<TradeSeries> = portfolio
        .security_ids
        .iter()
        .map(|id| {
            series
                .iter()
                .find(|s| s.security_id() == id)
                .cloned()
                .ok_or_else(|| Error::SecuritySetMismatch(format!("no trades for '{id}'")))
        })
        .collect::<Result<_>>()?;
    let p0s = &portfolio.composition_prices;

    let mut securities = Vec::with_capacity(raw.len());
    for (j, s) in raw.iter().enumerate() {
        let stats = SecurityStats::compute(s)?;
        let ret = ReturnStats::compute(s, p0s[j])?;
        securities.push(SecurityReport {
            security_id: s.security_id().to_owned(),
            holding: portfolio.holdings[j],
            composition_price: p0s[j],
            share_weight: portfolio.share_weights[j],
            value_weight: portfolio.value_weights[j],
            scale: ps.scales[j],
            mean_price: stats.mean_price,
            price_variance: stats.price_variance,
            mean_return: ret.mean_gross_return,
            return_variance: ret.return_variance,
            frequency_mean_price: frequency_mean_price(s),
            frequency_price_variance: frequency_price_variance(s),
            frequency_return_variance: frequency_return_variance(s, p0s[j])?,
        });
    }

    let raw_pairs = PairMatrix::compute(&raw)?;
    let pairs = PairMatrix::compute(&ps.normalized)?;
    let theta = raw_pairs.return_cov(p0s)?;
    let frequency_theta = raw_pairs.frequency_return_cov(p0s)?;

    let stats = PortfolioStats::compute(&ps)?;
    let oracle = portfolio_moments(&ps.aggregate.values(), &ps.aggregate.volumes(), portfolio.price)?;
    let chi2 = stats.volume_dispersion;
    let price_decomposition = price_variance_decomposition(portfolio, &pairs, &pairs.mean_prices, chi2)?;
    let returns = component_mean_returns(portfolio, &ps)?;
    let return_decomposition = return_variance_decomposition(portfolio, &pairs, &returns, chi2)?;
    let per_trade_returns = (0..ps.tick_count())
        .map(|i| per_trade_portfolio_return(portfolio, &ps, i))
        .collect::<Result<Vec<_>>>()?;

    let markowitz = markowitz_variance(&frequency_theta, &portfolio.value_weights)?;
    let markowitz_discrepancy =
        (stats.return_variance != 0.0).then(|| (stats.return_variance - markowitz) / stats.return_variance);

    let (id_tol, dual_tol) = (options.identity_tolerance, options.dual_path_tolerance);
    let price_scale = stats.mean_price * stats.mean_price;
    let return_scale = stats.mean_return * stats.mean_return;
    let mut checks = vec![
        Check::new("price_variance.oracle", stats.price_variance, oracle.price_variance, dual_tol, ROUNDING_FLOOR * price_scale),
        Check::new("return_variance.oracle", stats.return_variance, oracle.return_variance, dual_tol, ROUNDING_FLOOR * return_scale),
        Check::new("return_variance.from_price", stats.return_variance_from_price(), stats.return_variance, dual_tol, ROUNDING_FLOOR * return_scale),
        Check::strict("mean_price.decomposed", mean_price_decomposition(portfolio, &pairs.mean_prices)?, oracle.mean_price, dual_tol),
        Check::strict(
            "mean_return.decomposed",
            returns.iter().zip(&portfolio.value_weights).map(|(r, x)| r * x).sum(),
            oracle.mean_return,
            dual_tol,
        ),
        Check::new(
            "volume_dispersion.components",
            volume_dispersion_from_components(&pairs, &portfolio.share_weights)?,
            chi2,
            dual_tol,
            ROUNDING_FLOOR,
        ),
        Check::new("price_variance.decomposed", price_decomposition.total, oracle.price_variance, id_tol, ROUNDING_FLOOR * price_scale),
        Check::new("return_variance.decomposed", return_decomposition.total, oracle.return_variance, id_tol, ROUNDING_FLOOR * return_scale),
        Check::new("price_covariance.asymmetry", raw_pairs.price_cov_asymmetry(), 0.0, dual_tol, dual_tol * price_scale.max(1.0)),
    ];
    if let Some(worst) = per_trade_returns
        .iter()
        .max_by(|a, b| relative_error(a.decomposed, a.direct).total_cmp(&relative_error(b.decomposed, b.direct)))
    {
        checks.push(Check::strict("per_trade_return.worst_tick", worst.decomposed, worst.direct, dual_tol));
    }

    let price_covariance_psd = raw_pairs.price_cov_is_psd();
    let mut warnings: Vec<String> = ps.warnings.iter().map(ToString::to_string).collect();
    if !price_covariance_psd {
        warnings.push("price covariance matrix is not positive semidefinite".into());
    }
    let passed = checks.iter().all(|c| c.passed);

    Ok(AnalysisReport {
        tick_count: ps.tick_count(),
        securities,
        price_covariance: rows(&raw_pairs.price_cov),
        return_covariance: rows(&theta),
        frequency_return_covariance: rows(&frequency_theta),
        coefficients: CoefficientMatrices {
            value_value: rows(&pairs.value_value),
            value_volume: rows(&pairs.value_volume),
            volume_volume: rows(&pairs.volume_volume),
        },
        price_covariance_psd,
        portfolio: PortfolioReport {
            composition_price: portfolio.price,
            total_value: portfolio.total_value,
            total_holdings: portfolio.total_volume,
            mean_price: stats.mean_price,
            price_variance: stats.price_variance,
            mean_return: stats.mean_return,
            return_variance: stats.return_variance,
            value_dispersion: stats.value_dispersion,
            volume_dispersion: stats.volume_dispersion,
            value_volume_coefficient: stats.value_volume_coefficient,
        },
        price_decomposition,
        return_decomposition,
        per_trade_returns,
        markowitz_variance: markowitz,
        markowitz_discrepancy,
        checks,
        warnings,
        passed,
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Long format with columns `scope,name,value`.
    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(output);
        w.write_record(["scope", "name", "value"])?;
        let mut put = |scope: &str, name: &str, value: f64| w.write_record([scope, name, &value.to_string()]);

        for s in &self.securities {
            let scope = format!("security:{}", s.security_id);
            for (name, v) in [
                ("holding", s.holding),
                ("composition_price", s.composition_price),
                ("share_weight", s.share_weight),
                ("value_weight", s.value_weight),
                ("scale", s.scale),
                ("mean_price", s.mean_price),
                ("price_variance", s.price_variance),
                ("mean_return", s.mean_return),
                ("return_variance", s.return_variance),
                ("frequency_mean_price", s.frequency_mean_price),
                ("frequency_price_variance", s.frequency_price_variance),
                ("frequency_return_variance", s.frequency_return_variance),
            ] {
                put(&scope, name, v)?;
            }
        }
        let ids: Vec<&str> = self.securities.iter().map(|s| s.security_id.as_str()).collect();
        for (j, a) in ids.iter().enumerate() {
            for (k, b) in ids.iter().enumerate() {
                let scope = format!("pair:{a}:{b}");
                for (name, m) in [
                    ("price_covariance", &self.price_covariance),
                    ("return_covariance", &self.return_covariance),
                    ("frequency_return_covariance", &self.frequency_return_covariance),
                    ("value_value", &self.coefficients.value_value),
                    ("value_volume", &self.coefficients.value_volume),
                    ("volume_volume", &self.coefficients.volume_volume),
                ] {
                    put(&scope, name, m[j][k])?;
                }
            }
        }
        let p = &self.portfolio;
        for (name, v) in [
            ("composition_price", p.composition_price),
            ("total_value", p.total_value),
            ("total_holdings", p.total_holdings),
            ("mean_price", p.mean_price),
            ("price_variance", p.price_variance),
            ("mean_return", p.mean_return),
            ("return_variance", p.return_variance),
            ("value_dispersion", p.value_dispersion),
            ("volume_dispersion", p.volume_dispersion),
            ("value_volume_coefficient", p.value_volume_coefficient),
            ("markowitz_variance", self.markowitz_variance),
            ("markowitz_discrepancy", self.markowitz_discrepancy.unwrap_or(f64::NAN)),
            ("price_covariance_psd", f64::from(u8::from(self.price_covariance_psd))),
        ] {
            put("portfolio", name, v)?;
        }
        for (scope, d) in [
            ("decomposition:price", &self.price_decomposition),
            ("decomposition:return", &self.return_decomposition),
        ] {
            for (name, v) in [
                ("quadratic", d.quadratic),
                ("cubic", d.cubic),
                ("quartic", d.quartic),
                ("volume_dispersion", d.volume_dispersion),
                ("prefactor", d.prefactor),
                ("total", d.total),
            ] {
                put(scope, name, v)?;
            }
        }
        for r in &self.per_trade_returns {
            let scope = format!("tick:{}", r.tick + 1);
            put(&scope, "return_decomposed", r.decomposed)?;
            put(&scope, "return_direct", r.direct)?;
        }
        for c in &self.checks {
            let scope = format!("check:{}", c.name);
            put(&scope, "main", c.main)?;
            put(&scope, "oracle", c.oracle)?;
            put(&scope, "relative_error", c.relative_error)?;
            put(&scope, "passed", f64::from(u8::from(c.passed)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
