//! Randomized identity campaign.
//!
//! Each instance is a small synthetic market. The main computation path runs
//! on it and every identity is compared against the oracle or against a
//! second algebraic route. Failures are recorded rather than raised so a
//! campaign always produces a complete report.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{
    component_mean_returns, markowitz_variance, mean_price_decomposition, per_trade_portfolio_return,
    portfolio_mean_price, price_variance_decomposition, return_variance_decomposition,
    volume_dispersion_from_components, PortfolioStats, VarianceDecomposition, DUAL_PATH_TOLERANCE,
    IDENTITY_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::pair::{
    price_covariance_normalized_form, return_covariance_past_value_form, PairMatrix, PairStats,
};
use crate::portfolio::{aggregate, Portfolio, PortfolioSeries, DEFAULT_LIQUIDITY_FACTOR};
use crate::security::{price_variance, return_variance, vwap};
use crate::synthetic::{generate_synthetic, SyntheticSpec, VolumeMode};
use crate::trade::TradeSeries;

use super::frequency::frequency_moment_suite;
use super::oracle::{portfolio_moments, relative_error, weighted_price_covariance, weighted_price_variance};

/// Absolute slack, relative to a quantity's natural magnitude, below which a
/// difference is treated as rounding. About 45 ulps.
pub const ROUNDING_FLOOR: f64 = 1e-14;

/// A deliberate defect injected into the main path, used to show that the
/// campaign notices wrong algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    FlipCubicSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub instances: usize,
    pub seed: u64,
    pub min_securities: usize,
    pub max_securities: usize,
    pub min_ticks: usize,
    pub max_ticks: usize,
    pub value_range: [f64; 2],
    pub volume_range: [f64; 2],
    pub holding_range: [f64; 2],
    /// Every n-th instance uses constant volumes; 0 disables them.
    pub constant_volume_every: usize,
    pub fault: Option<Fault>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            seed: 42,
            min_securities: 1,
            max_securities: 5,
            min_ticks: 1,
            max_ticks: 64,
            value_range: [0.1, 10.0],
            volume_range: [0.1, 10.0],
            holding_range: [1.0, 100.0],
            constant_volume_every: 4,
            fault: None,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::EmptyCampaign);
        }
        if self.min_securities == 0 || self.min_securities > self.max_securities {
            return Err(Error::InvalidRange(format!(
                "securities range [{}, {}]",
                self.min_securities, self.max_securities
            )));
        }
        if self.min_ticks == 0 || self.min_ticks > self.max_ticks {
            return Err(Error::InvalidRange(format!(
                "ticks range [{}, {}]",
                self.min_ticks, self.max_ticks
            )));
        }
        Ok(())
    }
}

/// One comparison between the main path and a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub main: f64,
    pub oracle: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    /// Absolute difference tolerated regardless of `relative_error`.
    pub absolute_floor: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, main: f64, oracle: f64, tolerance: f64, absolute_floor: f64) -> Self {
        let relative_error = relative_error(main, oracle);
        let passed = main.is_finite()
            && oracle.is_finite()
            && (relative_error <= tolerance || (main - oracle).abs() <= absolute_floor);
        Self {
            name: name.into(),
            main,
            oracle,
            relative_error,
            tolerance,
            absolute_floor,
            passed,
        }
    }

    /// Relative error, or zero when the difference is inside the floor.
    pub fn effective_error(&self) -> f64 {
        if (self.main - self.oracle).abs() <= self.absolute_floor {
            0.0
        } else {
            self.relative_error
        }
    }

    pub fn strict(name: impl Into<String>, main: f64, oracle: f64, tolerance: f64) -> Self {
        Self::new(name, main, oracle, tolerance, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub index: usize,
    pub securities: usize,
    pub ticks: usize,
    pub seed: u64,
    pub volume_mode: VolumeMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: InstanceDescriptor,
    pub checks: Vec<Check>,
    /// Pipeline errors that prevented some checks from running.
    pub errors: Vec<String>,
    pub price_cov_psd: Option<bool>,
    pub passed: bool,
}

impl OracleReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub instances: usize,
    pub passed_instances: usize,
    pub failed_instances: usize,
    pub checks: usize,
    pub failed_checks: usize,
    pub worst_check: Option<String>,
    /// Largest relative error among differences outside their floor.
    pub worst_relative_error: f64,
    pub non_psd_instances: usize,
}

impl CampaignSummary {
    pub fn passed(&self) -> bool {
        self.failed_instances == 0
    }
}

pub fn summarize(reports: &[OracleReport]) -> CampaignSummary {
    let mut summary = CampaignSummary {
        instances: reports.len(),
        passed_instances: reports.iter().filter(|r| r.passed).count(),
        failed_instances: reports.iter().filter(|r| !r.passed).count(),
        checks: reports.iter().map(|r| r.checks.len()).sum(),
        failed_checks: reports.iter().map(|r| r.failed_checks().count()).sum(),
        worst_check: None,
        worst_relative_error: 0.0,
        non_psd_instances: reports.iter().filter(|r| r.price_cov_psd == Some(false)).count(),
    };
    for r in reports {
        for c in &r.checks {
            let e = c.effective_error();
            if e > summary.worst_relative_error || e.is_nan() {
                summary.worst_relative_error = e;
                summary.worst_check = Some(format!("instance {}: {}", r.instance.index, c.name));
            }
        }
    }
    summary
}

/// Instance layout drawn from the master seed. Instance 0 uses the fewest
/// securities and instance 1 the fewest ticks, so the degenerate corners are
/// always covered.
pub fn instance_descriptors(config: &CampaignConfig) -> Result<Vec<InstanceDescriptor>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok((0..config.instances)
        .map(|index| {
            let mut securities = rng.gen_range(config.min_securities..=config.max_securities);
            let mut ticks = rng.gen_range(config.min_ticks..=config.max_ticks);
            let seed = rng.gen::<u64>();
            match index {
                0 => securities = config.min_securities,
                1 => ticks = config.min_ticks,
                _ => {}
            }
            let every = config.constant_volume_every;
            let volume_mode = if every > 0 && index % every == every - 1 {
                VolumeMode::Constant
            } else {
                VolumeMode::Random
            };
            InstanceDescriptor {
                index,
                securities,
                ticks,
                seed,
                volume_mode,
            }
        })
        .collect())
}

pub fn randomized_identity_campaign(config: &CampaignConfig) -> Result<Vec<OracleReport>> {
    let descriptors = instance_descriptors(config)?;
    descriptors
        .into_iter()
        .map(|d| run_instance(config, d))
        .collect()
}

/// Runs one instance. Only invalid configuration is an `Err`; numerical
/// failures end up in the report.
pub fn run_instance(config: &CampaignConfig, instance: InstanceDescriptor) -> Result<OracleReport> {
    let spec = SyntheticSpec {
        securities: instance.securities,
        ticks: instance.ticks,
        seed: Some(instance.seed),
        volume_mode: instance.volume_mode,
        value_range: config.value_range,
        volume_range: config.volume_range,
        holding_range: config.holding_range,
    };
    let market = generate_synthetic(&spec)?;
    let portfolio = market.portfolio()?;

    let mut run = Run::default();
    run.security_checks(&market.series, &portfolio.composition_prices);
    run.pair_checks(&market.series, &portfolio.composition_prices);
    match aggregate(&portfolio, &market.series, DEFAULT_LIQUIDITY_FACTOR) {
        Ok(ps) => run.portfolio_checks(&portfolio, &market.series, &ps, config.fault, instance.volume_mode),
        Err(e) => run.errors.push(format!("aggregation: {e}")),
    }

    let passed = run.errors.is_empty() && run.checks.iter().all(|c| c.passed);
    Ok(OracleReport {
        instance,
        checks: run.checks,
        errors: run.errors,
        price_cov_psd: run.psd,
        passed,
    })
}

#[derive(Default)]
struct Run {
    checks: Vec<Check>,
    errors: Vec<String>,
    psd: Option<bool>,
}

impl Run {
    fn attempt<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{what}: {e}"));
                None
            }
        }
    }

    fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    fn security_checks(&mut self, series: &[TradeSeries], p0s: &[f64]) {
        for (s, &p0) in series.iter().zip(p0s) {
            let id = s.security_id();
            let (c, u) = (s.values(), s.volumes());
            let p = vwap(s);
            let scale = p * p;
            let Some(phi) = self.attempt(id, price_variance(s)) else { continue };
            if let Some(oracle) = self.attempt(id, weighted_price_variance(&c, &u)) {
                self.push(Check::new(format!("{id}.price_variance"), phi, oracle, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * scale));
            }
            if let Some(theta) = self.attempt(id, return_variance(s, p0)) {
                let oracle = phi / (p0 * p0);
                self.push(Check::new(format!("{id}.return_variance"), theta, oracle, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * scale / (p0 * p0)));
            }
            for lambda in [1e-3, 1e3] {
                if let Some(r) = self.attempt(id, crate::trade::rescale(s, lambda)) {
                    self.push(Check::strict(format!("{id}.mean_price.rescaled({lambda})"), vwap(&r), p, DUAL_PATH_TOLERANCE));
                    if let Some(v) = self.attempt(id, price_variance(&r)) {
                        self.push(Check::new(format!("{id}.price_variance.rescaled({lambda})"), v, phi, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * scale));
                    }
                }
            }
        }
    }

    fn pair_checks(&mut self, series: &[TradeSeries], p0s: &[f64]) {
        for j in 0..series.len() {
            for k in j..series.len() {
                let (sj, sk) = (&series[j], &series[k]);
                let name = format!("({},{})", sj.security_id(), sk.security_id());
                let Some(stats) = self.attempt(&name, PairStats::compute(sj, sk)) else { continue };
                let scale = (stats.mean_price_j * stats.mean_price_k).abs();
                let floor = ROUNDING_FLOOR * scale;
                if let Some(oracle) = self.attempt(
                    &name,
                    weighted_price_covariance(&sj.values(), &sj.volumes(), &sk.values(), &sk.volumes()),
                ) {
                    self.push(Check::new(format!("{name}.price_cov"), stats.price_cov, oracle, DUAL_PATH_TOLERANCE, floor));
                }
                if let Some(merged) = self.attempt(&name, price_covariance_normalized_form(sj, sk)) {
                    self.push(Check::new(format!("{name}.price_cov.coefficient_form"), merged, stats.price_cov, DUAL_PATH_TOLERANCE, floor));
                }
                if let Some(reverse) = self.attempt(&name, PairStats::compute(sk, sj)) {
                    self.push(Check::strict(format!("{name}.price_cov.symmetry"), reverse.price_cov, stats.price_cov, DUAL_PATH_TOLERANCE));
                }
                if let Some(theta) = self.attempt(&name, return_covariance_past_value_form(sj, sk, p0s[j], p0s[k])) {
                    let via_price = stats.price_cov / (p0s[j] * p0s[k]);
                    self.push(Check::new(format!("{name}.return_cov.past_value_form"), theta, via_price, DUAL_PATH_TOLERANCE, floor / (p0s[j] * p0s[k])));
                }
            }
        }
    }

    fn portfolio_checks(
        &mut self,
        portfolio: &Portfolio,
        raw: &[TradeSeries],
        ps: &PortfolioSeries,
        fault: Option<Fault>,
        volume_mode: VolumeMode,
    ) {
        // Conservation of normalized volume.
        for (j, s) in ps.normalized.iter().enumerate() {
            let traded: f64 = s.volumes().iter().sum();
            self.push(Check::strict(format!("{}.normalized_volume", s.security_id()), traded, portfolio.holdings[j], DUAL_PATH_TOLERANCE));
        }
        let w_total: f64 = ps.aggregate.volumes().iter().sum();
        self.push(Check::strict("portfolio.total_volume", w_total, portfolio.total_volume, DUAL_PATH_TOLERANCE));

        let Some(oracle) = self.attempt(
            "portfolio oracle",
            portfolio_moments(&ps.aggregate.values(), &ps.aggregate.volumes(), portfolio.price),
        ) else {
            return;
        };
        let s = portfolio_mean_price(ps);
        self.push(Check::strict("portfolio.mean_price", s, oracle.mean_price, DUAL_PATH_TOLERANCE));

        let Some(pairs) = self.attempt("pair matrix", PairMatrix::compute(&ps.normalized)) else { return };
        // Σ is invariant under normalization, so this is the component Σ.
        self.psd = Some(pairs.price_cov_is_psd());
        if let Some(v) = self.attempt("mean price decomposition", mean_price_decomposition(portfolio, &pairs.mean_prices)) {
            self.push(Check::strict("portfolio.mean_price.decomposed", v, oracle.mean_price, DUAL_PATH_TOLERANCE));
        }

        let Some(stats) = self.attempt("portfolio stats", PortfolioStats::compute(ps)) else { return };
        let price_scale = s * s;
        let return_scale = oracle.mean_return * oracle.mean_return;
        self.push(Check::new("portfolio.price_variance", stats.price_variance, oracle.price_variance, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * price_scale));
        self.push(Check::new("portfolio.return_variance", stats.return_variance, oracle.return_variance, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * return_scale));
        self.push(Check::new("portfolio.return_variance.from_price", stats.return_variance_from_price(), stats.return_variance, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * return_scale));

        let chi2 = stats.volume_dispersion;
        if let Some(v) = self.attempt("volume dispersion", volume_dispersion_from_components(&pairs, &portfolio.share_weights)) {
            self.push(Check::new("portfolio.volume_dispersion.components", v, chi2, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR));
        }

        if let Some(mut d) = self.attempt("price decomposition", price_variance_decomposition(portfolio, &pairs, &pairs.mean_prices, chi2)) {
            inject(&mut d, fault);
            self.push(Check::new("portfolio.price_variance.decomposed", d.total, oracle.price_variance, IDENTITY_TOLERANCE, ROUNDING_FLOOR * price_scale));
        }
        let Some(returns) = self.attempt("component returns", component_mean_returns(portfolio, ps)) else { return };
        let decomposed_mean: f64 = returns.iter().zip(&portfolio.value_weights).map(|(r, x)| r * x).sum();
        self.push(Check::strict("portfolio.mean_return.decomposed", decomposed_mean, oracle.mean_return, DUAL_PATH_TOLERANCE));
        if let Some(mut d) = self.attempt("return decomposition", return_variance_decomposition(portfolio, &pairs, &returns, chi2)) {
            inject(&mut d, fault);
            self.push(Check::new("portfolio.return_variance.decomposed", d.total, oracle.return_variance, IDENTITY_TOLERANCE, ROUNDING_FLOOR * return_scale));
        }

        let mut worst: Option<(f64, f64, f64)> = None;
        let mut worst_factor: f64 = 0.0;
        for tick in 0..ps.tick_count() {
            let Some(r) = self.attempt("per-trade return", per_trade_portfolio_return(portfolio, ps, tick)) else { return };
            let e = relative_error(r.decomposed, r.direct);
            if worst.is_none_or(|(w, _, _)| e > w) {
                worst = Some((e, r.decomposed, r.direct));
            }
            for f in r.correction_factors {
                worst_factor = worst_factor.max((f - 1.0).abs());
            }
        }
        if let Some((_, decomposed, direct)) = worst {
            self.push(Check::strict("portfolio.per_trade_return.worst_tick", decomposed, direct, DUAL_PATH_TOLERANCE));
        }

        if volume_mode == VolumeMode::Constant {
            self.constant_volume_checks(portfolio, raw, &oracle.return_variance, worst_factor, return_scale);
        }
    }

    fn constant_volume_checks(
        &mut self,
        portfolio: &Portfolio,
        raw: &[TradeSeries],
        theta: &f64,
        worst_factor: f64,
        return_scale: f64,
    ) {
        for s in raw {
            if let Some(c) = self.attempt("frequency suite", frequency_moment_suite(s)) {
                self.push(Check::new(format!("{}.frequency_gap", s.security_id()), c.max_gap(), 0.0, DUAL_PATH_TOLERANCE, DUAL_PATH_TOLERANCE));
            }
        }
        self.push(Check::new("portfolio.correction_factor_deviation", worst_factor, 0.0, ROUNDING_FLOOR, ROUNDING_FLOOR));
        let Some(pairs) = self.attempt("raw pair matrix", PairMatrix::compute(raw)) else { return };
        let Some(freq) = self.attempt("frequency return cov", pairs.frequency_return_cov(&portfolio.composition_prices)) else { return };
        if let Some(mk) = self.attempt("markowitz", markowitz_variance(&freq, &portfolio.value_weights)) {
            self.push(Check::new("portfolio.return_variance.markowitz", mk, *theta, DUAL_PATH_TOLERANCE, ROUNDING_FLOOR * return_scale));
        }
    }
}

fn inject(d: &mut VarianceDecomposition, fault: Option<Fault>) {
    if let Some(Fault::FlipCubicSign) = fault {
        d.cubic = -d.cubic;
        d.total = d.prefactor * (d.quadratic + d.cubic + d.quartic);
    }
}
