//! Seeded synthetic trade data.
//!
//! Values and volumes are drawn independently and uniformly per tick. In
//! constant mode each security keeps one volume for the whole window, which is
//! the regime where market-based and frequency-based moments coincide.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::Portfolio;
use crate::trade::{AveragingWindow, TradeSeries};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeMode {
    Constant,
    Random,
}

fn default_range() -> [f64; 2] {
    [0.1, 10.0]
}

fn default_holding_range() -> [f64; 2] {
    [1.0, 100.0]
}

/// JSON-serializable description of a synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub securities: usize,
    pub ticks: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub volume_mode: VolumeMode,
    #[serde(default = "default_range")]
    pub value_range: [f64; 2],
    #[serde(default = "default_range")]
    pub volume_range: [f64; 2],
    #[serde(default = "default_holding_range")]
    pub holding_range: [f64; 2],
}

impl SyntheticSpec {
    pub fn new(securities: usize, ticks: usize, seed: u64, volume_mode: VolumeMode) -> Self {
        Self {
            securities,
            ticks,
            seed: Some(seed),
            volume_mode,
            value_range: default_range(),
            volume_range: default_range(),
            holding_range: default_holding_range(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.securities == 0 {
            return Err(Error::InvalidRange("securities must be >= 1".into()));
        }
        if self.ticks == 0 {
            return Err(Error::InvalidRange("ticks must be >= 1".into()));
        }
        for (name, [lo, hi]) in [
            ("value_range", self.value_range),
            ("volume_range", self.volume_range),
            ("holding_range", self.holding_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidRange(format!(
                    "{name} [{lo}, {hi}] must satisfy 0 < lo <= hi"
                )));
            }
        }
        Ok(())
    }
}

/// Generated trades plus a matching portfolio composition.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub series: Vec<TradeSeries>,
    pub holdings: Vec<f64>,
    /// Price of the first trade of each security.
    pub composition_prices: Vec<f64>,
}

impl SyntheticMarket {
    pub fn security_ids(&self) -> Vec<&str> {
        self.series.iter().map(TradeSeries::security_id).collect()
    }

    pub fn portfolio(&self) -> Result<Portfolio> {
        Portfolio::compose(&self.security_ids(), &self.holdings, &self.composition_prices)
    }
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticMarket> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(DEFAULT_SEED));
    let window = AveragingWindow::with_ticks(spec.ticks)?;
    let width = spec.securities.to_string().len();

    let mut series = Vec::with_capacity(spec.securities);
    let mut holdings = Vec::with_capacity(spec.securities);
    let mut composition_prices = Vec::with_capacity(spec.securities);
    for j in 0..spec.securities {
        let fixed_volume = draw(&mut rng, spec.volume_range);
        let mut values = Vec::with_capacity(spec.ticks);
        let mut volumes = Vec::with_capacity(spec.ticks);
        for _ in 0..spec.ticks {
            values.push(draw(&mut rng, spec.value_range));
            volumes.push(match spec.volume_mode {
                VolumeMode::Constant => fixed_volume,
                VolumeMode::Random => draw(&mut rng, spec.volume_range),
            });
        }
        let id = format!("S{:0width$}", j + 1);
        let s = TradeSeries::from_columns_in(id, window.clone(), &values, &volumes)?;
        composition_prices.push(s.ticks()[0].price());
        holdings.push(draw(&mut rng, spec.holding_range));
        series.push(s);
    }
    Ok(SyntheticMarket {
        series,
        holdings,
        composition_prices,
    })
}
