//! Python module `mbps`.
//!
//! Series, portfolios and the analysis entry points. Reports cross the
//! boundary as JSON strings so Python callers can use `json.loads`.

use mbps_core::analysis::{analyze as analyze_core, AnalysisOptions};
use mbps_core::ingest;
use mbps_core::pair;
use mbps_core::security;
use mbps_core::synthetic::{generate_synthetic, SyntheticSpec, VolumeMode};
use mbps_core::verify::campaign::{randomized_identity_campaign, summarize, CampaignConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: mbps_core::Error) -> PyErr {
    match e {
        mbps_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Trades of one security over an aligned window.
#[pyclass(name = "TradeSeries", module = "mbps", from_py_object)]
#[derive(Clone)]
struct PyTradeSeries {
    inner: mbps_core::TradeSeries,
}

#[pymethods]
impl PyTradeSeries {
    #[new]
    fn new(security_id: String, values: Vec<f64>, volumes: Vec<f64>) -> PyResult<Self> {
        let inner = mbps_core::TradeSeries::from_columns(security_id, &values, &volumes).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn security_id(&self) -> String {
        self.inner.security_id().to_owned()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values()
    }

    #[getter]
    fn volumes(&self) -> Vec<f64> {
        self.inner.volumes()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.inner.prices()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn vwap(&self) -> f64 {
        security::vwap(&self.inner)
    }

    fn price_variance(&self) -> PyResult<f64> {
        security::price_variance(&self.inner).map_err(to_py)
    }

    fn mean_return(&self, reference_price: f64) -> PyResult<f64> {
        security::mean_return(&self.inner, reference_price).map_err(to_py)
    }

    fn return_variance(&self, reference_price: f64) -> PyResult<f64> {
        security::return_variance(&self.inner, reference_price).map_err(to_py)
    }

    fn frequency_mean_price(&self) -> f64 {
        security::frequency_mean_price(&self.inner)
    }

    fn frequency_price_variance(&self) -> f64 {
        security::frequency_price_variance(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("TradeSeries({:?}, n={})", self.inner.security_id(), self.inner.len())
    }
}

/// Holdings and composition prices at the start of the window.
#[pyclass(name = "Portfolio", module = "mbps", from_py_object)]
#[derive(Clone)]
struct PyPortfolio {
    inner: mbps_core::Portfolio,
}

#[pymethods]
impl PyPortfolio {
    #[new]
    fn new(security_ids: Vec<String>, holdings: Vec<f64>, prices: Vec<f64>) -> PyResult<Self> {
        let inner = mbps_core::Portfolio::compose(&security_ids, &holdings, &prices).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn security_ids(&self) -> Vec<String> {
        self.inner.security_ids.clone()
    }

    #[getter]
    fn holdings(&self) -> Vec<f64> {
        self.inner.holdings.clone()
    }

    #[getter]
    fn price(&self) -> f64 {
        self.inner.price
    }

    #[getter]
    fn total_value(&self) -> f64 {
        self.inner.total_value
    }

    #[getter]
    fn total_volume(&self) -> f64 {
        self.inner.total_volume
    }

    #[getter]
    fn share_weights(&self) -> Vec<f64> {
        self.inner.share_weights.clone()
    }

    #[getter]
    fn value_weights(&self) -> Vec<f64> {
        self.inner.value_weights.clone()
    }

    fn __repr__(&self) -> String {
        format!("Portfolio({:?}, price={})", self.inner.security_ids, self.inner.price)
    }
}

fn unwrap_series(series: &[PyTradeSeries]) -> Vec<mbps_core::TradeSeries> {
    series.iter().map(|s| s.inner.clone()).collect()
}

/// Market-based price covariance of two aligned series.
#[pyfunction]
fn price_covariance(a: &PyTradeSeries, b: &PyTradeSeries) -> PyResult<f64> {
    pair::price_covariance(&a.inner, &b.inner).map_err(to_py)
}

/// Full analysis report as a JSON string.
#[pyfunction]
#[pyo3(signature = (series, portfolio, liquidity_factor = mbps_core::portfolio::DEFAULT_LIQUIDITY_FACTOR))]
fn analyze(series: Vec<PyTradeSeries>, portfolio: &PyPortfolio, liquidity_factor: f64) -> PyResult<String> {
    let options = AnalysisOptions {
        liquidity_factor,
        ..AnalysisOptions::default()
    };
    let report = analyze_core(&unwrap_series(&series), &portfolio.inner, &options).map_err(to_py)?;
    report.to_json().map_err(to_py)
}

/// Seeded synthetic market: `(series, portfolio)`.
#[pyfunction]
#[pyo3(signature = (securities, ticks, seed = 42, volume_mode = "random"))]
fn generate(securities: usize, ticks: usize, seed: u64, volume_mode: &str) -> PyResult<(Vec<PyTradeSeries>, PyPortfolio)> {
    let mode = match volume_mode {
        "random" => VolumeMode::Random,
        "constant" => VolumeMode::Constant,
        other => return Err(PyValueError::new_err(format!("volume_mode must be 'random' or 'constant', got {other:?}"))),
    };
    let market = generate_synthetic(&SyntheticSpec::new(securities, ticks, seed, mode)).map_err(to_py)?;
    let portfolio = market.portfolio().map_err(to_py)?;
    Ok((
        market.series.into_iter().map(|inner| PyTradeSeries { inner }).collect(),
        PyPortfolio { inner: portfolio },
    ))
}

/// Runs the identity campaign; returns `(passed, summary_json)`.
#[pyfunction]
#[pyo3(signature = (instances = 200, seed = 42, max_j = 5, max_n = 64))]
fn verify(instances: usize, seed: u64, max_j: usize, max_n: usize) -> PyResult<(bool, String)> {
    let config = CampaignConfig {
        instances,
        seed,
        max_securities: max_j,
        max_ticks: max_n,
        ..CampaignConfig::default()
    };
    let summary = summarize(&randomized_identity_campaign(&config).map_err(to_py)?);
    let json = serde_json::to_string(&summary).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((summary.passed(), json))
}

#[pyfunction]
fn read_trades_csv(path: &str) -> PyResult<Vec<PyTradeSeries>> {
    let series = ingest::read_trades_csv(path).map_err(to_py)?;
    Ok(series.into_iter().map(|inner| PyTradeSeries { inner }).collect())
}

#[pyfunction]
fn write_trades_csv(path: &str, series: Vec<PyTradeSeries>) -> PyResult<()> {
    ingest::write_trades_csv(path, &unwrap_series(&series)).map_err(to_py)
}

#[pyfunction]
fn read_portfolio_csv(path: &str) -> PyResult<PyPortfolio> {
    Ok(PyPortfolio {
        inner: ingest::read_portfolio_csv(path).map_err(to_py)?,
    })
}

#[pymodule]
fn mbps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTradeSeries>()?;
    m.add_class::<PyPortfolio>()?;
    m.add_function(wrap_pyfunction!(price_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(read_trades_csv, m)?)?;
    m.add_function(wrap_pyfunction!(write_trades_csv, m)?)?;
    m.add_function(wrap_pyfunction!(read_portfolio_csv, m)?)?;
    Ok(())
}
