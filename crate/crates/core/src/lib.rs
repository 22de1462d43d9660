//! Market-based statistical moments of prices and returns for securities and
//! portfolios built from trade time series.
//!
//! Trade values and volumes, not prices alone, determine every moment here:
//! means are volume-weighted, variances weight squared deviations by squared
//! volumes, and a portfolio is handled as a single security whose trades are
//! the tick-by-tick sums of its normalized component trades. The portfolio
//! variance then decomposes into a 4th-degree polynomial in the portfolio
//! weights, which collapses to the classical quadratic form only when every
//! trade volume is constant over the window.

pub mod analysis;
pub mod decomposition;
pub mod error;
pub mod ingest;
pub mod pair;
pub mod portfolio;
pub mod security;
pub mod synthetic;
pub mod trade;
pub mod verify;

pub use decomposition::{
    markowitz_variance, mean_price_decomposition, per_trade_portfolio_return,
    portfolio_mean_price, portfolio_mean_return, portfolio_price_variance,
    portfolio_return_variance, price_variance_decomposition, return_variance_decomposition,
    Basis, MeanReturn, PerTradeReturn, PortfolioStats, VarianceDecomposition,
};
pub use error::{Error, Result};
pub use pair::{NormalizedCoefficients, PairMatrix, PairStats};
pub use portfolio::{aggregate, normalize_to_holdings, Portfolio, PortfolioSeries};
pub use security::{ReturnStats, SecurityStats};
pub use trade::{AveragingWindow, Field, TradeSeries, TradeTick};
pub use analysis::{analyze, AnalysisOptions, AnalysisReport};
pub use ingest::{read_portfolio_csv, read_trades_csv, write_portfolio_csv, write_trades_csv};
pub use synthetic::{generate_synthetic, SyntheticMarket, SyntheticSpec, VolumeMode};
pub use verify::{randomized_identity_campaign, CampaignConfig, Fault, OracleReport};
