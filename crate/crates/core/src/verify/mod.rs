//! Independent checks of the main computation path.

pub mod campaign;
pub mod frequency;
pub mod oracle;

pub use campaign::{
    randomized_identity_campaign, summarize, CampaignConfig, CampaignSummary, Check, Fault,
    InstanceDescriptor, OracleReport,
};
pub use frequency::{frequency_moment_suite, FrequencyComparison};
pub use oracle::{
    portfolio_moments, relative_error, weighted_mean_price, weighted_price_covariance,
    weighted_price_variance, OracleMoments,
};
