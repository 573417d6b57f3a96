//! Uncertainty for the triple-changes estimator: plug-in asymptotic variance
//! and stratified bootstrap intervals.

mod bootstrap;
mod kde;
mod variance;

pub use bootstrap::{bootstrap_ci, percentile, resample_sorted, BootstrapReport, MIN_REPLICATES};
pub use kde::{silverman_bandwidth, KernelDensity};
pub use variance::{plugin_variance, InfluenceComponents, VarianceReport, DENSITY_FLOOR, VARIANCE_CELLS};
