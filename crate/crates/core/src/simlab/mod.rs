//! Synthetic designs with known treatment effects, and relative-bias
//! experiments over them.
//!
//! In the nonlinear design the treated group's latent mean is `-0.5`, while the
//! linear design uses `0.5`; both are kept as published.

mod dgm;
mod experiment;

pub use dgm::{generate, DesignName, DgmSpec, Law, Production};
pub use experiment::{
    relative_bias_experiment, relative_bias_experiment_with, replication_seed, SimEstimator, SimReport, SimRow,
};
