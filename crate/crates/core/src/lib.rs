//! Distributional treatment effects for designs with two states, two groups
//! and two periods.
//!
//! The triple-changes estimator extends changes-in-changes with a second
//! state: the pre-period outcomes of the treated group are pushed through the
//! control groups' time maps to impute what they would have been without
//! treatment. Difference-in-differences, triple differences and
//! changes-in-changes are included as baselines.

pub mod cell;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod identification;
pub mod inference;
pub mod parametric;
pub mod simlab;
pub mod transport;

pub use cell::{cells, CellId, CellTable, Group, Period, State};
pub use empirical::{
    apply_links, compose_chain, resolve_chain, ChainSpec, Distribution1d, EmpiricalCdf, Link, LinkKind,
};
pub use error::{Error, Result};
pub use estimators::{estimate, AttEstimate, EstimatorKind, Mode};
pub use identification::{
    partial_bounds_cic, partial_bounds_triple, triple_changes_counterfactual_cdf, BoundsResult, PanelPairs,
};
pub use parametric::{fit_parametric, Family, FittedDist, MleSpec};
