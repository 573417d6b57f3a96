//! Optimal transport between point clouds and the multivariate triple-changes
//! pushforward.
//!
//! Every cloud carries uniform weights. Maps between clouds are either exact
//! assignments (equal sizes) or barycentric projections of an entropic plan.
//! Points outside a map's source cloud take the image of their nearest source
//! point, except in one dimension, where the step extension makes each map equal
//! to `F⁻¹_target ∘ F_source`.

mod assignment;
mod cloud;
mod map;
mod pushforward;
mod sinkhorn;

pub use assignment::{exact_assignment_map, hungarian};
pub use cloud::{cost_matrix, sq_dist, CloudTable, PointCloud};
pub use map::{brenier_1d, BrenierMapApprox, Extension, MonotonicityCheck};
pub use pushforward::{triple_changes_pushforward, Method};
pub use sinkhorn::{default_reg, sinkhorn_map, sinkhorn_plan, TransportPlan, DEFAULT_MAX_ITER, DEFAULT_TOL};
