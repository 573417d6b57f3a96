use serde::{Deserialize, Serialize};

use crate::cell::{cells, CellId};
use crate::error::{Error, Result};
use crate::transport::assignment::exact_assignment_map;
use crate::transport::cloud::{CloudTable, PointCloud};
use crate::transport::map::{BrenierMapApprox, Extension};
use crate::transport::sinkhorn::{default_reg, sinkhorn_map};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact assignment; every map needs equal-size clouds.
    Exact,
    /// Entropic plan with barycentric projection. `None` picks the default
    /// regularization per map.
    Sinkhorn { reg: Option<f64> },
}

const INPUT_CELLS: [CellId; 7] = [
    cells::S0D0T0,
    cells::S0D0T1,
    cells::S0D1T0,
    cells::S0D1T1,
    cells::S1D0T0,
    cells::S1D0T1,
    cells::S1D1T0,
];

fn fit(source: &PointCloud, target: &PointCloud, method: Method) -> Result<BrenierMapApprox> {
    let map = match method {
        Method::Exact => exact_assignment_map(source, target),
        Method::Sinkhorn { reg } => {
            let reg = match reg {
                Some(r) => r,
                None => default_reg(source, target)?,
            };
            sinkhorn_map(source, target, reg)
        }
    }?;
    if source.dim() == 1 {
        map.with_extension(Extension::StepBelow)
    } else {
        Ok(map)
    }
}

/// Counterfactual post-period cloud of the treated group:
///
/// - `T_s1d0` maps the `s1, d0` pre-period cloud onto its post-period cloud,
/// - `T_s0d0` does the same for `s0, d0`,
/// - `T*` maps the `s0, d1` pre-period cloud, pushed through `T_s0d0`, onto the
///   `s0, d1` post-period cloud,
///
/// and the result is the treated pre-period cloud pushed through `T* ∘ T_s1d0`.
pub fn triple_changes_pushforward(clouds: &CloudTable, method: Method) -> Result<PointCloud> {
    let mut dim = None;
    for id in INPUT_CELLS {
        let d = clouds.cloud(id)?.dim();
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => return Err(Error::DimensionMismatch { expected, found: d }),
            Some(_) => {}
        }
    }

    let t_s1d0 =
        fit(clouds.cloud(cells::S1D0T0)?, clouds.cloud(cells::S1D0T1)?, method).map_err(|e| e.in_map("T_s1d0"))?;
    let t_s0d0 =
        fit(clouds.cloud(cells::S0D0T0)?, clouds.cloud(cells::S0D0T1)?, method).map_err(|e| e.in_map("T_s0d0"))?;
    // In one dimension the ceiling extension makes the control image's cdf
    // F_s0d1t0 ∘ F⁻¹_s0d0t0 ∘ F_s0d0t1, the middle of the quantile chain.
    let t_s0d0 = match t_s0d0.extension() {
        Extension::StepBelow => t_s0d0.with_extension(Extension::StepAbove)?,
        _ => t_s0d0,
    };
    let control_image = t_s0d0.push(clouds.cloud(cells::S0D1T0)?)?;
    let t_star = fit(&control_image, clouds.cloud(cells::S0D1T1)?, method).map_err(|e| e.in_map("T*"))?;
    let treated = t_s1d0.push(clouds.cloud(cells::S1D1T0)?)?;
    t_star.push(&treated)
}
