//! Counterfactual distribution of the untreated post-period outcome for the
//! treated cell, plus the interval versions used when monotonicity or time
//! invariance only hold approximately.

use serde::{Deserialize, Serialize};

use crate::cell::{cells, CellTable};
use crate::empirical::{apply_links, compose_chain, resolve_chain, ChainSpec, EmpiricalCdf, LinkKind};
use crate::error::{Error, Result};

/// Interval `[lower, upper]` for the counterfactual CDF at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub lower: f64,
    pub upper: f64,
    pub eps: f64,
    pub delta: f64,
}

impl BoundsResult {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

/// Changes-in-changes counterfactual CDF for the treated group:
/// `F_{treated,t0} ∘ F⁻¹_{control,t0} ∘ F_{control,t1}`.
pub fn cic_counterfactual_cdf(
    control_t0: &EmpiricalCdf,
    control_t1: &EmpiricalCdf,
    treated_t0: &EmpiricalCdf,
    y: f64,
) -> Result<f64> {
    let u = control_t1.cdf_eval(y);
    let x = control_t0.quantile_eval(u)?;
    Ok(treated_t0.cdf_eval(x))
}

/// Triple-changes counterfactual CDF of the untreated outcome in `(s1, d1, t1)`.
///
/// Needs the seven cells other than `(s1, d1, t1)`.
pub fn triple_changes_counterfactual_cdf(table: &CellTable, y: f64) -> Result<f64> {
    table.require(&NON_TARGET_CELLS)?;
    compose_chain(&ChainSpec::triple_changes_cdf(), table, y)
}

pub(crate) const NON_TARGET_CELLS: [crate::cell::CellId; 7] = [
    cells::S0D0T0,
    cells::S0D0T1,
    cells::S0D1T0,
    cells::S0D1T1,
    cells::S1D0T0,
    cells::S1D0T1,
    cells::S1D1T0,
];

fn check_slack(eps: f64, delta: f64) -> Result<f64> {
    if !(eps >= 0.0 && delta >= 0.0) || !eps.is_finite() || !delta.is_finite() {
        return Err(Error::NegativeSlack { eps, delta });
    }
    Ok(eps + delta)
}

/// Evaluates a cdf-terminated chain, shifting every CDF output by `shift`
/// (clamped into `[0, 1]`) before the next quantile, and shifting the final
/// probability as well.
fn shifted_chain(links: &[(LinkKind, &EmpiricalCdf)], y: f64, shift: f64) -> Result<f64> {
    let mut x = y;
    for (index, (kind, dist)) in links.iter().enumerate().rev() {
        x = match kind {
            LinkKind::Cdf => (dist.cdf_eval(x) + shift).clamp(0.0, 1.0),
            LinkKind::Quantile => dist.quantile_eval(x).map_err(|e| e.at_link(index))?,
        };
    }
    Ok(x)
}

fn bounds_over(links: &[(LinkKind, &EmpiricalCdf)], y: f64, eps: f64, delta: f64) -> Result<BoundsResult> {
    let slack = check_slack(eps, delta)?;
    if slack == 0.0 {
        let point = apply_links(links, y)?;
        return Ok(BoundsResult {
            lower: point,
            upper: point,
            eps,
            delta,
        });
    }
    Ok(BoundsResult {
        lower: shifted_chain(links, y, -slack)?,
        upper: shifted_chain(links, y, slack)?,
        eps,
        delta,
    })
}

/// Bounds on the triple-changes counterfactual CDF when production functions
/// are only `eps`-monotone and the latent law drifts by at most `delta` in
/// Kolmogorov distance. The combined slack is applied at every CDF link.
pub fn partial_bounds_triple(table: &CellTable, y: f64, eps: f64, delta: f64) -> Result<BoundsResult> {
    check_slack(eps, delta)?;
    table.require(&NON_TARGET_CELLS)?;
    let links = resolve_chain(&ChainSpec::triple_changes_cdf(), table)?;
    bounds_over(&links, y, eps, delta)
}

/// Changes-in-changes analogue of [`partial_bounds_triple`].
pub fn partial_bounds_cic(
    control_t0: &EmpiricalCdf,
    control_t1: &EmpiricalCdf,
    treated_t0: &EmpiricalCdf,
    y: f64,
    eps: f64,
    delta: f64,
) -> Result<BoundsResult> {
    let links = [
        (LinkKind::Cdf, treated_t0),
        (LinkKind::Quantile, control_t0),
        (LinkKind::Cdf, control_t1),
    ];
    bounds_over(&links, y, eps, delta)
}

/// Individual-level `(Y(t0), Y(t1))` outcomes for the treated cell, linked by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelPairs {
    pairs: Vec<(f64, f64)>,
}

impl PanelPairs {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::NonFinite(if a.is_finite() { b } else { a }));
        }
        Ok(PanelPairs { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn marginal_t0(&self) -> EmpiricalCdf {
        EmpiricalCdf::new(self.pairs.iter().map(|p| p.0).collect()).expect("validated nonempty and finite")
    }

    pub fn marginal_t1(&self) -> EmpiricalCdf {
        EmpiricalCdf::new(self.pairs.iter().map(|p| p.1).collect()).expect("validated nonempty and finite")
    }

    /// Fraction of pairs with `y_t0 <= a` and `y_t1 <= b`.
    pub fn joint_cdf(&self, a: f64, b: f64) -> f64 {
        let hits = self.pairs.iter().filter(|(x0, x1)| *x0 <= a && *x1 <= b).count();
        hits as f64 / self.pairs.len() as f64
    }
}

/// Joint CDF of the untreated and treated post-period outcomes for the treated
/// cell, under strong time invariance (a followed panel, no attrition).
///
/// `counterfactual_marginal` is the untreated post-period CDF, usually
/// [`triple_changes_counterfactual_cdf`] or one side of its bounds.
pub fn joint_counterfactual_cdf<F>(
    pairs: &PanelPairs,
    counterfactual_marginal: F,
    marginal_t0: &EmpiricalCdf,
    y0: f64,
    y1: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if pairs.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let threshold = marginal_t0.quantile_eval(counterfactual_marginal(y0)?)?;
    Ok(pairs.joint_cdf(threshold, y1))
}
