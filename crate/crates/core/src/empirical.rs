//! Step-function empirical CDFs, their generalized inverses, and compositions.
//!
//! Everything here is exact: counts are integers, and a CDF threshold is only
//! ever compared against the very same `k as f64 / n as f64` value the CDF
//! itself returns. No interpolation and no epsilon fuzzing.
//!
//! Quantile convention: `F⁻¹(u) = inf{y : F(y) ≥ u}` with `u` clamped into
//! `[1/n, 1]`, so `u = 0` returns the smallest sample instead of `-∞`. Inputs
//! within [`PROB_TOL`] of `[0, 1]` are clamped; anything further out is an error.

use serde::{Deserialize, Serialize};

use crate::cell::{cells, CellId, CellTable};
use crate::error::{Error, Result};

/// How far outside `[0, 1]` a probability may stray (from float error) before
/// it is rejected.
pub const PROB_TOL: f64 = 1e-9;

/// Anything that can serve as one link of a CDF/quantile chain.
pub trait Distribution1d {
    fn cdf(&self, y: f64) -> f64;
    fn quantile(&self, u: f64) -> Result<f64>;
}

pub(crate) fn clamp_probability(u: f64) -> Result<f64> {
    if u.is_nan() || !(-PROB_TOL..=1.0 + PROB_TOL).contains(&u) {
        return Err(Error::InvalidProbability(u));
    }
    Ok(u.clamp(0.0, 1.0))
}

/// Empirical distribution of one nonempty, finite sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*bad));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalCdf { values })
    }

    /// Wraps values that are already sorted and finite.
    pub(crate) fn from_sorted_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        EmpiricalCdf { values }
    }

    /// Sorted sample values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Number of samples `<= y`.
    pub fn count_le(&self, y: f64) -> usize {
        self.values.partition_point(|v| *v <= y)
    }

    /// `#{i : x_i <= y} / n`.
    pub fn cdf_eval(&self, y: f64) -> f64 {
        self.count_le(y) as f64 / self.len() as f64
    }

    /// Rank `k` (1-based) of the order statistic returned for probability `u`.
    fn quantile_rank(&self, u: f64) -> usize {
        let n = self.len();
        let nf = n as f64;
        let mut k = ((u * nf).ceil() as usize).clamp(1, n);
        // Correct for rounding in u*n so the test is the same k/n the cdf reports.
        while k > 1 && ((k - 1) as f64 / nf) >= u {
            k -= 1;
        }
        while k < n && (k as f64 / nf) < u {
            k += 1;
        }
        k
    }

    /// Generalized inverse `inf{y : F(y) >= u}` over the sample values.
    pub fn quantile_eval(&self, u: f64) -> Result<f64> {
        let u = clamp_probability(u)?;
        Ok(self.values[self.quantile_rank(u) - 1])
    }

    /// Sample variance with divisor `n`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.len() as f64
    }
}

impl Distribution1d for EmpiricalCdf {
    fn cdf(&self, y: f64) -> f64 {
        self.cdf_eval(y)
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        self.quantile_eval(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    Cdf,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub kind: LinkKind,
    pub cell: CellId,
}

impl Link {
    pub const fn cdf(cell: CellId) -> Self {
        Link {
            kind: LinkKind::Cdf,
            cell,
        }
    }

    pub const fn quantile(cell: CellId) -> Self {
        Link {
            kind: LinkKind::Quantile,
            cell,
        }
    }
}

/// A composition of CDF and quantile links, written left to right and applied
/// right to left, like `F_a ∘ F_b⁻¹ ∘ F_c`.
///
/// Inputs are always in outcome units, so the rightmost link is a CDF and kinds
/// alternate from there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    links: Vec<Link>,
}

impl ChainSpec {
    pub fn new(links: Vec<Link>) -> Result<Self> {
        let n = links.len();
        for (pos, link) in links.iter().enumerate() {
            // Distance from the right end decides the expected kind.
            let expected = if (n - 1 - pos).is_multiple_of(2) {
                LinkKind::Cdf
            } else {
                LinkKind::Quantile
            };
            if link.kind != expected {
                return Err(Error::IllTypedChain(pos));
            }
        }
        Ok(ChainSpec { links })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// True when the chain returns outcome units rather than a probability.
    pub fn ends_in_quantile(&self) -> bool {
        self.links.first().map(|l| l.kind) == Some(LinkKind::Quantile)
    }

    /// The counterfactual CDF of the treated cell in the post period:
    /// `F_{s1d1t0} ∘ F⁻¹_{s0d1t0} ∘ F_{s0d1t1} ∘ F⁻¹_{s0d0t1} ∘ F_{s0d0t0} ∘ F⁻¹_{s1d0t0} ∘ F_{s1d0t1}`.
    pub fn triple_changes_cdf() -> Self {
        ChainSpec::new(vec![
            Link::cdf(cells::S1D1T0),
            Link::quantile(cells::S0D1T0),
            Link::cdf(cells::S0D1T1),
            Link::quantile(cells::S0D0T1),
            Link::cdf(cells::S0D0T0),
            Link::quantile(cells::S1D0T0),
            Link::cdf(cells::S1D0T1),
        ])
        .expect("well-typed by construction")
    }

    /// The map sending pre-period treated outcomes to their imputed untreated
    /// post-period values:
    /// `F⁻¹_{s0d1t1} ∘ F_{s0d1t0} ∘ F⁻¹_{s0d0t0} ∘ F_{s0d0t1} ∘ F⁻¹_{s1d0t1} ∘ F_{s1d0t0}`.
    pub fn triple_changes_imputation() -> Self {
        ChainSpec::new(vec![
            Link::quantile(cells::S0D1T1),
            Link::cdf(cells::S0D1T0),
            Link::quantile(cells::S0D0T0),
            Link::cdf(cells::S0D0T1),
            Link::quantile(cells::S1D0T1),
            Link::cdf(cells::S1D0T0),
        ])
        .expect("well-typed by construction")
    }

    /// Changes-in-changes imputation within one state: `F⁻¹_{t1,d0} ∘ F_{t0,d0}`.
    pub fn cic_imputation(state: crate::cell::State) -> Self {
        use crate::cell::{Group, Period};
        ChainSpec::new(vec![
            Link::quantile(CellId::new(state, Group::D0, Period::T1)),
            Link::cdf(CellId::new(state, Group::D0, Period::T0)),
        ])
        .expect("well-typed by construction")
    }
}

/// Applies `links` right to left. Errors carry the index of the failing link.
pub fn apply_links<D: Distribution1d + ?Sized>(links: &[(LinkKind, &D)], y: f64) -> Result<f64> {
    let mut x = y;
    for (index, (kind, dist)) in links.iter().enumerate().rev() {
        x = match kind {
            LinkKind::Cdf => dist.cdf(x),
            LinkKind::Quantile => dist.quantile(x).map_err(|e| e.at_link(index))?,
        };
    }
    Ok(x)
}

/// Resolves a chain against a table once, for repeated evaluation.
pub fn resolve_chain<'a>(chain: &ChainSpec, table: &'a CellTable) -> Result<Vec<(LinkKind, &'a EmpiricalCdf)>> {
    chain
        .links()
        .iter()
        .enumerate()
        .map(|(i, link)| table.cell(link.cell).map(|c| (link.kind, c)).map_err(|e| e.at_link(i)))
        .collect()
}

/// Evaluates `chain` at `y` using the table's empirical distributions.
pub fn compose_chain(chain: &ChainSpec, table: &CellTable, y: f64) -> Result<f64> {
    let links = resolve_chain(chain, table)?;
    apply_links(&links, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ecdf(v: &[f64]) -> EmpiricalCdf {
        EmpiricalCdf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let c = ecdf(&[1.0, 2.0, 3.0]);
        assert_eq!(c.cdf_eval(2.0), 2.0 / 3.0);
        assert_eq!(c.cdf_eval(0.5), 0.0);
        assert_eq!(ecdf(&[5.0]).cdf_eval(5.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        let c = ecdf(&[1.0, 2.0, 3.0]);
        assert_eq!(c.quantile_eval(0.5).unwrap(), 2.0);
        assert_eq!(c.quantile_eval(1.0).unwrap(), 3.0);
        assert_eq!(c.quantile_eval(0.0).unwrap(), 1.0);
        assert_eq!(c.quantile_eval(1.0 + 1e-12).unwrap(), 3.0);
        assert_eq!(c.quantile_eval(-1e-12).unwrap(), 1.0);
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        let c = ecdf(&[1.0, 2.0]);
        assert_eq!(c.quantile_eval(1.5), Err(Error::InvalidProbability(1.5)));
        assert!(matches!(c.quantile_eval(f64::NAN), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn ties_jump_by_multiplicity() {
        let c = ecdf(&[1.0, 2.0, 2.0, 2.0, 5.0]);
        assert_eq!(c.cdf_eval(2.0), 4.0 / 5.0);
        assert_eq!(c.quantile_eval(0.21).unwrap(), 2.0);
        assert_eq!(c.quantile_eval(0.2).unwrap(), 1.0);
        assert_eq!(c.quantile_eval(0.81).unwrap(), 5.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(EmpiricalCdf::new(vec![]), Err(Error::EmptySample));
        assert!(matches!(
            EmpiricalCdf::new(vec![1.0, f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn chain_examples() {
        use crate::cell::cells::*;
        let table = CellTable::from_values([
            (S0D0T0, vec![1.0, 2.0, 3.0]),
            (S0D0T1, vec![0.0, 1.0]),
            (S0D1T0, vec![10.0, 20.0]),
        ])
        .unwrap();
        let id = ChainSpec::new(vec![Link::quantile(S0D0T0), Link::cdf(S0D0T0)]).unwrap();
        assert_eq!(compose_chain(&id, &table, 2.0).unwrap(), 2.0);
        let single = ChainSpec::new(vec![Link::cdf(S0D0T0)]).unwrap();
        assert_eq!(compose_chain(&single, &table, 2.0).unwrap(), 2.0 / 3.0);
        let cross = ChainSpec::new(vec![Link::quantile(S0D1T0), Link::cdf(S0D0T1)]).unwrap();
        assert_eq!(compose_chain(&cross, &table, 0.5).unwrap(), 10.0);
    }

    #[test]
    fn chain_type_checking() {
        use crate::cell::cells::*;
        assert_eq!(
            ChainSpec::new(vec![Link::cdf(S0D0T0), Link::cdf(S0D0T1)]),
            Err(Error::IllTypedChain(0))
        );
        assert_eq!(
            ChainSpec::new(vec![Link::quantile(S0D0T0)]),
            Err(Error::IllTypedChain(0))
        );
        assert!(ChainSpec::triple_changes_cdf().links().len() == 7);
        assert!(ChainSpec::triple_changes_imputation().ends_in_quantile());
    }

    #[test]
    fn missing_cell_reports_link() {
        use crate::cell::cells::*;
        let table = CellTable::from_values([(S0D0T0, vec![1.0])]).unwrap();
        let chain = ChainSpec::new(vec![Link::quantile(S1D1T0), Link::cdf(S0D0T0)]).unwrap();
        match compose_chain(&chain, &table, 0.0) {
            Err(Error::Link { index: 0, source }) => assert_eq!(*source, Error::MissingCell(S1D1T0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        // Small integer grid forces plenty of ties.
        prop::collection::vec((-6i32..6).prop_map(|v| v as f64 * 0.5), 1..20)
    }

    proptest! {
        #[test]
        fn galois_inequality(v in sample(), u in 0.0001f64..=1.0) {
            let c = ecdf(&v);
            let q = c.quantile_eval(u).unwrap();
            prop_assert!(c.cdf_eval(q) >= u);
        }

        #[test]
        fn quantile_of_cdf_at_unique_points(v in sample()) {
            let c = ecdf(&v);
            for &y in c.values() {
                let q = c.quantile_eval(c.cdf_eval(y)).unwrap();
                prop_assert!(q <= y);
                if c.values().iter().filter(|w| **w == y).count() == 1 {
                    prop_assert_eq!(q, y);
                }
            }
        }

        #[test]
        fn quantile_of_cdf_is_bounded_by_next_sample(v in sample(), y in -4.0f64..4.0) {
            let c = ecdf(&v);
            let q = c.quantile_eval(c.cdf_eval(y)).unwrap();
            // Smallest sample >= y, or the max if y lies above everything.
            let next = c.values().iter().copied().find(|w| *w >= y).unwrap_or(c.max());
            prop_assert!(q <= next);
        }

        #[test]
        fn chain_is_monotone(a in sample(), b in sample(), c in sample(), y in -4.0f64..4.0, dy in 0.0f64..3.0) {
            use crate::cell::cells::*;
            let table = CellTable::from_values([(S0D0T0, a), (S0D0T1, b), (S1D0T0, c)]).unwrap();
            let chain = ChainSpec::new(vec![
                Link::cdf(S1D0T0), Link::quantile(S0D0T1), Link::cdf(S0D0T0),
            ]).unwrap();
            let lo = compose_chain(&chain, &table, y).unwrap();
            let hi = compose_chain(&chain, &table, y + dy).unwrap();
            prop_assert!(lo <= hi);
        }
    }
}
