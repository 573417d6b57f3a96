//! Point estimators of the average effect of treatment on the treated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cell::{cells, CellId, CellTable, Group, Period, State};
use crate::empirical::{apply_links, resolve_chain, ChainSpec, Distribution1d, LinkKind};
use crate::error::{Error, Result};
use crate::parametric::{fit_parametric, Family, FittedDist, MleSpec};

/// How chain links are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Empirical,
    Mle(MleSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    Did,
    Ddd,
    CicEmp,
    CicMle(MleSpec),
    CccEmp,
    CccMle(MleSpec),
}

impl EstimatorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EstimatorKind::Did => "DID",
            EstimatorKind::Ddd => "DDD",
            EstimatorKind::CicEmp => "CIC_EMP",
            EstimatorKind::CicMle(_) => "CIC_MLE",
            EstimatorKind::CccEmp => "CCC_EMP",
            EstimatorKind::CccMle(_) => "CCC_MLE",
        }
    }

    pub fn families(&self) -> Option<MleSpec> {
        match self {
            EstimatorKind::CicMle(spec) | EstimatorKind::CccMle(spec) => Some(*spec),
            _ => None,
        }
    }

    /// Parses the command-line names (`did`, `ccc-mle`, ...). MLE kinds take
    /// `family`, defaulting to gaussian.
    pub fn parse(name: &str, family: Option<Family>) -> Result<Self> {
        let spec = MleSpec::uniform(family.unwrap_or(Family::Gaussian));
        let kind = match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "did" => EstimatorKind::Did,
            "ddd" => EstimatorKind::Ddd,
            "cic-emp" => EstimatorKind::CicEmp,
            "cic-mle" => EstimatorKind::CicMle(spec),
            "ccc-emp" => EstimatorKind::CccEmp,
            "ccc-mle" => EstimatorKind::CccMle(spec),
            other => return Err(Error::InvalidParameter(format!("unknown estimator `{other}`"))),
        };
        Ok(kind)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.families() {
            Some(spec) => write!(f, "{}[{spec}]", self.tag()),
            None => f.write_str(self.tag()),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::parse(s, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttEstimate {
    pub tau_hat: f64,
    pub estimator: EstimatorKind,
    pub n_per_cell: [usize; 8],
}

fn cell_mean(table: &CellTable, id: CellId) -> Result<f64> {
    Ok(table.cell(id)?.mean())
}

/// Mean of `chain(z)` over `inputs`, accumulated in index order.
fn mean_imputed<D: Distribution1d + ?Sized>(links: &[(LinkKind, &D)], inputs: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &z in inputs {
        sum += apply_links(links, z)?;
    }
    Ok(sum / inputs.len() as f64)
}

/// Imputed mean of untreated post-period outcomes for the pre-period sample
/// `inputs`, using `chain` with either empirical or fitted links.
fn imputed_mean(table: &CellTable, chain: &ChainSpec, mode: Mode, inputs: &[f64]) -> Result<f64> {
    match mode {
        Mode::Empirical => {
            let links = resolve_chain(chain, table)?;
            mean_imputed(&links, inputs)
        }
        Mode::Mle(spec) => {
            let fits: Vec<(LinkKind, FittedDist)> = chain
                .links()
                .iter()
                .map(|l| Ok((l.kind, fit_parametric(table.cell(l.cell)?, spec.family(l.cell))?)))
                .collect::<Result<_>>()?;
            let links: Vec<(LinkKind, &FittedDist)> = fits.iter().map(|(k, f)| (*k, f)).collect();
            mean_imputed(&links, inputs)
        }
    }
}

/// Triple-changes estimator: observed treated mean minus the mean of the
/// pre-period treated outcomes pushed through the six-link imputation chain.
pub fn att_triple_changes(table: &CellTable, mode: Mode) -> Result<AttEstimate> {
    let all: Vec<CellId> = CellId::all().collect();
    table.require(&all)?;
    let treated_pre = table.cell(cells::S1D1T0)?.values();
    let imputed = imputed_mean(table, &ChainSpec::triple_changes_imputation(), mode, treated_pre)?;
    let tau_hat = cell_mean(table, cells::S1D1T1)? - imputed;
    Ok(AttEstimate {
        tau_hat,
        estimator: match mode {
            Mode::Empirical => EstimatorKind::CccEmp,
            Mode::Mle(spec) => EstimatorKind::CccMle(spec),
        },
        n_per_cell: table.counts(),
    })
}

/// The four cells of one state, in `(d0t0, d0t1, d1t0, d1t1)` order.
pub fn state_cells(state: State) -> [CellId; 4] {
    [
        CellId::new(state, Group::D0, Period::T0),
        CellId::new(state, Group::D0, Period::T1),
        CellId::new(state, Group::D1, Period::T0),
        CellId::new(state, Group::D1, Period::T1),
    ]
}

/// Changes-in-changes within one state.
pub fn att_cic(table: &CellTable, state: State, mode: Mode) -> Result<AttEstimate> {
    let [_, _, d1t0, d1t1] = state_cells(state);
    table.require(&state_cells(state))?;
    let imputed = imputed_mean(
        table,
        &ChainSpec::cic_imputation(state),
        mode,
        table.cell(d1t0)?.values(),
    )?;
    Ok(AttEstimate {
        tau_hat: cell_mean(table, d1t1)? - imputed,
        estimator: match mode {
            Mode::Empirical => EstimatorKind::CicEmp,
            Mode::Mle(spec) => EstimatorKind::CicMle(spec),
        },
        n_per_cell: table.counts(),
    })
}

fn did_value(table: &CellTable, state: State) -> Result<f64> {
    let [d0t0, d0t1, d1t0, d1t1] = state_cells(state);
    table.require(&state_cells(state))?;
    let treated = cell_mean(table, d1t1)? - cell_mean(table, d1t0)?;
    let control = cell_mean(table, d0t1)? - cell_mean(table, d0t0)?;
    Ok(treated - control)
}

/// Difference in differences of cell means within one state.
pub fn att_did(table: &CellTable, state: State) -> Result<AttEstimate> {
    Ok(AttEstimate {
        tau_hat: did_value(table, state)?,
        estimator: EstimatorKind::Did,
        n_per_cell: table.counts(),
    })
}

/// Triple difference: the treated state's DiD minus the other state's.
pub fn att_ddd(table: &CellTable) -> Result<AttEstimate> {
    Ok(AttEstimate {
        tau_hat: did_value(table, State::S1)? - did_value(table, State::S0)?,
        estimator: EstimatorKind::Ddd,
        n_per_cell: table.counts(),
    })
}

/// Runs `kind` on `table`. Two-group estimators use the treated state `s1`.
pub fn estimate(table: &CellTable, kind: EstimatorKind) -> Result<AttEstimate> {
    match kind {
        EstimatorKind::Did => att_did(table, State::S1),
        EstimatorKind::Ddd => att_ddd(table),
        EstimatorKind::CicEmp => att_cic(table, State::S1, Mode::Empirical),
        EstimatorKind::CicMle(spec) => att_cic(table, State::S1, Mode::Mle(spec)),
        EstimatorKind::CccEmp => att_triple_changes(table, Mode::Empirical),
        EstimatorKind::CccMle(spec) => att_triple_changes(table, Mode::Mle(spec)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::cells::*;
    use crate::empirical::EmpiricalCdf;
    use proptest::prelude::*;

    fn uniform_table(v: &[f64]) -> CellTable {
        CellTable::from_values(CellId::all().map(|c| (c, v.to_vec()))).unwrap()
    }

    #[test]
    fn ccc_identity_fixture() {
        let t = uniform_table(&[1.0, 2.0, 3.0]);
        assert_eq!(att_triple_changes(&t, Mode::Empirical).unwrap().tau_hat, 0.0);

        let mut t = t;
        t.insert(
            S1D1T1,
            crate::empirical::EmpiricalCdf::new(vec![2.0, 3.0, 4.0]).unwrap(),
        );
        assert_eq!(att_triple_changes(&t, Mode::Empirical).unwrap().tau_hat, 1.0);
    }

    #[test]
    fn ccc_requires_every_cell() {
        let mut t = uniform_table(&[1.0, 2.0]);
        t.remove(S0D1T1);
        assert_eq!(
            att_triple_changes(&t, Mode::Empirical).unwrap_err(),
            Error::MissingCell(S0D1T1)
        );
    }

    #[test]
    fn cic_examples() {
        let t = uniform_table(&[1.0, 2.0, 4.0]);
        assert_eq!(att_cic(&t, State::S1, Mode::Empirical).unwrap().tau_hat, 0.0);

        let t = CellTable::from_values([
            (S1D0T0, vec![0.0, 1.0]),
            (S1D0T1, vec![10.0, 11.0]),
            (S1D1T0, vec![0.0, 1.0]),
            (S1D1T1, vec![12.0, 13.0]),
        ])
        .unwrap();
        assert_eq!(att_cic(&t, State::S1, Mode::Empirical).unwrap().tau_hat, 2.0);
        assert_eq!(
            att_cic(&t, State::S0, Mode::Empirical).unwrap_err(),
            Error::MissingCell(S0D0T0)
        );
    }

    #[test]
    fn did_ddd_hand_grid() {
        // (state, group): (pre, post) means, each cell holding a single value.
        let t = CellTable::from_values([
            (S1D1T0, vec![5.0]),
            (S1D1T1, vec![9.0]),
            (S1D0T0, vec![1.0]),
            (S1D0T1, vec![2.0]),
            (S0D1T0, vec![3.0]),
            (S0D1T1, vec![5.0]),
            (S0D0T0, vec![1.0]),
            (S0D0T1, vec![2.0]),
        ])
        .unwrap();
        assert_eq!(att_did(&t, State::S1).unwrap().tau_hat, 3.0);
        assert_eq!(att_did(&t, State::S0).unwrap().tau_hat, 1.0);
        assert_eq!(att_ddd(&t).unwrap().tau_hat, 2.0);
        assert_eq!(att_ddd(&uniform_table(&[4.0, 2.0])).unwrap().tau_hat, 0.0);
    }

    #[test]
    fn mle_gaussian_matches_affine_closed_form() {
        // With gaussian links every map is affine; check against direct algebra.
        let t = CellTable::from_values([
            (S0D0T0, vec![0.0, 2.0]),
            (S0D0T1, vec![1.0, 5.0]),
            (S0D1T0, vec![1.0, 3.0]),
            (S0D1T1, vec![0.0, 8.0]),
            (S1D0T0, vec![-1.0, 1.0]),
            (S1D0T1, vec![2.0, 4.0]),
            (S1D1T0, vec![0.0, 1.0, 5.0]),
            (S1D1T1, vec![7.0, 9.0]),
        ])
        .unwrap();
        let est = att_triple_changes(&t, Mode::Mle(MleSpec::uniform(Family::Gaussian))).unwrap();
        // (mean, sd) per cell
        let map = |y: f64, from: (f64, f64), to: (f64, f64)| to.0 + to.1 * (y - from.0) / from.1;
        let imputed: f64 = [0.0, 1.0, 5.0]
            .iter()
            .map(|&z| {
                let a = map(z, (0.0, 1.0), (3.0, 1.0)); // s1d0: t0 -> t1
                let b = map(a, (3.0, 2.0), (1.0, 1.0)); // s0d0: t1 -> t0
                map(b, (2.0, 1.0), (4.0, 4.0)) // s0d1: t0 -> t1
            })
            .sum::<f64>()
            / 3.0;
        approx::assert_relative_eq!(est.tau_hat, 8.0 - imputed, epsilon = 1e-9);
        assert_eq!(est.estimator.tag(), "CCC_MLE");
    }

    #[test]
    fn mle_rejects_degenerate_cells() {
        let t = uniform_table(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            att_triple_changes(&t, Mode::Mle(MleSpec::uniform(Family::Gaussian))),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn parse_names() {
        assert_eq!("ccc-emp".parse::<EstimatorKind>().unwrap(), EstimatorKind::CccEmp);
        assert_eq!(
            EstimatorKind::parse("cic-mle", Some(Family::Exponential)).unwrap(),
            EstimatorKind::CicMle(MleSpec::uniform(Family::Exponential))
        );
        assert!("triple".parse::<EstimatorKind>().is_err());
        assert_eq!(
            EstimatorKind::CccMle(MleSpec::uniform(Family::Gaussian)).to_string(),
            "CCC_MLE[gaussian]"
        );
    }

    fn cell_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 2..12)
    }

    fn random_table() -> impl Strategy<Value = CellTable> {
        prop::collection::vec(cell_values(), 8)
            .prop_map(|cols| CellTable::from_values(CellId::all().zip(cols)).unwrap())
    }

    proptest! {
        #[test]
        fn ccc_is_scale_equivariant(t in random_table(), c in 0.1f64..10.0) {
            let scaled = t.map_values(|_, v| v.iter().map(|x| x * c).collect()).unwrap();
            let a = att_triple_changes(&t, Mode::Empirical).unwrap().tau_hat;
            let b = att_triple_changes(&scaled, Mode::Empirical).unwrap().tau_hat;
            prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        #[test]
        fn did_ddd_location_invariant(t in random_table(), shift in -100.0f64..100.0) {
            let moved = t.map_values(|_, v| v.iter().map(|x| x + shift).collect()).unwrap();
            for (a, b) in [
                (att_did(&t, State::S1).unwrap().tau_hat, att_did(&moved, State::S1).unwrap().tau_hat),
                (att_ddd(&t).unwrap().tau_hat, att_ddd(&moved).unwrap().tau_hat),
            ] {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn ccc_reduces_to_cic_without_drift_in_s0(
            t in random_table(),
            control in (1usize..12).prop_flat_map(|n| (
                prop::collection::btree_set(-500i32..500, n),
                prop::collection::btree_set(-500i32..500, n),
            )),
        ) {
            // Both s0 groups copy the s1 control cells, so the s0 drift map is the
            // identity. Exactness needs tie-free control cells of equal size in both
            // periods; otherwise F ∘ F⁻¹ can overshoot between distinct grids k/n.
            let mut t = t;
            for (period, values) in [(Period::T0, &control.0), (Period::T1, &control.1)] {
                let cdf = EmpiricalCdf::new(values.iter().map(|v| *v as f64 * 0.1).collect()).unwrap();
                for (state, group) in [(State::S1, Group::D0), (State::S0, Group::D0), (State::S0, Group::D1)] {
                    t.insert(CellId::new(state, group, period), cdf.clone());
                }
            }
            let ccc = att_triple_changes(&t, Mode::Empirical).unwrap().tau_hat;
            let cic = att_cic(&t, State::S1, Mode::Empirical).unwrap().tau_hat;
            prop_assert_eq!(ccc.to_bits(), cic.to_bits());
        }

        #[test]
        fn estimates_are_deterministic(t in random_table()) {
            let a = estimate(&t, EstimatorKind::CccEmp).unwrap().tau_hat;
            let b = estimate(&t.clone(), EstimatorKind::CccEmp).unwrap().tau_hat;
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
