use std::fmt;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::CellTable;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind};
use crate::simlab::dgm::{generate, DgmSpec};

/// An estimator in a simulation grid. `CorrectMle` picks, per design, the
/// families under which the model-based estimator is correctly specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimEstimator {
    Kind(EstimatorKind),
    CorrectMle { triple: bool },
}

impl SimEstimator {
    pub fn resolve(&self, spec: &DgmSpec) -> Result<EstimatorKind> {
        match *self {
            SimEstimator::Kind(kind) => Ok(kind),
            SimEstimator::CorrectMle { triple } => {
                let families = spec.correct_families().ok_or_else(|| {
                    Error::InvalidParameter(format!("design `{}` has no correctly specified family", spec.name))
                })?;
                Ok(if triple {
                    EstimatorKind::CccMle(families)
                } else {
                    EstimatorKind::CicMle(families)
                })
            }
        }
    }
}

impl From<EstimatorKind> for SimEstimator {
    fn from(kind: EstimatorKind) -> Self {
        SimEstimator::Kind(kind)
    }
}

impl fmt::Display for SimEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEstimator::Kind(kind) => write!(f, "{kind}"),
            SimEstimator::CorrectMle { triple: true } => f.write_str("CCC_MLE[correct]"),
            SimEstimator::CorrectMle { triple: false } => f.write_str("CIC_MLE[correct]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub spec: String,
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    /// `|1 - mean(τ̂) / τ|`.
    pub mean_rel_bias: f64,
    /// Standard deviation of `τ̂ / τ` across replications.
    pub sd: f64,
    /// `mean |1 - τ̂ / τ|`.
    pub mean_abs_rel_error: f64,
    pub mean_tau_hat: f64,
    pub true_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub rows: Vec<SimRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    spec: &'a str,
    estimator: &'a str,
    n: usize,
    reps: usize,
    mean_rel_bias: f64,
    sd: f64,
}

impl SimReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                spec: &r.spec,
                estimator: &r.estimator,
                n: r.n,
                reps: r.reps,
                mean_rel_bias: r.mean_rel_bias,
                sd: r.sd,
            })?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn row(&self, spec: &str, estimator: &str, n: usize) -> Option<&SimRow> {
        self.rows
            .iter()
            .find(|r| r.spec == spec && r.estimator == estimator && r.n == n)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at sample size `n`. Shared across designs and
/// estimators, so every estimator sees the same draws.
pub fn replication_seed(master: u64, n: usize, rep: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n as u64) ^ rep as u64)
}

fn summarize(spec: &DgmSpec, estimator: String, n: usize, taus: &[f64]) -> SimRow {
    let tau = spec.true_tau();
    let reps = taus.len();
    let ratios: Vec<f64> = taus.iter().map(|t| t / tau).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / reps as f64;
    let sd = if reps > 1 {
        (ratios.iter().map(|r| (r - mean_ratio).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
    } else {
        0.0
    };
    SimRow {
        spec: spec.name.to_string(),
        estimator,
        n,
        reps,
        mean_rel_bias: (1.0 - mean_ratio).abs(),
        sd,
        mean_abs_rel_error: ratios.iter().map(|r| (1.0 - r).abs()).sum::<f64>() / reps as f64,
        mean_tau_hat: taus.iter().sum::<f64>() / reps as f64,
        true_tau: tau,
    }
}

/// Runs `reps` generations per (design, n) and applies each labelled
/// estimator to every generated table. Rows are ordered by design, then
/// estimator, then n.
pub fn relative_bias_experiment_with<F>(
    specs: &[DgmSpec],
    labels: &[String],
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    estimator: F,
) -> Result<SimReport>
where
    F: Fn(&DgmSpec, usize, &CellTable) -> Result<f64> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    if let Some(spec) = specs.iter().find(|s| s.true_tau() == 0.0) {
        return Err(Error::ZeroTrueTau(spec.name.to_string()));
    }
    let mut rows = Vec::with_capacity(specs.len() * labels.len() * n_grid.len());
    for spec in specs {
        // taus[n index][estimator][rep]
        let mut taus = Vec::with_capacity(n_grid.len());
        for &n in n_grid {
            let per_rep: Vec<Vec<f64>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let (table, _) = generate(spec, n, replication_seed(seed, n, rep))?;
                    (0..labels.len()).map(|e| estimator(spec, e, &table)).collect()
                })
                .collect::<Result<_>>()?;
            let by_est: Vec<Vec<f64>> = (0..labels.len())
                .map(|e| per_rep.iter().map(|r| r[e]).collect())
                .collect();
            taus.push(by_est);
        }
        for (e, label) in labels.iter().enumerate() {
            for (k, &n) in n_grid.iter().enumerate() {
                rows.push(summarize(spec, label.clone(), n, &taus[k][e]));
            }
        }
    }
    Ok(SimReport { seed, rows })
}

/// Relative bias `|1 - τ̂/τ|` of each estimator across designs and sample
/// sizes.
pub fn relative_bias_experiment(
    specs: &[DgmSpec],
    estimators: &[SimEstimator],
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<SimReport> {
    let resolved: Vec<Vec<EstimatorKind>> = specs
        .iter()
        .map(|s| estimators.iter().map(|e| e.resolve(s)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let labels: Vec<String> = estimators.iter().map(|e| e.to_string()).collect();
    relative_bias_experiment_with(specs, &labels, n_grid, reps, seed, |spec, e, table| {
        let index = specs
            .iter()
            .position(|s| std::ptr::eq(s, spec))
            .expect("spec from the list");
        Ok(estimate(table, resolved[index][e])?.tau_hat)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_estimator_has_zero_bias() {
        let specs = [DgmSpec::linear(), DgmSpec::nonlinear()];
        let report =
            relative_bias_experiment_with(&specs, &["oracle".into()], &[10, 20], 5, 1, |s, _, _| Ok(s.true_tau()))
                .unwrap();
        assert_eq!(report.rows.len(), 4);
        for r in &report.rows {
            assert_eq!(r.mean_rel_bias, 0.0);
            assert_eq!(r.mean_abs_rel_error, 0.0);
            assert_eq!(r.sd, 0.0);
        }
    }

    #[test]
    fn row_layout_and_determinism() {
        let ests: Vec<SimEstimator> = [EstimatorKind::Did, EstimatorKind::Ddd, EstimatorKind::CccEmp]
            .into_iter()
            .map(Into::into)
            .collect();
        let a = relative_bias_experiment(&[DgmSpec::linear()], &ests, &[30, 60], 4, 9).unwrap();
        assert_eq!(a.rows.len(), 6);
        let order: Vec<(&str, usize)> = a.rows.iter().map(|r| (r.estimator.as_str(), r.n)).collect();
        assert_eq!(
            order,
            vec![
                ("DID", 30),
                ("DID", 60),
                ("DDD", 30),
                ("DDD", 60),
                ("CCC_EMP", 30),
                ("CCC_EMP", 60)
            ]
        );
        assert!(a.rows.iter().all(|r| r.mean_rel_bias >= 0.0 && r.sd >= 0.0));
        assert_eq!(
            a,
            relative_bias_experiment(&[DgmSpec::linear()], &ests, &[30, 60], 4, 9).unwrap()
        );
    }

    #[test]
    fn same_draws_across_estimator_lists() {
        let one = relative_bias_experiment(&[DgmSpec::linear()], &[EstimatorKind::Ddd.into()], &[40], 3, 2).unwrap();
        let two = relative_bias_experiment(
            &[DgmSpec::linear()],
            &[EstimatorKind::Did.into(), EstimatorKind::Ddd.into()],
            &[40],
            3,
            2,
        )
        .unwrap();
        assert_eq!(one.rows[0], two.rows[1]);
    }

    #[test]
    fn csv_columns() {
        let r = relative_bias_experiment(&[DgmSpec::linear()], &[EstimatorKind::Ddd.into()], &[20], 2, 0).unwrap();
        let csv = r.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("spec,estimator,n,reps,mean_rel_bias,sd"));
        assert!(lines.next().unwrap().starts_with("linear,DDD,20,2,"));
    }

    #[test]
    fn zero_effect_rejected() {
        let mut spec = DgmSpec::linear();
        spec.treated = crate::simlab::dgm::Law::Gaussian { mean: 1.75, sd: 1.0 };
        assert_eq!(
            relative_bias_experiment(&[spec], &[EstimatorKind::Ddd.into()], &[10], 1, 0),
            Err(Error::ZeroTrueTau("linear".into()))
        );
    }

    #[test]
    fn correct_mle_resolves_per_design() {
        let e = SimEstimator::CorrectMle { triple: true };
        assert!(matches!(e.resolve(&DgmSpec::nonlinear()), Ok(EstimatorKind::CccMle(_))));
        assert!(e.resolve(&DgmSpec::exponential_misspec()).is_err());
    }
}
