use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cell::CellTable;
use crate::empirical::EmpiricalCdf;
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind};
use crate::inference::variance::plugin_variance;

pub const MIN_REPLICATES: usize = 50;

/// Replicates may fail (e.g. a resampled cell with zero spread under MLE);
/// more than this share aborts the run.
const MAX_FAILED_SHARE: f64 = 0.05;

/// Normal-approximation interval from the plug-in standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalInterval {
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub point: f64,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    pub replicate_median: f64,
    pub replicates: usize,
    pub failed: usize,
    pub seed: u64,
    /// Only for the empirical triple-changes estimator, and only when the
    /// plug-in variance is computable.
    pub normal: Option<NormalInterval>,
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Draws `n` values with replacement. Multiplicities are drawn over the sorted
/// input and written back in order, so the result is already sorted.
pub fn resample_sorted<R: Rng + ?Sized>(cdf: &EmpiricalCdf, rng: &mut R) -> EmpiricalCdf {
    let values = cdf.values();
    let n = values.len();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for (v, c) in values.iter().zip(counts) {
        out.extend(std::iter::repeat_n(*v, c as usize));
    }
    EmpiricalCdf::from_sorted_unchecked(out)
}

fn replicate(table: &CellTable, kind: EstimatorKind, seed: u64, index: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut resampled = CellTable::new();
    for (id, cdf) in table.iter() {
        resampled.insert(id, resample_sorted(cdf, &mut rng));
    }
    Ok(estimate(&resampled, kind)?.tau_hat)
}

/// Stratified percentile bootstrap: each cell is resampled on its own.
pub fn bootstrap_ci(
    table: &CellTable,
    kind: EstimatorKind,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapReport> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must be in (0, 1), got {level}")));
    }
    let point = estimate(table, kind)?.tau_hat;

    let results: Vec<Result<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| replicate(table, kind, seed, i))
        .collect();
    let mut draws = Vec::with_capacity(replicates);
    let mut failed = 0;
    let mut first_error = None;
    for r in results {
        match r {
            Ok(v) => draws.push(v),
            Err(e) => {
                failed += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failed as f64 > MAX_FAILED_SHARE * replicates as f64 {
        return Err(Error::BootstrapFailures {
            failed,
            total: replicates,
            first: Box::new(first_error.expect("failures recorded")),
        });
    }
    draws.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;

    let normal = match kind {
        EstimatorKind::CccEmp => plugin_variance(table).ok().map(|v| {
            let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
            NormalInterval {
                se: v.se,
                lo: point - z * v.se,
                hi: point + z * v.se,
            }
        }),
        _ => None,
    };

    Ok(BootstrapReport {
        point,
        level,
        lo: percentile(&draws, alpha / 2.0),
        hi: percentile(&draws, 1.0 - alpha / 2.0),
        replicate_median: percentile(&draws, 0.5),
        replicates,
        failed,
        seed,
        normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellId;
    use rand_distr::{Distribution, Normal as NormalDist};

    fn gaussian_table(n: usize, seed: u64) -> CellTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = NormalDist::new(0.0, 1.0).unwrap();
        CellTable::from_values(CellId::all().map(|c| {
            let shift = c.index() as f64 * 0.2;
            (c, (0..n).map(|_| normal.sample(&mut rng) + shift).collect::<Vec<_>>())
        }))
        .unwrap()
    }

    #[test]
    fn percentile_type7() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&x, 0.0), 1.0);
        assert_eq!(percentile(&x, 1.0), 4.0);
        assert_eq!(percentile(&x, 0.5), 2.5);
        assert!((percentile(&x, 0.1) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn resample_is_sorted_and_drawn_from_input() {
        let cdf = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 5.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = resample_sorted(&cdf, &mut rng);
        assert_eq!(r.len(), 5);
        assert!(r.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(r.values().iter().all(|v| cdf.values().contains(v)));
    }

    #[test]
    fn constant_cells_give_zero_width() {
        let t = CellTable::from_values(CellId::all().map(|c| (c, vec![c.index() as f64; 10]))).unwrap();
        for kind in [EstimatorKind::CccEmp, EstimatorKind::Ddd, EstimatorKind::CicEmp] {
            let r = bootstrap_ci(&t, kind, 60, 0.9, 3).unwrap();
            assert_eq!(r.lo, r.hi);
            assert_eq!(r.lo, r.point);
        }
    }

    #[test]
    fn same_seed_same_report() {
        let t = gaussian_table(80, 4);
        let a = bootstrap_ci(&t, EstimatorKind::CccEmp, 60, 0.9, 17).unwrap();
        let b = bootstrap_ci(&t, EstimatorKind::CccEmp, 60, 0.9, 17).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(&t, EstimatorKind::CccEmp, 60, 0.9, 18).unwrap();
        assert_ne!((a.lo, a.hi), (c.lo, c.hi));
    }

    #[test]
    fn interval_is_ordered_and_has_normal_alternative() {
        let t = gaussian_table(100, 5);
        let r = bootstrap_ci(&t, EstimatorKind::CccEmp, 100, 0.9, 1).unwrap();
        assert!(r.lo <= r.replicate_median && r.replicate_median <= r.hi);
        let n = r.normal.expect("plug-in se available");
        assert!(n.lo < r.point && r.point < n.hi);
        assert!(bootstrap_ci(&t, EstimatorKind::Did, 50, 0.9, 1)
            .unwrap()
            .normal
            .is_none());
    }

    #[test]
    fn parameter_validation() {
        let t = gaussian_table(10, 6);
        assert!(matches!(
            bootstrap_ci(&t, EstimatorKind::Ddd, 49, 0.9, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            bootstrap_ci(&t, EstimatorKind::Ddd, 50, 1.0, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn excessive_failures_abort() {
        use crate::parametric::{Family, MleSpec};
        // Two distinct values: most resamples keep both, but with n = 2 about
        // half collapse to a single value and the gaussian fit fails.
        let t = CellTable::from_values(CellId::all().map(|c| (c, vec![1.0, 2.0]))).unwrap();
        let kind = EstimatorKind::CccMle(MleSpec::uniform(Family::Gaussian));
        assert!(matches!(
            bootstrap_ci(&t, kind, 50, 0.9, 0),
            Err(Error::BootstrapFailures { .. })
        ));
    }
}
