//! Plug-in asymptotic variance of the empirical triple-changes estimator.
//!
//! The imputation chain applied to each pre-period treated outcome `z` is
//!
//! ```text
//! g7(z) = L1 ∘ L2 ∘ L3 ∘ L4 ∘ L5 ∘ L6 (z)
//! L1 = F⁻¹_{s0d1t1}  L2 = F_{s0d1t0}  L3 = F⁻¹_{s0d0t0}
//! L4 = F_{s0d0t1}    L5 = F⁻¹_{s1d0t1}  L6 = F_{s1d0t0}
//! ```
//!
//! with `g_k = L1 ∘ … ∘ L(k-1)` and `r_k = L(k+1) ∘ … ∘ L6`. Estimation error in
//! link `k` comes only from cell `k`'s sample, so the variance splits into one
//! term per cell. For a CDF link the linearization is the usual
//! `1{y <= x} - F(x)`; for a quantile link it is the same indicator at the
//! quantile, divided by the density there. Each is scaled by the derivative of
//! the outer chain `g_k'`, which is a product of density ratios evaluated at
//! the chain's intermediate points (the step functions themselves have no
//! derivative, so kernel densities stand in).
//!
//! Term `k` is paired with cell `VARIANCE_CELLS[k]`:
//! `V0` treated post-period, `V1..V6` the cells of links `L1..L6`, `V7` the
//! treated pre-period sample pushed through the whole chain.

use serde::{Deserialize, Serialize};

use crate::cell::{cells, CellId, CellTable};
use crate::empirical::{apply_links, resolve_chain, ChainSpec, EmpiricalCdf, LinkKind};
use crate::error::{Error, Result};
use crate::inference::kde::KernelDensity;

/// Cell behind each variance term `V0..V7`.
pub const VARIANCE_CELLS: [CellId; 8] = [
    cells::S1D1T1,
    cells::S0D1T1,
    cells::S0D1T0,
    cells::S0D0T0,
    cells::S0D0T1,
    cells::S1D0T1,
    cells::S1D0T0,
    cells::S1D1T0,
];

/// Plugged densities below this signal that the chain left a cell's support.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// `V0..V7`.
    pub terms: [f64; 8],
    /// `N_k / N` for the cell paired with each term.
    pub p_weights: [f64; 8],
    pub cells: [CellId; 8],
    /// `Σ V_k / p_k`, the asymptotic variance of `sqrt(N) (τ̂ - τ)`.
    pub total: f64,
    /// `sqrt(total / N)`.
    pub se: f64,
    pub n_total: usize,
}

/// Sum of `w(z) * (1{y <= x(z)} - F̂(x(z)))` over z, for many `y`.
struct IndicatorSum {
    thresholds: Vec<f64>,
    /// `suffix[i]` = sum of weights of thresholds `i..`.
    suffix: Vec<f64>,
    centering: f64,
    count: f64,
}

impl IndicatorSum {
    fn new(mut terms: Vec<(f64, f64, f64)>) -> Self {
        // (threshold, weight, F̂(threshold))
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let centering = terms.iter().map(|(_, w, f)| w * f).sum();
        let mut suffix = vec![0.0; terms.len() + 1];
        for i in (0..terms.len()).rev() {
            suffix[i] = suffix[i + 1] + terms[i].1;
        }
        IndicatorSum {
            count: terms.len() as f64,
            thresholds: terms.into_iter().map(|t| t.0).collect(),
            suffix,
            centering,
        }
    }

    fn eval(&self, y: f64) -> f64 {
        let first = self.thresholds.partition_point(|x| *x < y);
        (self.suffix[first] - self.centering) / self.count
    }
}

/// Plugged-in pieces of the influence function, built once per table.
pub struct InfluenceComponents<'a> {
    /// `L1..L6` at positions `0..6`.
    links: Vec<(LinkKind, &'a EmpiricalCdf)>,
    /// Densities of the cells of `L1..L5`.
    densities: Vec<KernelDensity>,
    treated_post: &'a EmpiricalCdf,
    /// Per treated pre-period sample: chain points `p0..p6`, `p6 = z`, `p0 = g7(z)`.
    points: Vec<[f64; 7]>,
    /// Per sample: `g_k'` at `p(k-1)` for `k = 1..=6` (index `k`).
    outer: Vec<[f64; 7]>,
    /// Per sample: density of link `k`'s cell where that link needs it.
    link_density: Vec<[f64; 6]>,
}

fn link_cell(k: usize) -> CellId {
    VARIANCE_CELLS[k]
}

impl<'a> InfluenceComponents<'a> {
    pub fn new(table: &'a CellTable) -> Result<Self> {
        let all: Vec<CellId> = CellId::all().collect();
        table.require(&all)?;
        let links = resolve_chain(&ChainSpec::triple_changes_imputation(), table)?;
        let densities = (1..=5)
            .map(|k| KernelDensity::silverman(links[k - 1].1))
            .collect::<Result<Vec<_>>>()?;
        let treated_pre = table.cell(cells::S1D1T0)?.values();

        let mut points = Vec::with_capacity(treated_pre.len());
        let mut outer = Vec::with_capacity(treated_pre.len());
        let mut link_density = Vec::with_capacity(treated_pre.len());
        // The chain is monotone and `treated_pre` sorted, so repeated
        // evaluation points arrive back to back. Cache the last one per link.
        let mut last: [(f64, f64); 6] = [(f64::NAN, 0.0); 6];
        for &z in treated_pre {
            let mut p = [0.0; 7];
            p[6] = z;
            for k in (1..=6).rev() {
                let (kind, dist) = links[k - 1];
                p[k - 1] = match kind {
                    LinkKind::Cdf => dist.cdf_eval(p[k]),
                    LinkKind::Quantile => dist.quantile_eval(p[k])?,
                };
            }
            // Cdf links L2, L4 need the density at their input, quantile links
            // L1, L3, L5 at their output.
            let mut dens = [0.0; 6];
            for k in 1..=5 {
                let at = if k % 2 == 0 { p[k] } else { p[k - 1] };
                let d = if last[k].0 == at {
                    last[k].1
                } else {
                    let d = densities[k - 1].density(at);
                    last[k] = (at, d);
                    d
                };
                if !(d >= DENSITY_FLOOR) {
                    return Err(Error::DensityUnderflow {
                        cell: link_cell(k),
                        at,
                        density: d,
                    });
                }
                dens[k] = d;
            }
            let mut o = [1.0; 7];
            for k in 2..=6 {
                let j = k - 1;
                let factor = if j % 2 == 0 { dens[j] } else { 1.0 / dens[j] };
                o[k] = o[k - 1] * factor;
            }
            points.push(p);
            outer.push(o);
            link_density.push(dens);
        }
        Ok(InfluenceComponents {
            links,
            densities,
            treated_post: table.cell(cells::S1D1T1)?,
            points,
            outer,
            link_density,
        })
    }

    /// `g_k = L1 ∘ … ∘ L(k-1)` for `k` in `2..=7`.
    pub fn g(&self, k: usize, x: f64) -> Result<f64> {
        assert!((2..=7).contains(&k), "g_k is defined for k in 2..=7");
        apply_links(&self.links[..k - 1], x)
    }

    /// `r_k = L(k+1) ∘ … ∘ L6` for `k` in `1..=5`.
    pub fn r(&self, k: usize, z: f64) -> Result<f64> {
        assert!((1..=5).contains(&k), "r_k is defined for k in 1..=5");
        apply_links(&self.links[k..], z)
    }

    /// Chain-rule derivative of `g_k` at `x`, built from kernel densities.
    pub fn g_prime(&self, k: usize, x: f64) -> Result<f64> {
        assert!((2..=7).contains(&k), "g_k is defined for k in 2..=7");
        let mut value = x;
        let mut slope = 1.0;
        for j in (1..k).rev() {
            let (kind, dist) = self.links[j - 1];
            match kind {
                LinkKind::Cdf => {
                    slope *= self.densities[j - 1].density(value);
                    value = dist.cdf_eval(value);
                }
                LinkKind::Quantile => {
                    value = dist.quantile_eval(value)?;
                    slope /= self.densities[j - 1].density(value);
                }
            }
        }
        Ok(slope)
    }

    fn link_sum(&self, k: usize) -> IndicatorSum {
        let (kind, dist) = self.links[k - 1];
        let terms = self
            .points
            .iter()
            .zip(&self.outer)
            .zip(&self.link_density)
            .map(|((p, o), d)| match kind {
                LinkKind::Cdf => (p[k], o[k], dist.cdf_eval(p[k])),
                LinkKind::Quantile => (p[k - 1], -o[k] / d[k], dist.cdf_eval(p[k - 1])),
            })
            .collect();
        IndicatorSum::new(terms)
    }

    /// `Q_k` evaluated over its own cell's samples, for `k` in `0..=7`.
    pub fn q_values(&self, k: usize) -> Vec<f64> {
        match k {
            0 => {
                let m = self.treated_post.mean();
                self.treated_post.values().iter().map(|y| y - m).collect()
            }
            1..=6 => {
                let sum = self.link_sum(k);
                self.links[k - 1].1.values().iter().map(|&y| sum.eval(y)).collect()
            }
            7 => {
                let m = self.points.iter().map(|p| p[0]).sum::<f64>() / self.points.len() as f64;
                self.points.iter().map(|p| p[0] - m).collect()
            }
            _ => panic!("influence terms are indexed 0..=7"),
        }
    }

    /// `V_k`: mean of `Q_k²` over the paired cell.
    pub fn variance_term(&self, k: usize) -> f64 {
        let q = self.q_values(k);
        q.iter().map(|v| v * v).sum::<f64>() / q.len() as f64
    }
}

/// Plug-in variance of the empirical triple-changes estimate for `table`.
pub fn plugin_variance(table: &CellTable) -> Result<VarianceReport> {
    let parts = InfluenceComponents::new(table)?;
    let n_total = table.total_count();
    let counts = table.counts();
    let mut terms = [0.0; 8];
    let mut p_weights = [0.0; 8];
    let mut total = 0.0;
    for k in 0..8 {
        terms[k] = parts.variance_term(k);
        p_weights[k] = counts[VARIANCE_CELLS[k].index()] as f64 / n_total as f64;
        total += terms[k] / p_weights[k];
    }
    Ok(VarianceReport {
        terms,
        p_weights,
        cells: VARIANCE_CELLS,
        total,
        se: (total / n_total as f64).sqrt(),
        n_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::Distribution1d;
    use crate::parametric::FittedDist;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn gaussian_table(n: usize, seed: u64) -> CellTable {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        CellTable::from_values(CellId::all().map(|c| {
            let shift = c.index() as f64 * 0.1;
            (c, (0..n).map(|_| normal.sample(&mut rng) + shift).collect::<Vec<_>>())
        }))
        .unwrap()
    }

    #[test]
    fn v0_is_treated_variance() {
        let t = gaussian_table(200, 1);
        let report = plugin_variance(&t).unwrap();
        assert_relative_eq!(
            report.terms[0],
            t.cell(cells::S1D1T1).unwrap().variance(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn v7_is_variance_of_imputed_values() {
        let t = gaussian_table(200, 2);
        let parts = InfluenceComponents::new(&t).unwrap();
        let imputed: Vec<f64> = t
            .cell(cells::S1D1T0)
            .unwrap()
            .values()
            .iter()
            .map(|&z| parts.g(7, z).unwrap())
            .collect();
        let cdf = EmpiricalCdf::new(imputed).unwrap();
        assert_relative_eq!(parts.variance_term(7), cdf.variance(), epsilon = 1e-12);
    }

    #[test]
    fn influence_terms_are_centered() {
        let t = gaussian_table(300, 3);
        let parts = InfluenceComponents::new(&t).unwrap();
        for k in 0..8 {
            let q = parts.q_values(k);
            let mean = q.iter().sum::<f64>() / q.len() as f64;
            assert!(mean.abs() <= 5.0 / (q.len() as f64).sqrt(), "Q{k} mean {mean}");
        }
    }

    #[test]
    fn g_and_r_compose_to_the_full_chain() {
        let t = gaussian_table(100, 4);
        let parts = InfluenceComponents::new(&t).unwrap();
        for &z in t.cell(cells::S1D1T0).unwrap().values().iter().take(20) {
            let full = parts.g(7, z).unwrap();
            for k in 1..=5 {
                // g_{k+1} ∘ r_k = g7
                assert_eq!(parts.g(k + 1, parts.r(k, z).unwrap()).unwrap(), full);
            }
        }
    }

    #[test]
    fn g_functions_are_monotone() {
        let t = gaussian_table(100, 5);
        let parts = InfluenceComponents::new(&t).unwrap();
        for k in 2..=7 {
            let probability_input = k % 2 == 0;
            let grid: Vec<f64> = if probability_input {
                (0..=50).map(|i| i as f64 / 50.0).collect()
            } else {
                (0..=50).map(|i| -4.0 + 0.16 * i as f64).collect()
            };
            let vals: Vec<f64> = grid.iter().map(|&x| parts.g(k, x).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "g{k} not monotone");
        }
    }

    #[test]
    fn total_is_positive_and_dominates_terms() {
        let report = plugin_variance(&gaussian_table(400, 6)).unwrap();
        assert!(report.total > 0.0);
        for k in 0..8 {
            assert!(report.terms[k] >= 0.0);
            assert!(report.total >= report.terms[k] / report.p_weights[k]);
        }
        assert_relative_eq!(report.p_weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cell_is_reported() {
        let mut t = gaussian_table(50, 7);
        t.insert(cells::S0D0T0, EmpiricalCdf::new(vec![1.0; 50]).unwrap());
        assert_eq!(plugin_variance(&t).unwrap_err(), Error::DegenerateSample);
    }

    #[test]
    fn chain_rule_matches_finite_differences_on_smooth_links() {
        // The same density-ratio product used for g_k', checked on fitted
        // gaussian links where the chain is differentiable.
        let fits = [
            FittedDist::Loglinear {
                log_mean: 0.2,
                log_sd: 0.6,
            },
            FittedDist::Gaussian { mean: 0.5, sd: 1.0 },
            FittedDist::Gaussian { mean: -0.2, sd: 1.5 },
            FittedDist::Loglinear {
                log_mean: 0.0,
                log_sd: 0.7,
            },
            FittedDist::Gaussian { mean: 2.0, sd: 1.2 },
            FittedDist::Exponential { rate: 0.9 },
        ];
        let kinds = [
            LinkKind::Quantile,
            LinkKind::Cdf,
            LinkKind::Quantile,
            LinkKind::Cdf,
            LinkKind::Quantile,
            LinkKind::Cdf,
        ];
        let eval = |x: f64| {
            let mut v = x;
            let mut slope = 1.0;
            for j in (0..6).rev() {
                match kinds[j] {
                    LinkKind::Cdf => {
                        slope *= fits[j].pdf(v);
                        v = Distribution1d::cdf(&fits[j], v);
                    }
                    LinkKind::Quantile => {
                        v = Distribution1d::quantile(&fits[j], v).unwrap();
                        slope /= fits[j].pdf(v);
                    }
                }
            }
            (v, slope)
        };
        for x in [0.3, 0.8, 1.5, 2.0] {
            let h = 1e-4;
            let fd = (eval(x + h).0 - eval(x - h).0) / (2.0 * h);
            assert_relative_eq!(eval(x).1, fd, max_relative = 1e-6);
        }
    }
}
