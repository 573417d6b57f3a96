//! Maximum-likelihood fits used by the model-based estimator variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::cell::CellId;
use crate::empirical::{clamp_probability, Distribution1d, EmpiricalCdf};
use crate::error::{Error, Result};

/// Probabilities are kept this far from 0 and 1 before inverting an unbounded
/// parametric CDF, so far-tail samples map to finite values.
pub const TAIL_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Exponential,
    /// Gaussian on the log scale.
    Loglinear,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
            Family::Loglinear => "loglinear",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "exponential" => Ok(Family::Exponential),
            "loglinear" => Ok(Family::Loglinear),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

/// Family choice per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MleSpec {
    families: [Family; 8],
}

impl MleSpec {
    pub fn uniform(family: Family) -> Self {
        MleSpec { families: [family; 8] }
    }

    pub fn with(mut self, cell: CellId, family: Family) -> Self {
        self.families[cell.index()] = family;
        self
    }

    pub fn family(&self, cell: CellId) -> Family {
        self.families[cell.index()]
    }

    /// The single family if every cell uses the same one.
    pub fn as_uniform(&self) -> Option<Family> {
        let first = self.families[0];
        self.families.iter().all(|f| *f == first).then_some(first)
    }
}

impl fmt::Display for MleSpec {
    /// The most common family, then `+cell:family` for each exception, e.g.
    /// `gaussian+s0d1t1:loglinear`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = [Family::Gaussian, Family::Exponential, Family::Loglinear]
            .into_iter()
            .max_by_key(|fam| {
                (
                    self.families.iter().filter(|g| *g == fam).count(),
                    std::cmp::Reverse(*fam as u8),
                )
            })
            .expect("nonempty");
        write!(f, "{base}")?;
        for c in CellId::all().filter(|c| self.family(*c) != base) {
            write!(f, "+{c}:{}", self.family(c))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedDist {
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Loglinear { log_mean: f64, log_sd: f64 },
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl FittedDist {
    pub fn family(&self) -> Family {
        match self {
            FittedDist::Gaussian { .. } => Family::Gaussian,
            FittedDist::Exponential { .. } => Family::Exponential,
            FittedDist::Loglinear { .. } => Family::Loglinear,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FittedDist::Gaussian { mean, .. } => mean,
            FittedDist::Exponential { rate } => 1.0 / rate,
            FittedDist::Loglinear { log_mean, log_sd } => (log_mean + 0.5 * log_sd * log_sd).exp(),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            FittedDist::Gaussian { mean, sd } => std_normal().cdf((y - mean) / sd),
            FittedDist::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-rate * y).exp_m1()
                }
            }
            FittedDist::Loglinear { log_mean, log_sd } => {
                if y <= 0.0 {
                    0.0
                } else {
                    std_normal().cdf((y.ln() - log_mean) / log_sd)
                }
            }
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            FittedDist::Gaussian { mean, sd } => std_normal().pdf((y - mean) / sd) / sd,
            FittedDist::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
            FittedDist::Loglinear { log_mean, log_sd } => {
                if y <= 0.0 {
                    0.0
                } else {
                    std_normal().pdf((y.ln() - log_mean) / log_sd) / (log_sd * y)
                }
            }
        }
    }

    /// Closed-form inverse CDF. `u` is held inside `[TAIL_FLOOR, 1 - TAIL_FLOOR]`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let u = clamp_probability(u)?.clamp(TAIL_FLOOR, 1.0 - TAIL_FLOOR);
        Ok(match *self {
            FittedDist::Gaussian { mean, sd } => mean + sd * std_normal().inverse_cdf(u),
            FittedDist::Exponential { rate } => -(-u).ln_1p() / rate,
            FittedDist::Loglinear { log_mean, log_sd } => (log_mean + log_sd * std_normal().inverse_cdf(u)).exp(),
        })
    }
}

impl Distribution1d for FittedDist {
    fn cdf(&self, y: f64) -> f64 {
        FittedDist::cdf(self, y)
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        FittedDist::quantile(self, u)
    }
}

fn gaussian_mle(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
    (mean, var.sqrt())
}

/// Maximum-likelihood fit of `family` to one cell.
pub fn fit_parametric(samples: &EmpiricalCdf, family: Family) -> Result<FittedDist> {
    let values = samples.values();
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!(
            "{family} fit needs at least 2 samples, got {n}"
        )));
    }
    if matches!(family, Family::Exponential | Family::Loglinear) && values[0] <= 0.0 {
        return Err(Error::DomainError {
            family: family.name(),
            value: values[0],
        });
    }
    match family {
        Family::Gaussian => {
            let (mean, sd) = gaussian_mle(values.iter().copied(), n);
            if !(sd > 0.0) {
                return Err(Error::DegenerateFit("gaussian fit has zero variance".into()));
            }
            Ok(FittedDist::Gaussian { mean, sd })
        }
        Family::Exponential => {
            let mean = values.iter().sum::<f64>() / n as f64;
            Ok(FittedDist::Exponential { rate: 1.0 / mean })
        }
        Family::Loglinear => {
            let (log_mean, log_sd) = gaussian_mle(values.iter().map(|v| v.ln()), n);
            if !(log_sd > 0.0) {
                return Err(Error::DegenerateFit("loglinear fit has zero log-variance".into()));
            }
            Ok(FittedDist::Loglinear { log_mean, log_sd })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal as NormalDist};

    fn ecdf(v: &[f64]) -> EmpiricalCdf {
        EmpiricalCdf::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gaussian_two_point() {
        let f = fit_parametric(&ecdf(&[0.0, 2.0]), Family::Gaussian).unwrap();
        assert_eq!(f, FittedDist::Gaussian { mean: 1.0, sd: 1.0 });
    }

    #[test]
    fn exponential_rate_inverts_mean() {
        let f = fit_parametric(&ecdf(&[1.5, 3.75, 6.0]), Family::Exponential).unwrap();
        match f {
            FittedDist::Exponential { rate } => assert_relative_eq!(rate, 4.0 / 15.0, epsilon = 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn loglinear_recovers_log_scale_parameters() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = NormalDist::new(0.3, 0.7).unwrap();
        let logs: Vec<f64> = (0..500).map(|_| normal.sample(&mut rng)).collect();
        let (m, s) = gaussian_mle(logs.iter().copied(), logs.len());
        let fit = fit_parametric(
            &ecdf(&logs.iter().map(|v| v.exp()).collect::<Vec<_>>()),
            Family::Loglinear,
        )
        .unwrap();
        match fit {
            FittedDist::Loglinear { log_mean, log_sd } => {
                assert_relative_eq!(log_mean, m, epsilon = 1e-12);
                assert_relative_eq!(log_sd, s, epsilon = 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_and_domain_errors() {
        assert!(matches!(
            fit_parametric(&ecdf(&[1.0]), Family::Gaussian),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_parametric(&ecdf(&[2.0, 2.0, 2.0]), Family::Gaussian),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_parametric(&ecdf(&[0.0, 1.0]), Family::Loglinear),
            Err(Error::DomainError { .. })
        ));
        assert!(matches!(
            fit_parametric(&ecdf(&[-1.0, 1.0]), Family::Exponential),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let fits = [
            FittedDist::Gaussian { mean: 1.0, sd: 2.0 },
            FittedDist::Exponential { rate: 0.5 },
            FittedDist::Loglinear {
                log_mean: 0.2,
                log_sd: 0.9,
            },
        ];
        for f in fits {
            for u in [0.01, 0.2, 0.5, 0.77, 0.99] {
                let y = f.quantile(u).unwrap();
                assert_relative_eq!(f.cdf(y), u, epsilon = 1e-9);
            }
            assert!(f.quantile(1.0).unwrap().is_finite());
            assert!(f.quantile(0.0).unwrap().is_finite());
        }
    }

    #[test]
    fn pdf_matches_cdf_slope() {
        let fits = [
            FittedDist::Gaussian { mean: 1.0, sd: 2.0 },
            FittedDist::Exponential { rate: 0.5 },
            FittedDist::Loglinear {
                log_mean: 0.2,
                log_sd: 0.9,
            },
        ];
        for f in fits {
            for y in [0.3, 1.0, 2.5] {
                let h = 1e-5;
                let fd = (f.cdf(y + h) - f.cdf(y - h)) / (2.0 * h);
                assert_relative_eq!(f.pdf(y), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn mle_spec_display() {
        use crate::cell::cells::S0D1T1;
        assert_eq!(MleSpec::uniform(Family::Gaussian).to_string(), "gaussian");
        let mixed = MleSpec::uniform(Family::Gaussian).with(S0D1T1, Family::Loglinear);
        assert!(mixed.as_uniform().is_none());
        assert_eq!(mixed.to_string(), "gaussian+s0d1t1:loglinear");
    }
}
