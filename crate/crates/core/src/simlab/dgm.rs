use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::cell::{cells, CellId, CellTable, Group, Period, State};
use crate::error::{Error, Result};
use crate::parametric::{Family, MleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignName {
    Linear,
    Nonlinear,
    ExponentialMisspec,
}

impl DesignName {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignName::Linear => "linear",
            DesignName::Nonlinear => "nonlinear",
            DesignName::ExponentialMisspec => "exponential_misspec",
        }
    }
}

impl fmt::Display for DesignName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "linear" => Ok(DesignName::Linear),
            "nonlinear" => Ok(DesignName::Nonlinear),
            "exponential_misspec" | "exponential" => Ok(DesignName::ExponentialMisspec),
            other => Err(Error::InvalidParameter(format!("unknown design `{other}`"))),
        }
    }
}

/// A one-dimensional law with closed-form moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Law {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// Rate parametrization: mean `1 / rate`.
    Exponential {
        rate: f64,
    },
}

impl Law {
    pub fn mean(&self) -> f64 {
        match *self {
            Law::Gaussian { mean, .. } => mean,
            Law::Exponential { rate } => 1.0 / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Law::Gaussian { sd, .. } => sd * sd,
            Law::Exponential { rate } => 1.0 / (rate * rate),
        }
    }

    /// `E[exp(kX)]`, infinite where it does not exist.
    pub fn mgf(&self, k: f64) -> f64 {
        match *self {
            Law::Gaussian { mean, sd } => (k * mean + 0.5 * k * k * sd * sd).exp(),
            Law::Exponential { rate } => {
                if k < rate {
                    rate / (rate - k)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn sampler(&self) -> Result<Sampler> {
        let bad = |e: &dyn fmt::Display| Error::InvalidParameter(format!("invalid law {self:?}: {e}"));
        Ok(match *self {
            Law::Gaussian { mean, sd } => Sampler::Gaussian(Normal::new(mean, sd).map_err(|e| bad(&e))?),
            Law::Exponential { rate } => Sampler::Exponential(Exp::new(rate).map_err(|e| bad(&e))?),
        })
    }
}

enum Sampler {
    Gaussian(Normal<f64>),
    Exponential(Exp<f64>),
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Gaussian(d) => d.sample(rng),
            Sampler::Exponential(d) => d.sample(rng),
        }
    }
}

/// Shape of the post-period production function of one (state, group).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Production {
    /// `h(u; t) = 2u + c t`.
    Linear,
    /// `h(u; t0) = 2u`, `h(u; t1) = 0.1 exp(2u + c)`.
    ExpPost,
}

/// A synthetic design. Arrays over (state, group) are indexed `2 s + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgmSpec {
    pub name: DesignName,
    pub latent: [Law; 4],
    pub production: [Production; 4],
    /// Observed post-period outcome of the treated cell.
    pub treated: Law,
}

fn group_index(state: State, group: Group) -> usize {
    2 * state.code() as usize + group.code() as usize
}

/// `(1 + s)/4 + (d - 0.5)/2`.
fn time_effect(state: State, group: Group) -> f64 {
    (1.0 + state.code() as f64) / 4.0 + (group.code() as f64 - 0.5) / 2.0
}

impl DgmSpec {
    pub fn linear() -> Self {
        let g = |mean| Law::Gaussian { mean, sd: 1.0 };
        DgmSpec {
            name: DesignName::Linear,
            latent: [g(0.0), g(0.25), g(-0.25), g(0.5)],
            production: [Production::Linear; 4],
            treated: Law::Gaussian { mean: 2.75, sd: 1.0 },
        }
    }

    pub fn nonlinear() -> Self {
        let g = |mean, sd| Law::Gaussian { mean, sd };
        DgmSpec {
            name: DesignName::Nonlinear,
            latent: [g(0.0, 1.0), g(0.25, 1.0), g(-0.25, 1.0), g(-0.5, 1.25)],
            production: [
                Production::Linear,
                Production::ExpPost,
                Production::Linear,
                Production::ExpPost,
            ],
            treated: Law::Gaussian { mean: 10.0, sd: 1.0 },
        }
    }

    pub fn exponential_misspec() -> Self {
        let e = |rate| Law::Exponential { rate };
        DgmSpec {
            name: DesignName::ExponentialMisspec,
            latent: [e(1.0), e(2.0), e(3.0), e(1.0)],
            production: [Production::Linear; 4],
            treated: Law::Exponential { rate: 4.0 / 15.0 },
        }
    }

    pub fn by_name(name: DesignName) -> Self {
        match name {
            DesignName::Linear => DgmSpec::linear(),
            DesignName::Nonlinear => DgmSpec::nonlinear(),
            DesignName::ExponentialMisspec => DgmSpec::exponential_misspec(),
        }
    }

    pub fn latent_law(&self, state: State, group: Group) -> Law {
        self.latent[group_index(state, group)]
    }

    /// Untreated outcome `h_{s,d}(u; t)`.
    pub fn production(&self, state: State, group: Group, period: Period, u: f64) -> f64 {
        let c = time_effect(state, group);
        match (self.production[group_index(state, group)], period) {
            (Production::ExpPost, Period::T1) => 0.1 * (2.0 * u + c).exp(),
            (_, Period::T0) => 2.0 * u,
            (Production::Linear, Period::T1) => 2.0 * u + c,
        }
    }

    /// Mean and variance of `h_{s,d}(U; t)`.
    pub fn untreated_moments(&self, state: State, group: Group, period: Period) -> (f64, f64) {
        let law = self.latent_law(state, group);
        let c = time_effect(state, group);
        match (self.production[group_index(state, group)], period) {
            (Production::ExpPost, Period::T1) => {
                let (m2, m4) = (law.mgf(2.0), law.mgf(4.0));
                let scale = 0.1 * c.exp();
                (scale * m2, scale * scale * (m4 - m2 * m2))
            }
            (_, Period::T0) => (2.0 * law.mean(), 4.0 * law.variance()),
            (Production::Linear, Period::T1) => (2.0 * law.mean() + c, 4.0 * law.variance()),
        }
    }

    /// Mean and variance of the observed outcomes in `cell`.
    pub fn cell_moments(&self, cell: CellId) -> (f64, f64) {
        if cell == cells::S1D1T1 {
            (self.treated.mean(), self.treated.variance())
        } else {
            self.untreated_moments(cell.state, cell.group, cell.period)
        }
    }

    /// `E[Y(t1) | s1, d1] - E[h_{s1,d1}(U; t1) | s1, d1]`.
    pub fn true_tau(&self) -> f64 {
        self.treated.mean() - self.untreated_moments(State::S1, Group::D1, Period::T1).0
    }

    /// Families under which every estimated link is correctly specified, if
    /// the design has such a choice.
    pub fn correct_families(&self) -> Option<MleSpec> {
        let mut spec = MleSpec::uniform(Family::Gaussian);
        for cell in CellId::all() {
            if cell == cells::S1D1T1 {
                continue;
            }
            let law = self.latent_law(cell.state, cell.group);
            let family = match (law, self.production[group_index(cell.state, cell.group)], cell.period) {
                (Law::Gaussian { .. }, Production::ExpPost, Period::T1) => Family::Loglinear,
                (Law::Gaussian { .. }, _, _) => Family::Gaussian,
                // A shifted exponential is not in any supported family.
                (Law::Exponential { .. }, _, Period::T1) => return None,
                (Law::Exponential { .. }, _, Period::T0) => Family::Exponential,
            };
            spec = spec.with(cell, family);
        }
        Some(spec)
    }
}

/// Draws `n` outcomes per cell. Cell `c` uses stream `c.index()` of a
/// generator seeded with `seed`, so cells are independent and reproducible.
pub fn generate(spec: &DgmSpec, n: usize, seed: u64) -> Result<(CellTable, f64)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples per cell, got {n}"
        )));
    }
    let mut table = CellTable::new();
    for cell in CellId::all() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cell.index() as u64);
        let values: Vec<f64> = if cell == cells::S1D1T1 {
            let sampler = spec.treated.sampler()?;
            (0..n).map(|_| sampler.draw(&mut rng)).collect()
        } else {
            let sampler = spec.latent_law(cell.state, cell.group).sampler()?;
            (0..n)
                .map(|_| spec.production(cell.state, cell.group, cell.period, sampler.draw(&mut rng)))
                .collect()
        };
        table.insert(cell, crate::empirical::EmpiricalCdf::new(values)?);
    }
    Ok((table, spec.true_tau()))
}
