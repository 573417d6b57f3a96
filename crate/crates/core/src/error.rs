use thiserror::Error;

use crate::cell::CellId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cell {0} has no samples")]
    EmptyCell(CellId),

    #[error("empirical distribution needs at least one sample")]
    EmptySample,

    #[error("sample contains a non-finite value ({0})")]
    NonFinite(f64),

    #[error("cell {0} is missing from the table")]
    MissingCell(CellId),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("chain link {index}: {source}")]
    Link {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("chain is ill-typed at link {0}: links must alternate quantile/cdf and end with a cdf")]
    IllTypedChain(usize),

    #[error("slack parameters must be nonnegative (eps = {eps}, delta = {delta})")]
    NegativeSlack { eps: f64, delta: f64 },

    #[error("panel has no linked pairs")]
    EmptyPanel,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("value {value} is outside the support of the {family} family")]
    DomainError { family: &'static str, value: f64 },

    #[error("sample has zero spread; kernel density is undefined")]
    DegenerateSample,

    #[error("plugged density {density:e} at {at} in cell {cell} is below the underflow floor")]
    DensityUnderflow { cell: CellId, at: f64, density: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{failed} of {total} bootstrap replicates failed (first error: {first})")]
    BootstrapFailures {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },

    #[error("point dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cloud sizes differ: {source_len} source vs {target_len} target points")]
    SizeMismatch { source_len: usize, target_len: usize },

    #[error("numerical underflow in transport solver: {0}")]
    NumericalUnderflow(String),

    #[error("map {map}: {source}")]
    Map {
        map: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("true treatment effect of design `{0}` is zero; relative bias is undefined")]
    ZeroTrueTau(String),
}

impl Error {
    pub(crate) fn at_link(self, index: usize) -> Error {
        Error::Link {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_map(self, map: &'static str) -> Error {
        Error::Map {
            map,
            source: Box::new(self),
        }
    }
}
