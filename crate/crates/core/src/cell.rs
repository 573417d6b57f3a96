//! The eight-cell study layout: two states, two eligibility groups, two periods.
//!
//! State `s1` is the one where the policy is adopted; group `d1` is the eligible
//! cohort; period `t1` is after adoption. The cell `(s1, d1, t1)` is the only one
//! whose untreated outcome is never observed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalCdf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum State {
    S0,
    S1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    D0,
    D1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Period {
    T0,
    T1,
}

macro_rules! binary_code {
    ($ty:ident, $zero:ident, $one:ident) => {
        impl $ty {
            pub fn code(self) -> u8 {
                match self {
                    $ty::$zero => 0,
                    $ty::$one => 1,
                }
            }

            pub fn from_code(code: u8) -> Option<Self> {
                match code {
                    0 => Some($ty::$zero),
                    1 => Some($ty::$one),
                    _ => None,
                }
            }
        }
    };
}

binary_code!(State, S0, S1);
binary_code!(Group, D0, D1);
binary_code!(Period, T0, T1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub state: State,
    pub group: Group,
    pub period: Period,
}

impl CellId {
    pub const fn new(state: State, group: Group, period: Period) -> Self {
        CellId { state, group, period }
    }

    /// Builds a cell id from 0/1 codes, as they appear in data files.
    pub fn from_codes(s: u8, d: u8, t: u8) -> Option<Self> {
        Some(CellId::new(
            State::from_code(s)?,
            Group::from_code(d)?,
            Period::from_code(t)?,
        ))
    }

    /// Position in `0..8`; the bits are `s`, `d`, `t` from high to low.
    pub fn index(self) -> usize {
        ((self.state.code() as usize) << 2) | ((self.group.code() as usize) << 1) | self.period.code() as usize
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 8, "cell index {index} out of range");
        CellId::from_codes((index >> 2) as u8 & 1, (index >> 1) as u8 & 1, index as u8 & 1)
            .expect("masked codes are binary")
    }

    pub fn all() -> impl Iterator<Item = CellId> {
        (0..8).map(CellId::from_index)
    }

    pub fn with_period(self, period: Period) -> Self {
        CellId { period, ..self }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}d{}t{}", self.state.code(), self.group.code(), self.period.code())
    }
}

impl FromStr for CellId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let b = s.as_bytes();
        let bad = || Error::InvalidParameter(format!("`{s}` is not a cell name like s0d1t1"));
        if b.len() != 6 || b[0] != b's' || b[2] != b'd' || b[4] != b't' {
            return Err(bad());
        }
        let digit = |c: u8| c.checked_sub(b'0').filter(|v| *v <= 1);
        CellId::from_codes(
            digit(b[1]).ok_or_else(bad)?,
            digit(b[3]).ok_or_else(bad)?,
            digit(b[5]).ok_or_else(bad)?,
        )
        .ok_or_else(bad)
    }
}

/// Short constructors for the eight cells, named `s{s}d{d}t{t}`.
pub mod cells {
    use super::{CellId, Group, Period, State};

    pub const S0D0T0: CellId = CellId::new(State::S0, Group::D0, Period::T0);
    pub const S0D0T1: CellId = CellId::new(State::S0, Group::D0, Period::T1);
    pub const S0D1T0: CellId = CellId::new(State::S0, Group::D1, Period::T0);
    pub const S0D1T1: CellId = CellId::new(State::S0, Group::D1, Period::T1);
    pub const S1D0T0: CellId = CellId::new(State::S1, Group::D0, Period::T0);
    pub const S1D0T1: CellId = CellId::new(State::S1, Group::D0, Period::T1);
    pub const S1D1T0: CellId = CellId::new(State::S1, Group::D1, Period::T0);
    pub const S1D1T1: CellId = CellId::new(State::S1, Group::D1, Period::T1);
}

/// Observed samples for up to eight cells.
///
/// The treated post-period cell may be absent when only the counterfactual
/// distribution is wanted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellTable {
    cells: [Option<EmpiricalCdf>; 8],
}

impl CellTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from raw per-cell values. Empty vectors are rejected.
    pub fn from_values<I, V>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CellId, V)>,
        V: Into<Vec<f64>>,
    {
        let mut table = CellTable::new();
        for (id, values) in entries {
            let cdf = EmpiricalCdf::new(values.into()).map_err(|e| match e {
                Error::EmptySample => Error::EmptyCell(id),
                other => other,
            })?;
            table.insert(id, cdf);
        }
        Ok(table)
    }

    pub fn insert(&mut self, id: CellId, cdf: EmpiricalCdf) -> Option<EmpiricalCdf> {
        self.cells[id.index()].replace(cdf)
    }

    pub fn remove(&mut self, id: CellId) -> Option<EmpiricalCdf> {
        self.cells[id.index()].take()
    }

    pub fn get(&self, id: CellId) -> Option<&EmpiricalCdf> {
        self.cells[id.index()].as_ref()
    }

    pub fn cell(&self, id: CellId) -> Result<&EmpiricalCdf> {
        self.get(id).ok_or(Error::MissingCell(id))
    }

    pub fn contains(&self, id: CellId) -> bool {
        self.cells[id.index()].is_some()
    }

    /// Fails with the first missing cell among `ids`.
    pub fn require(&self, ids: &[CellId]) -> Result<()> {
        match ids.iter().find(|id| !self.contains(**id)) {
            Some(id) => Err(Error::MissingCell(*id)),
            None => Ok(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, &EmpiricalCdf)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (CellId::from_index(i), c)))
    }

    /// Sample counts in cell-index order; zero for absent cells.
    pub fn counts(&self) -> [usize; 8] {
        let mut out = [0; 8];
        for (id, cdf) in self.iter() {
            out[id.index()] = cdf.len();
        }
        out
    }

    pub fn total_count(&self) -> usize {
        self.counts().iter().sum()
    }

    /// Applies `f` to every present cell's values and rebuilds the table.
    pub fn map_values<F>(&self, mut f: F) -> Result<CellTable>
    where
        F: FnMut(CellId, &[f64]) -> Vec<f64>,
    {
        let mut out = CellTable::new();
        for (id, cdf) in self.iter() {
            out.insert(id, EmpiricalCdf::new(f(id, cdf.values()))?);
        }
        Ok(out)
    }
}
