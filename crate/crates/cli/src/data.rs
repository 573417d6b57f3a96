//! `s,d,t,y[,id]` input files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use triplex::{cells, CellId, CellTable, PanelPairs};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub cell: CellId,
    pub y: f64,
    pub id: Option<String>,
}

/// Every row of a data file, validated. Parsing is all-or-nothing: the first
/// bad row aborts the load.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub rows: Vec<Row>,
}

fn parse_code(field: &str, line: u64, column: &str) -> CliResult<u8> {
    match field.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(CliError::input(format!(
            "row {line}, column {column}: expected 0 or 1, found `{other}`"
        ))),
    }
}

impl DataFile {
    pub fn open(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::from_reader(file).map_err(|e| match e {
            CliError::Input(msg) => CliError::input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::input(format!("unreadable header: {e}")))?
            .iter()
            .map(str::to_owned)
            .collect();
        let with_id = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["s", "d", "t", "y"] => false,
            ["s", "d", "t", "y", "id"] => true,
            _ => {
                return Err(CliError::input(format!(
                    "row 1: header must be `s,d,t,y` or `s,d,t,y,id`, found `{}`",
                    header.join(",")
                )))
            }
        };

        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                CliError::input(format!("row {line}: {e}"))
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let expected = if with_id { 5 } else { 4 };
            if record.len() != expected {
                return Err(CliError::input(format!(
                    "row {line}: expected {expected} fields, found {}",
                    record.len()
                )));
            }
            let s = parse_code(&record[0], line, "s")?;
            let d = parse_code(&record[1], line, "d")?;
            let t = parse_code(&record[2], line, "t")?;
            let y: f64 = record[3]
                .parse()
                .map_err(|_| CliError::input(format!("row {line}, column y: `{}` is not a number", &record[3])))?;
            if !y.is_finite() {
                return Err(CliError::input(format!(
                    "row {line}, column y: `{}` is not finite",
                    &record[3]
                )));
            }
            let id = if with_id && !record[4].is_empty() {
                Some(record[4].to_owned())
            } else {
                None
            };
            let cell = CellId::from_codes(s, d, t).expect("codes validated");
            rows.push(Row { cell, y, id });
        }
        Ok(DataFile { rows })
    }

    /// Cell table of every cell that has rows. Absent cells are left out, so
    /// operations can name exactly what they are missing.
    pub fn table(&self) -> CellTable {
        let mut values: [Vec<f64>; 8] = Default::default();
        for row in &self.rows {
            values[row.cell.index()].push(row.y);
        }
        let present = values
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(i, v)| (CellId::from_index(i), v));
        CellTable::from_values(present).expect("rows are finite and nonempty per cell")
    }

    /// Table with every listed cell present, or an input error naming the
    /// first missing one.
    pub fn require(&self, ids: &[CellId]) -> CliResult<CellTable> {
        let table = self.table();
        if let Some(id) = ids.iter().find(|id| !table.contains(**id)) {
            return Err(CliError::input(format!("cell {id} has no rows")));
        }
        Ok(table)
    }

    /// `(Y(t0), Y(t1))` pairs of the treated group, linked by id.
    pub fn treated_panel(&self) -> CliResult<PanelPairs> {
        let mut by_id: BTreeMap<&str, [Option<f64>; 2]> = BTreeMap::new();
        for row in &self.rows {
            let slot = if row.cell == cells::S1D1T0 {
                0
            } else if row.cell == cells::S1D1T1 {
                1
            } else {
                continue;
            };
            let Some(id) = row.id.as_deref() else { continue };
            let entry = by_id.entry(id).or_default();
            if entry[slot].is_some() {
                return Err(CliError::input(format!("id `{id}` appears twice in cell {}", row.cell)));
            }
            entry[slot] = Some(row.y);
        }
        let pairs: Vec<(f64, f64)> = by_id
            .values()
            .filter_map(|v| match v {
                [Some(a), Some(b)] => Some((*a, *b)),
                _ => None,
            })
            .collect();
        if pairs.is_empty() {
            return Err(CliError::input(
                "the joint estimand needs ids linking treated rows (s=1, d=1) at both periods; none found",
            ));
        }
        PanelPairs::new(pairs).map_err(CliError::from)
    }
}
