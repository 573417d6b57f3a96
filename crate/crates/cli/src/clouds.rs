//! Point-cloud files: one point per line, coordinates separated by commas or
//! whitespace. Blank lines and `#` comments are skipped.

use std::fmt::Write as _;
use std::path::Path;

use triplex::transport::{CloudTable, PointCloud};
use triplex::CellId;

use crate::error::{CliError, CliResult};

pub fn parse_cloud(text: &str) -> Result<PointCloud, String> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut width = 0;
        for field in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
        {
            let v: f64 = field
                .parse()
                .map_err(|_| format!("line {}: `{field}` is not a number", i + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: `{field}` is not finite", i + 1));
            }
            coords.push(v);
            width += 1;
        }
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(format!("line {}: expected {d} coordinates, found {width}", i + 1));
            }
            Some(_) => {}
        }
    }
    let dim = dim.ok_or_else(|| "no points".to_string())?;
    PointCloud::new(dim, coords).map_err(|e| e.to_string())
}

/// Reads `<dir>/<cell>.csv` (or `.txt`) for every cell in `ids`.
pub fn read_cloud_dir(dir: &Path, ids: &[CellId]) -> CliResult<CloudTable> {
    let mut table = CloudTable::new();
    let mut dim: Option<(usize, CellId)> = None;
    for &id in ids {
        let path = ["csv", "txt"]
            .iter()
            .map(|ext| dir.join(format!("{id}.{ext}")))
            .find(|p| p.exists())
            .ok_or_else(|| CliError::input(format!("no cloud file for cell {id} in {}", dir.display())))?;
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let cloud = parse_cloud(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        match dim {
            None => dim = Some((cloud.dim(), id)),
            Some((d, first)) if d != cloud.dim() => {
                return Err(CliError::input(format!(
                    "dimension mismatch: cloud {first} has {d} coordinates per point, cloud {id} has {}",
                    cloud.dim()
                )));
            }
            Some(_) => {}
        }
        table.insert(id, cloud);
    }
    Ok(table)
}

/// One point per line, comma separated, shortest round-trip formatting.
pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        let line: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}
