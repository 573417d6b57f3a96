use std::collections::BTreeMap;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use triplex::identification::joint_counterfactual_cdf;
use triplex::inference::{bootstrap_ci, plugin_variance, MIN_REPLICATES};
use triplex::simlab::{relative_bias_experiment_with, DesignName, DgmSpec, SimReport};
use triplex::transport::{triple_changes_pushforward, CloudTable, Method, PointCloud};
use triplex::{
    cells, estimate, partial_bounds_triple, triple_changes_counterfactual_cdf, CellId, CellTable, EstimatorKind,
    Family, MleSpec,
};

use crate::clouds::{format_cloud, read_cloud_dir};
use crate::data::DataFile;
use crate::error::{CliError, CliResult};
use crate::grid::Grid;
use crate::output::{csv_rows, json, Format, SCHEMA_VERSION};

const ALL_CELLS: [CellId; 8] = [
    cells::S0D0T0,
    cells::S0D0T1,
    cells::S0D1T0,
    cells::S0D1T1,
    cells::S1D0T0,
    cells::S1D0T1,
    cells::S1D1T0,
    cells::S1D1T1,
];

/// The seven cells the counterfactual needs (everything but the treated
/// post-period cell).
const CHAIN_CELLS: [CellId; 7] = [
    cells::S0D0T0,
    cells::S0D0T1,
    cells::S0D1T0,
    cells::S0D1T1,
    cells::S1D0T0,
    cells::S1D0T1,
    cells::S1D1T0,
];

fn per_cell(table: &CellTable) -> BTreeMap<String, usize> {
    ALL_CELLS
        .iter()
        .map(|id| (id.to_string(), table.counts()[id.index()]))
        .collect()
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::input(format!("--level must be in (0, 1), got {level}")))
    }
}

fn check_slack(eps: f64, delta: f64) -> CliResult<()> {
    if eps >= 0.0 && delta >= 0.0 && eps.is_finite() && delta.is_finite() {
        Ok(())
    } else {
        Err(CliError::input(format!(
            "--eps and --delta must be nonnegative, got {eps} and {delta}"
        )))
    }
}

// ---------------------------------------------------------------------------

pub struct EstimateConfig {
    pub estimator: EstimatorKind,
    pub bootstrap: usize,
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub estimator: String,
    pub tau_hat: f64,
    /// Plug-in standard error; empirical triple changes only.
    pub se: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    #[serde(rename = "B")]
    pub b: usize,
    pub level: f64,
    pub n_per_cell: BTreeMap<String, usize>,
    pub seed: u64,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
struct EstimateCsvRow<'a> {
    estimator: &'a str,
    tau_hat: f64,
    se: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    #[serde(rename = "B")]
    b: usize,
    level: f64,
    seed: u64,
}

pub fn estimate_report(data: &DataFile, config: &EstimateConfig) -> CliResult<EstimateReport> {
    check_level(config.level)?;
    if config.bootstrap != 0 && config.bootstrap < MIN_REPLICATES {
        return Err(CliError::input(format!(
            "--bootstrap needs 0 (off) or at least {MIN_REPLICATES} replicates, got {}",
            config.bootstrap
        )));
    }
    let table = data.require(&ALL_CELLS)?;
    let point = estimate(&table, config.estimator)?;
    let mut notes = Vec::new();

    let se = match config.estimator {
        EstimatorKind::CccEmp => match plugin_variance(&table) {
            Ok(v) => Some(v.se),
            Err(e) => {
                notes.push(format!("plug-in standard error unavailable: {e}"));
                None
            }
        },
        _ => None,
    };
    let (ci_lo, ci_hi) = if config.bootstrap > 0 {
        let boot = bootstrap_ci(&table, config.estimator, config.bootstrap, config.level, config.seed)?;
        if boot.failed > 0 {
            notes.push(format!(
                "{} of {} bootstrap replicates failed and were dropped",
                boot.failed, boot.replicates
            ));
        }
        (Some(boot.lo), Some(boot.hi))
    } else {
        (None, None)
    };
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        estimator: config.estimator.to_string(),
        tau_hat: point.tau_hat,
        se,
        ci_lo,
        ci_hi,
        b: config.bootstrap,
        level: config.level,
        n_per_cell: per_cell(&table),
        seed: config.seed,
        notes,
    })
}

pub fn render_estimate(r: &EstimateReport, format: Format) -> String {
    match format {
        Format::Json => json(r),
        Format::Csv => csv_rows(&[EstimateCsvRow {
            estimator: &r.estimator,
            tau_hat: r.tau_hat,
            se: r.se,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            b: r.b,
            level: r.level,
            seed: r.seed,
        }]),
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct BoundsRow {
    pub y: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub schema_version: u32,
    pub eps: f64,
    pub delta: f64,
    pub rows: Vec<BoundsRow>,
}

pub fn bounds_report(data: &DataFile, eps: f64, delta: f64, grid: &Grid) -> CliResult<BoundsReport> {
    check_slack(eps, delta)?;
    let table = data.require(&CHAIN_CELLS)?;
    let rows = grid
        .points()
        .into_iter()
        .map(|y| {
            let b = partial_bounds_triple(&table, y, eps, delta)?;
            Ok(BoundsRow {
                y,
                lower: b.lower,
                upper: b.upper,
            })
        })
        .collect::<CliResult<_>>()?;
    Ok(BoundsReport {
        schema_version: SCHEMA_VERSION,
        eps,
        delta,
        rows,
    })
}

pub fn render_bounds(r: &BoundsReport, format: Format) -> String {
    match format {
        Format::Json => json(r),
        Format::Csv => csv_rows(&r.rows),
    }
}

// ---------------------------------------------------------------------------

/// Which counterfactual marginal feeds the joint CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Marginal {
    /// The point-identified counterfactual CDF.
    Point,
    /// Lower bound under `--eps`/`--delta`.
    Lower,
    /// Upper bound under `--eps`/`--delta`.
    Upper,
}

#[derive(Debug, Serialize)]
pub struct JointRow {
    pub y0: f64,
    pub y1: f64,
    pub cdf: f64,
}

#[derive(Debug, Serialize)]
pub struct JointReport {
    pub schema_version: u32,
    pub marginal: Marginal,
    pub eps: f64,
    pub delta: f64,
    pub n_pairs: usize,
    pub rows: Vec<JointRow>,
}

pub struct JointConfig {
    pub grid0: Grid,
    pub grid1: Grid,
    pub marginal: Marginal,
    pub eps: f64,
    pub delta: f64,
}

pub fn joint_report(data: &DataFile, config: &JointConfig) -> CliResult<JointReport> {
    check_slack(config.eps, config.delta)?;
    let panel = data.treated_panel()?;
    let table = data.require(&CHAIN_CELLS)?;
    let marginal_t0 = panel.marginal_t0();
    let cf = |y: f64| match config.marginal {
        Marginal::Point => triple_changes_counterfactual_cdf(&table, y),
        Marginal::Lower => partial_bounds_triple(&table, y, config.eps, config.delta).map(|b| b.lower),
        Marginal::Upper => partial_bounds_triple(&table, y, config.eps, config.delta).map(|b| b.upper),
    };
    let mut rows = Vec::new();
    for y0 in config.grid0.points() {
        for y1 in config.grid1.points() {
            let cdf = joint_counterfactual_cdf(&panel, cf, &marginal_t0, y0, y1)?;
            rows.push(JointRow { y0, y1, cdf });
        }
    }
    Ok(JointReport {
        schema_version: SCHEMA_VERSION,
        marginal: config.marginal,
        eps: config.eps,
        delta: config.delta,
        n_pairs: panel.len(),
        rows,
    })
}

pub fn render_joint(r: &JointReport, format: Format) -> String {
    match format {
        Format::Json => json(r),
        Format::Csv => csv_rows(&r.rows),
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct VarianceTerm {
    pub term: usize,
    pub cell: String,
    pub value: f64,
    pub p_weight: f64,
}

#[derive(Debug, Serialize)]
pub struct VarianceOutput {
    pub schema_version: u32,
    pub tau_hat: f64,
    pub total: f64,
    pub se: f64,
    pub n_total: usize,
    pub terms: Vec<VarianceTerm>,
}

pub fn variance_report(data: &DataFile) -> CliResult<VarianceOutput> {
    let table = data.require(&ALL_CELLS)?;
    let tau_hat = estimate(&table, EstimatorKind::CccEmp)?.tau_hat;
    let v = plugin_variance(&table)?;
    let terms = (0..8)
        .map(|k| VarianceTerm {
            term: k,
            cell: v.cells[k].to_string(),
            value: v.terms[k],
            p_weight: v.p_weights[k],
        })
        .collect();
    Ok(VarianceOutput {
        schema_version: SCHEMA_VERSION,
        tau_hat,
        total: v.total,
        se: v.se,
        n_total: v.n_total,
        terms,
    })
}

pub fn render_variance(r: &VarianceOutput, format: Format) -> String {
    match format {
        Format::Json => json(r),
        Format::Csv => csv_rows(&r.terms),
    }
}

// ---------------------------------------------------------------------------

/// Model family for the MLE estimators in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimFamily {
    /// Correctly specified families where the design has them, Gaussian
    /// otherwise.
    Native,
    Fixed(Family),
}

impl std::str::FromStr for SimFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "native" => Ok(SimFamily::Native),
            other => other
                .parse()
                .map(SimFamily::Fixed)
                .map_err(|e: triplex::Error| e.to_string()),
        }
    }
}

fn parse_list<T>(text: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).ok_or_else(|| CliError::input(format!("unknown {what} `{s}`"))))
        .collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::input(format!("no {what} given")));
    }
    Ok(items)
}

pub struct SimulateConfig<'a> {
    pub specs: &'a str,
    pub estimators: &'a str,
    pub family: SimFamily,
    pub n_grid: &'a str,
    pub reps: usize,
    pub seed: u64,
}

fn resolve_mle(kind: EstimatorKind, spec: &DgmSpec, family: SimFamily) -> EstimatorKind {
    let families = match family {
        SimFamily::Fixed(f) => MleSpec::uniform(f),
        SimFamily::Native => spec.correct_families().unwrap_or(MleSpec::uniform(Family::Gaussian)),
    };
    match kind {
        EstimatorKind::CicMle(_) => EstimatorKind::CicMle(families),
        EstimatorKind::CccMle(_) => EstimatorKind::CccMle(families),
        other => other,
    }
}

pub fn simulate_report(config: &SimulateConfig) -> CliResult<SimReport> {
    let specs: Vec<DgmSpec> = parse_list(config.specs, "design", |s| s.parse::<DesignName>().ok())?
        .into_iter()
        .map(DgmSpec::by_name)
        .collect();
    let kinds = parse_list(config.estimators, "estimator", |s| EstimatorKind::parse(s, None).ok())?;
    let n_grid = parse_list(config.n_grid, "sample size", |s| {
        s.parse::<usize>().ok().filter(|n| *n >= 2)
    })?;
    if config.reps == 0 {
        return Err(CliError::input("--reps must be positive"));
    }
    let labels: Vec<String> = kinds
        .iter()
        .map(|k| match (k.families(), config.family) {
            (None, _) => k.tag().to_string(),
            (Some(_), SimFamily::Native) => format!("{}[native]", k.tag()),
            (Some(_), SimFamily::Fixed(f)) => format!("{}[{f}]", k.tag()),
        })
        .collect();
    let report =
        relative_bias_experiment_with(&specs, &labels, &n_grid, config.reps, config.seed, |spec, e, table| {
            Ok(estimate(table, resolve_mle(kinds[e], spec, config.family))?.tau_hat)
        })?;
    Ok(report)
}

#[derive(Serialize)]
struct SimulateJson<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a SimReport,
}

pub fn render_simulate(r: &SimReport, format: Format) -> String {
    match format {
        Format::Json => json(&SimulateJson {
            schema_version: SCHEMA_VERSION,
            report: r,
        }),
        Format::Csv => r.to_csv_string(),
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OtMethod {
    Exact,
    Sinkhorn,
}

#[derive(Serialize)]
struct OtJson<'a> {
    schema_version: u32,
    method: &'a str,
    dim: usize,
    points: Vec<&'a [f64]>,
}

/// Clouds from a directory of files, or one-dimensional clouds from the
/// cells of a data file.
pub enum CloudSource<'a> {
    Dir(&'a Path),
    Data(&'a DataFile),
}

pub fn ot_cloud(source: CloudSource, method: OtMethod, reg: Option<f64>) -> CliResult<PointCloud> {
    if let Some(r) = reg {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::input(format!("--reg must be positive, got {r}")));
        }
    }
    let clouds = match source {
        CloudSource::Dir(dir) => read_cloud_dir(dir, &CHAIN_CELLS)?,
        CloudSource::Data(data) => {
            let table = data.require(&CHAIN_CELLS)?;
            let mut clouds = CloudTable::new();
            for id in CHAIN_CELLS {
                clouds.insert(id, PointCloud::from_values(table.cell(id)?.values())?);
            }
            clouds
        }
    };
    let method = match method {
        OtMethod::Exact => Method::Exact,
        OtMethod::Sinkhorn => Method::Sinkhorn { reg },
    };
    triple_changes_pushforward(&clouds, method).map_err(|e| match e {
        // Unequal sizes under exact assignment are a property of the input.
        triplex::Error::Map { map, source } if matches!(*source, triplex::Error::SizeMismatch { .. }) => {
            CliError::input(format!(
                "map {map}: {source}; use --method sinkhorn for unequal cloud sizes"
            ))
        }
        triplex::Error::DimensionMismatch { .. } => CliError::input(e.to_string()),
        other => CliError::Compute(other),
    })
}

pub fn render_cloud(cloud: &PointCloud, method: OtMethod, format: Format) -> String {
    match format {
        Format::Csv => format_cloud(cloud),
        Format::Json => json(&OtJson {
            schema_version: SCHEMA_VERSION,
            method: match method {
                OtMethod::Exact => "exact",
                OtMethod::Sinkhorn => "sinkhorn",
            },
            dim: cloud.dim(),
            points: cloud.points().collect(),
        }),
    }
}
