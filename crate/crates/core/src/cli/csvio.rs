//! CSV artifacts and their readers. Numbers are written in Rust's shortest
//! round-trip form, infinite parameters as `inf`.

use std::path::Path;

use crate::portfolio::StrategyVector;
use crate::reinsurance::{FamilyChoice, RetainedLoss};
use crate::simulator::SurvivalEstimate;
use crate::solver::{ConvergenceReport, RefineLevel, SolutionTable, StrategyTable};

use super::CliError;

/// Parameter column names for a family assignment, e.g. `b1,M2,M3,L3`.
pub fn param_header(families: &[FamilyChoice]) -> Vec<String> {
    families
        .iter()
        .enumerate()
        .flat_map(|(k, f)| f.param_names(k))
        .collect()
}

fn strategy_params(s: &StrategyVector, families: &[FamilyChoice]) -> Vec<f64> {
    s.iter().zip(families).flat_map(|(r, f)| r.params(*f)).collect()
}

fn strategy_from_params(families: &[FamilyChoice], params: &[f64]) -> Result<StrategyVector, String> {
    let mut rest = params;
    let mut out = Vec::with_capacity(families.len());
    for f in families {
        let k = f.param_names(0).len();
        let (head, tail) = rest.split_at(k);
        out.push(RetainedLoss::from_params(*f, head).map_err(|e| e.to_string())?);
        rest = tail;
    }
    Ok(StrategyVector(out))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_rows(
    path: &Path,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = writer(path)?;
    w.write_record(&header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Header plus numeric rows; empty cells read as `None`.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let bad = |msg: String| CliError::Format(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>().map(Some).map_err(|_| {
                        bad(format!(
                            "row {}, column {}: not a number: {cell:?}",
                            k + 2,
                            header[c]
                        ))
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn expect_header(path: &Path, found: &[String], expected: &[String]) -> Result<(), CliError> {
    if found != expected {
        return Err(CliError::Format(format!(
            "{}: header {:?} does not match expected {:?}",
            path.display(),
            found.join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

fn required(path: &Path, row: usize, v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Format(format!("{}: row {}: empty cell", path.display(), row + 2)))
}

fn solution_header(families: &[FamilyChoice]) -> Vec<String> {
    let mut h: Vec<String> = ["x", "f", "slope", "delta"].map(String::from).to_vec();
    h.extend(param_header(families));
    h
}

/// `x,f,slope,delta,<params>` per grid point.
pub fn write_solution(path: &Path, table: &SolutionTable) -> Result<(), CliError> {
    let rows = (0..table.grid.len()).map(|i| {
        let mut row = vec![
            fmt(table.grid[i]),
            fmt(table.f[i]),
            fmt(table.slope[i]),
            fmt(table.delta[i]),
        ];
        row.extend(
            strategy_params(&table.strategy[i], &table.families)
                .into_iter()
                .map(fmt),
        );
        row
    });
    write_rows(path, solution_header(&table.families), rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCsv {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub slope: Vec<f64>,
    pub delta: Vec<f64>,
    pub strategy: Vec<StrategyVector>,
}

pub fn read_solution(path: &Path, families: &[FamilyChoice]) -> Result<SolutionCsv, CliError> {
    let t = read_table(path)?;
    expect_header(path, &t.header, &solution_header(families))?;
    let mut out = SolutionCsv {
        x: vec![],
        f: vec![],
        slope: vec![],
        delta: vec![],
        strategy: vec![],
    };
    for (k, row) in t.rows.iter().enumerate() {
        let v = row
            .iter()
            .map(|c| required(path, k, *c))
            .collect::<Result<Vec<_>, _>>()?;
        out.x.push(v[0]);
        out.f.push(v[1]);
        out.slope.push(v[2]);
        out.delta.push(v[3]);
        out.strategy.push(
            strategy_from_params(families, &v[4..])
                .map_err(|e| CliError::Format(format!("{}: row {}: {e}", path.display(), k + 2)))?,
        );
    }
    Ok(out)
}

fn strategy_header(families: &[FamilyChoice]) -> Vec<String> {
    let mut h = vec!["x_start".to_string()];
    h.extend(param_header(families));
    h
}

/// `x_start,<params>` per strategy cell.
pub fn write_strategy(path: &Path, table: &StrategyTable, families: &[FamilyChoice]) -> Result<(), CliError> {
    let rows = table.breakpoints.iter().zip(&table.vectors).map(|(x, s)| {
        let mut row = vec![fmt(*x)];
        row.extend(strategy_params(s, families).into_iter().map(fmt));
        row
    });
    write_rows(path, strategy_header(families), rows)
}

pub fn read_strategy(path: &Path, families: &[FamilyChoice]) -> Result<StrategyTable, CliError> {
    let t = read_table(path)?;
    expect_header(path, &t.header, &strategy_header(families))?;
    let mut breakpoints = Vec::with_capacity(t.rows.len());
    let mut vectors = Vec::with_capacity(t.rows.len());
    for (k, row) in t.rows.iter().enumerate() {
        let v = row
            .iter()
            .map(|c| required(path, k, *c))
            .collect::<Result<Vec<_>, _>>()?;
        breakpoints.push(v[0]);
        vectors.push(
            strategy_from_params(families, &v[1..])
                .map_err(|e| CliError::Format(format!("{}: row {}: {e}", path.display(), k + 2)))?,
        );
    }
    StrategyTable::new(breakpoints, vectors).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

const SIMULATION_HEADER: [&str; 6] = [
    "x0",
    "estimate",
    "half_width",
    "censored_fraction",
    "n_paths",
    "seed",
];

pub fn write_simulation(path: &Path, estimates: &[SurvivalEstimate]) -> Result<(), CliError> {
    let rows = estimates.iter().map(|e| {
        vec![
            fmt(e.x0),
            fmt(e.estimate),
            fmt(e.half_width),
            fmt(e.censored_fraction),
            e.n_paths.to_string(),
            e.seed.to_string(),
        ]
    });
    write_rows(path, SIMULATION_HEADER.map(String::from).to_vec(), rows)
}

pub fn read_simulation(path: &Path) -> Result<Vec<SurvivalEstimate>, CliError> {
    let bad = |msg: String| CliError::Format(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    expect_header(path, &header, &SIMULATION_HEADER.map(String::from))?;
    let mut out = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let cell = |c: usize| {
            record
                .get(c)
                .ok_or_else(|| bad(format!("row {}: missing column {}", k + 2, header[c])))
        };
        let num = |c: usize| {
            cell(c)?
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: bad {}", k + 2, header[c])))
        };
        let int = |c: usize| {
            cell(c)?
                .parse::<u64>()
                .map_err(|_| bad(format!("row {}: bad {}", k + 2, header[c])))
        };
        out.push(SurvivalEstimate {
            x0: num(0)?,
            estimate: num(1)?,
            half_width: num(2)?,
            censored_fraction: num(3)?,
            n_paths: int(4)? as usize,
            seed: int(5)?,
        });
    }
    Ok(out)
}

const CONVERGENCE_HEADER: [&str; 3] = ["h", "sup_diff", "runtime_seconds"];

/// `h,sup_diff,runtime_seconds`; the first level has an empty `sup_diff`.
pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> Result<(), CliError> {
    let rows = report.levels.iter().map(|l| {
        vec![
            fmt(l.h),
            l.sup_diff.map(fmt).unwrap_or_default(),
            fmt(l.runtime_seconds),
        ]
    });
    write_rows(path, CONVERGENCE_HEADER.map(String::from).to_vec(), rows)
}

pub fn read_convergence(path: &Path) -> Result<Vec<RefineLevel>, CliError> {
    let t = read_table(path)?;
    expect_header(path, &t.header, &CONVERGENCE_HEADER.map(String::from))?;
    t.rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            Ok(RefineLevel {
                h: required(path, k, row[0])?,
                sup_diff: row[1],
                runtime_seconds: required(path, k, row[2])?,
            })
        })
        .collect()
}

/// Survival curves of several scenarios on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareCsv {
    pub names: Vec<String>,
    pub x: Vec<f64>,
    /// One curve per name.
    pub delta: Vec<Vec<f64>>,
}

/// `x,delta_<name>,...`.
pub fn write_compare(path: &Path, data: &CompareCsv) -> Result<(), CliError> {
    let mut header = vec!["x".to_string()];
    header.extend(data.names.iter().map(|n| format!("delta_{n}")));
    let rows = data.x.iter().enumerate().map(|(i, x)| {
        let mut row = vec![fmt(*x)];
        row.extend(data.delta.iter().map(|d| fmt(d[i])));
        row
    });
    write_rows(path, header, rows)
}

pub fn read_compare(path: &Path) -> Result<CompareCsv, CliError> {
    let t = read_table(path)?;
    let bad = |msg: &str| CliError::Format(format!("{}: {msg}", path.display()));
    if t.header.first().map(String::as_str) != Some("x") {
        return Err(bad("first column must be x"));
    }
    let names = t.header[1..]
        .iter()
        .map(|h| {
            h.strip_prefix("delta_")
                .map(str::to_owned)
                .ok_or_else(|| bad("columns must be delta_<name>"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = CompareCsv {
        delta: vec![Vec::with_capacity(t.rows.len()); names.len()],
        names,
        x: Vec::with_capacity(t.rows.len()),
    };
    for (k, row) in t.rows.iter().enumerate() {
        out.x.push(required(path, k, row[0])?);
        for (c, v) in row[1..].iter().enumerate() {
            out.delta[c].push(required(path, k, *v)?);
        }
    }
    Ok(out)
}
