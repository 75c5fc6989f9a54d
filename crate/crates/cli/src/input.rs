//! CSV ingestion. Every file needs a header row; all columns are numeric
//! except an optional group column holding exactly two labels.

use std::fs::File;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub type Points = Vec<Vec<f64>>;

/// Two samples read from disk, with their column names and group labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub columns: Vec<String>,
    pub labels: [String; 2],
    pub group1: Points,
    pub group2: Points,
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CliError::Csv {
        path: path.to_path_buf(),
        line,
        reason: e.to_string(),
    }
}

fn headers(path: &Path, rdr: &mut csv::Reader<File>) -> CliResult<Vec<String>> {
    let h = rdr.headers().map_err(|e| csv_error(path, e))?;
    if h.is_empty() || h.iter().all(str::is_empty) {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line: 1,
            reason: "missing header row".into(),
        });
    }
    Ok(h.iter().map(str::to_string).collect())
}

fn parse_field(path: &Path, line: u64, column: &str, text: &str) -> CliResult<f64> {
    let v: f64 = text.parse().map_err(|_| CliError::Csv {
        path: path.to_path_buf(),
        line,
        reason: format!("column {column:?}: {text:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line,
            reason: format!("column {column:?}: non-finite value {text:?}"),
        });
    }
    Ok(v)
}

/// All rows of a numeric CSV file.
pub fn read_points(path: &Path) -> CliResult<(Vec<String>, Points)> {
    let mut rdr = reader(path)?;
    let columns = headers(path, &mut rdr)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record
            .iter()
            .zip(&columns)
            .map(|(text, col)| parse_field(path, line, col, text))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

/// Two files with the same numeric columns.
pub fn read_pair(path_a: &Path, path_b: &Path) -> CliResult<Samples> {
    let (cols_a, group1) = read_points(path_a)?;
    let (cols_b, group2) = read_points(path_b)?;
    if cols_a.len() != cols_b.len() {
        return Err(CliError::Data(format!(
            "dimension mismatch: {} has {} columns, {} has {}",
            path_a.display(),
            cols_a.len(),
            path_b.display(),
            cols_b.len()
        )));
    }
    Ok(Samples {
        columns: cols_a,
        labels: [path_a.display().to_string(), path_b.display().to_string()],
        group1,
        group2,
    })
}

/// One file whose `group_col` splits the rows in two, by order of first
/// appearance of each label.
pub fn read_grouped(path: &Path, group_col: &str) -> CliResult<Samples> {
    let mut rdr = reader(path)?;
    let columns = headers(path, &mut rdr)?;
    let gi = columns
        .iter()
        .position(|c| c == group_col)
        .ok_or_else(|| CliError::Data(format!("{}: no column named {group_col:?}", path.display())))?;
    let numeric: Vec<String> = columns
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != gi)
        .map(|(_, c)| c.clone())
        .collect();
    if numeric.is_empty() {
        return Err(CliError::Data(format!("{}: no numeric columns", path.display())));
    }

    let mut labels: Vec<String> = Vec::new();
    let mut groups: [Points; 2] = [Vec::new(), Vec::new()];
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label = record.get(gi).unwrap_or_default().to_string();
        let slot = match labels.iter().position(|l| *l == label) {
            Some(s) => s,
            None if labels.len() < 2 => {
                labels.push(label);
                labels.len() - 1
            }
            None => {
                return Err(CliError::Csv {
                    path: path.to_path_buf(),
                    line,
                    reason: format!(
                        "group column {group_col:?} has a third value {label:?} (already saw {:?} and {:?})",
                        labels[0], labels[1]
                    ),
                })
            }
        };
        let row = record
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != gi)
            .zip(&numeric)
            .map(|((_, text), col)| parse_field(path, line, col, text))
            .collect::<CliResult<Vec<f64>>>()?;
        groups[slot].push(row);
    }
    if labels.len() != 2 {
        return Err(CliError::Data(format!(
            "{}: group column {group_col:?} must take exactly two values, found {}",
            path.display(),
            labels.len()
        )));
    }
    let [group1, group2] = groups;
    Ok(Samples {
        columns: numeric,
        labels: [labels[0].clone(), labels[1].clone()],
        group1,
        group2,
    })
}

/// Write points under a header of column names.
pub fn write_points(path: &Path, columns: &[String], points: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    w.write_record(columns).map_err(io)?;
    for p in points {
        w.write_record(p.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
