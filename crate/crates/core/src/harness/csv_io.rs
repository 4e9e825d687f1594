//! CSV ingestion and emission.
//!
//! Data files hold one record per row. Internally a dataset is `M × N` with
//! one record per column, so loading transposes: a file with `N` rows and
//! `M` columns becomes an `M × N` matrix. Dense matrices (covariances,
//! direction bases) are read and written as-is, without transposing.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{MvgError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    /// `M × N`, one record per column.
    pub matrix: DMatrix<f64>,
    pub names: Option<Vec<String>>,
}

type Grid = (Option<Vec<String>>, Vec<Vec<f64>>);

fn parse_grid(text: &str, has_header: bool) -> Result<Grid> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MvgError::Format(format!("line {}: {e}", idx + 1)))?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(idx as u64 + 1);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(MvgError::Format(format!(
                    "line {line}: expected {w} fields, found {}",
                    record.len()
                )))
            }
            _ => {}
        }
        if has_header && names.is_none() {
            names = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        MvgError::Format(format!(
                            "line {line}, column {}: cannot parse {cell:?} as a number",
                            col + 1
                        ))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MvgError::Format("no numeric rows found".into()));
    }
    Ok((names, rows))
}

/// Reads a records-as-rows CSV into an `M × N` matrix (features × records).
pub fn load_csv_matrix(path: &Path, has_header: bool) -> Result<LoadedCsv> {
    let text = fs::read_to_string(path)?;
    parse_records(&text, has_header)
}

pub fn parse_records(text: &str, has_header: bool) -> Result<LoadedCsv> {
    let (names, rows) = parse_grid(text, has_header)?;
    let (n, m) = (rows.len(), rows[0].len());
    let matrix = DMatrix::from_fn(m, n, |i, j| rows[j][i]);
    Ok(LoadedCsv { matrix, names })
}

/// Reads a dense matrix, one matrix row per CSV line, no header.
pub fn load_dense_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let (_, rows) = parse_grid(&text, false)?;
    let (m, n) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

/// Writes `matrix` one row per line, with an optional header.
pub fn write_matrix<W: Write>(
    out: W,
    matrix: &DMatrix<f64>,
    header: Option<&[String]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| MvgError::Io(std::io::Error::other(e));
    if let Some(h) = header {
        w.write_record(h).map_err(io)?;
    }
    for row in matrix.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
