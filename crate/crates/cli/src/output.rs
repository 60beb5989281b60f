//! Atomic file output, fixed-precision CSV and parameter tables.

use std::fs;
use std::path::Path;

use serde::Serialize;

use kerr_gates::circuit::{BlockParams, CircuitSpec, ParamRole, PARAMS_PER_BLOCK};
use kerr_gates::ComplexMatrix;

use crate::CliError;

/// 17 significant digits, enough to round-trip every `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Renders rows of string cells as comma-separated text with `\n` endings.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv: {e}"))
}

pub fn params_header() -> Vec<&'static str> {
    std::iter::once("block").chain(ParamRole::NAMES).collect()
}

/// Block-major table of hopping rates, one row per block.
pub fn params_csv(spec: &CircuitSpec) -> Result<Vec<u8>, CliError> {
    let rows = spec
        .blocks
        .iter()
        .enumerate()
        .map(|(b, p)| std::iter::once(b.to_string()).chain(p.to_array().map(num)).collect::<Vec<_>>());
    csv_text(&params_header(), rows)
}

pub fn parse_params_csv(text: &str) -> Result<Vec<BlockParams>, CliError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != params_header() {
        return Err(CliError::Usage(format!(
            "parameter table header must be `{}`, found `{}`",
            params_header().join(","),
            header.join(",")
        )));
    }
    let mut blocks = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let index: usize =
            rec[0].parse().map_err(|_| CliError::Usage(format!("row {}: bad block index `{}`", line + 1, &rec[0])))?;
        if index != blocks.len() {
            return Err(CliError::Usage(format!("row {}: expected block {}, found {index}", line + 1, blocks.len())));
        }
        let v = (1..=PARAMS_PER_BLOCK)
            .map(|k| rec[k].parse::<f64>().map_err(|_| CliError::Usage(format!("row {}: bad number `{}`", line + 1, &rec[k]))))
            .collect::<Result<Vec<_>, _>>()?;
        blocks.push(BlockParams::from_slice(&v));
    }
    Ok(blocks)
}

/// A square matrix as a labeled CSV: header `state,<labels...>`, one row per output state.
pub fn matrix_csv(m: &ComplexMatrix, labels: &[String], part: fn(&kerr_gates::Complex64) -> f64) -> Result<Vec<u8>, CliError> {
    let header: Vec<&str> = std::iter::once("state").chain(labels.iter().map(String::as_str)).collect();
    let rows = (0..m.nrows())
        .map(|r| std::iter::once(labels[r].clone()).chain((0..m.ncols()).map(|c| num(part(&m[(r, c)])))).collect::<Vec<_>>());
    csv_text(&header, rows)
}
