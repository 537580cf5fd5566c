//! CSV reading and writing.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use credo_core::frame::{Column, ColumnKind, Frame};

use crate::error::{CliError, Result};

pub const MISSING_TOKENS: [&str; 3] = ["", "NA", "null"];

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell)
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn load_csv(path: &Path, hints: &BTreeMap<String, ColumnKind>) -> Result<Frame> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, hints).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Reads a headered CSV. A column is numeric iff every non-missing cell
/// parses as a finite number, unless `hints` says otherwise.
pub fn read_csv<R: Read>(reader: R, hints: &BTreeMap<String, ColumnKind>) -> Result<Frame> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Data("empty file".into()));
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => CliError::Data(format!(
                "row {}: expected {expected_len} cells, found {len}",
                i + 1
            )),
            _ => CliError::Data(format!("row {}: {e}", i + 1)),
        })?;
        for (col, cell) in cells.iter_mut().zip(rec.iter()) {
            col.push(cell.to_string());
        }
    }

    let mut columns = Vec::with_capacity(header.len());
    for (name, raw) in header.iter().zip(cells) {
        let numeric_ok = raw.iter().all(|c| is_missing(c) || parse_finite(c).is_some());
        let kind = match hints.get(name) {
            Some(ColumnKind::Numeric) if !numeric_ok => {
                return Err(CliError::Data(format!("column '{name}' is hinted numeric but has non-numeric cells")));
            }
            Some(&k) => k,
            None if numeric_ok => ColumnKind::Numeric,
            None => ColumnKind::Categorical,
        };
        let col = match kind {
            ColumnKind::Numeric => Column::numeric(raw.iter().map(|c| if is_missing(c) { None } else { parse_finite(c) }).collect())?,
            ColumnKind::Categorical => {
                Column::categorical(raw.into_iter().map(|c| if is_missing(&c) { None } else { Some(c) }).collect())
            }
        };
        columns.push(col);
    }
    Ok(Frame::new(header, columns)?)
}

/// Writes every column as text; missing cells become empty. Numbers use the
/// shortest representation that parses back to the same double.
pub fn write_csv<W: Write>(f: &Frame, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| CliError::Data(format!("csv write failed: {e}"));
    w.write_record(f.names()).map_err(err)?;
    let mut record = Vec::with_capacity(f.n_cols());
    for i in 0..f.n_rows() {
        record.clear();
        record.extend(f.columns().iter().map(|c| c.cell_text(i).unwrap_or_default()));
        w.write_record(&record).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("csv write failed: {e}")))?;
    Ok(())
}

pub fn save_csv(f: &Frame, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(f, std::io::BufWriter::new(file))
}
