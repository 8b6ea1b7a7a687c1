//! CSV and manifest helpers.

use std::fs;
use std::path::Path;

use crate::error::Result;

/// Full-precision float formatting used in every data file.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Build a CSV string from a header and numeric rows.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| fmt(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Write through a temporary sibling and rename so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parse a CSV produced by [`csv_table`] back into the header and rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| crate::Error::Io("empty csv".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| crate::Error::Io(format!("csv line {}: {e}", k + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}
