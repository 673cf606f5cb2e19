//! CSV input and output.
//!
//! Output files start with `# key: value` metadata lines, then a header row;
//! fields are separated by `,` and numbers use `.` as decimal separator.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::report::Metadata;
use crate::CliError;

/// Reads a two-column numeric CSV with the given header names. Lines starting
/// with `#` are skipped.
pub fn read_columns(path: &Path, names: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() != 2 || headers[0] != *names[0] || headers[1] != *names[1] {
        return Err(bad(format!(
            "expected header `{},{}`, found `{}`",
            names[0],
            names[1],
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(bad(format!(
                "line {line}: expected 2 fields, found {}",
                rec.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("line {line}: `{s}` is not a finite number")))
        };
        a.push(parse(&rec[0])?);
        b.push(parse(&rec[1])?);
    }
    if a.len() < 2 {
        return Err(bad("need at least two data rows".into()));
    }
    Ok((a, b))
}

/// Writes a CSV with a metadata preamble. `rows` yields one record per line.
pub fn write_table<I, R>(
    path: &Path,
    meta: &Metadata,
    header: &[String],
    rows: I,
) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for (key, value) in meta.comment_lines() {
        writeln!(out, "# {key}: {value}").map_err(io_err)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        let fields: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}
