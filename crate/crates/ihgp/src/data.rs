//! CSV input and output.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Relative tolerance on the spacing of the time column.
pub const SPACING_TOLERANCE: f64 = 1e-6;

/// Equidistant series; missing observations are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub dt: f64,
}

impl Series {
    /// Series on `t_i = t0 + i dt`.
    pub fn regular(t0: f64, dt: f64, y: Vec<f64>) -> Self {
        let t = (0..y.len()).map(|i| t0 + i as f64 * dt).collect();
        Series { t, y, dt }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

fn parse_value(field: &str, row: usize, column: &str) -> CliResult<f64> {
    let s = field.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>()
        .map_err(|_| CliError::Data(format!("row {row}: cannot parse {column} value {s:?}")))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> CliResult<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
        CliError::Data(format!("{}: missing column `{name}`", path.display()))
    })
}

fn reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Check `t` is equidistant and return the spacing. Every step is compared
/// with the first one, so the first deviating row is the one named. Rows are
/// counted from 1 for the first data line.
pub fn check_spacing(t: &[f64]) -> CliResult<f64> {
    if let Some(i) = t.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Data(format!("row {}: time value is not finite", i + 1)));
    }
    if t.len() < 2 {
        return Ok(1.0);
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(CliError::Data("time column must be increasing".into()));
    }
    for i in 2..t.len() {
        let step = t[i] - t[i - 1];
        if (step - dt).abs() > SPACING_TOLERANCE * dt {
            return Err(CliError::Data(format!(
                "row {}: time step {step} deviates from the grid spacing {dt} beyond tolerance",
                i + 1
            )));
        }
    }
    // Mean spacing, less sensitive to rounding in the written times.
    Ok((t[t.len() - 1] - t[0]) / (t.len() - 1) as f64)
}

/// Read a `t,y` file. Extra columns are ignored; empty or `NaN` values of
/// `y` mark missing observations.
pub fn read_series(path: &Path) -> CliResult<Series> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let ti = column(&headers, "t", path)?;
    let yi = column(&headers, "y", path)?;
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        t.push(parse_value(rec.get(ti).unwrap_or(""), row, "t")?);
        y.push(parse_value(rec.get(yi).unwrap_or(""), row, "y")?);
    }
    if y.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let dt = check_spacing(&t)?;
    Ok(Series { t, y, dt })
}

/// Read event timestamps from the `t` column.
pub fn read_events(path: &Path) -> CliResult<Vec<f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let ti = column(&headers, "t", path)?;
    let mut t = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v = parse_value(rec.get(ti).unwrap_or(""), k + 1, "t")?;
        if !v.is_finite() {
            return Err(CliError::Data(format!("row {}: event time is not finite", k + 1)));
        }
        t.push(v);
    }
    if t.is_empty() {
        return Err(CliError::Data(format!("{}: no events", path.display())));
    }
    Ok(t)
}

/// Shortest round-trip decimal.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Row-oriented CSV writer that flushes after every row when asked, so the
/// file can be tailed while a long run progresses.
pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
    flush_rows: bool,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str], flush_rows: bool) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut inner = csv::Writer::from_writer(BufWriter::new(file));
        inner.write_record(header)?;
        Ok(CsvOut {
            path: path.to_path_buf(),
            inner,
            flush_rows,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        if self.flush_rows {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

impl Drop for CsvOut {
    fn drop(&mut self) {
        let _ = self.inner.flush();
    }
}

/// Write a `t,y` series.
pub fn write_series(path: &Path, series: &Series) -> CliResult<()> {
    let mut out = CsvOut::create(path, &["t", "y"], false)?;
    for (t, y) in series.t.iter().zip(&series.y) {
        out.row([fmt(*t), fmt(*y)])?;
    }
    out.flush()
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_check_names_row() {
        assert_eq!(check_spacing(&[0.0, 0.5, 1.0]).unwrap(), 0.5);
        let err = check_spacing(&[0.0, 0.5, 1.0, 1.6, 2.0]).unwrap_err().to_string();
        assert!(err.contains("row 4"), "{err}");
        assert!(check_spacing(&[0.0, 1.0, 2.0 + 1e-9]).is_ok());
    }

    #[test]
    fn round_trip_formatting() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
    }
}
