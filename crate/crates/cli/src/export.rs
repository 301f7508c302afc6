//! Byte-stable writers: CSV with 17 significant digits, pretty JSON and
//! binary spectral snapshots.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use echolab::field::FieldSeries;
use echolab::reference::SpectralState;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// One CSV field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{}", float(*v)),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

/// `x` with 17 significant digits, which round-trips every `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Writes `header` and then one line per row. No rows gives a header-only file.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<Cell>>,
{
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(Cell::to_string).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_json<V: Serialize>(path: &Path, value: &V) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_snapshot(path: &Path, state: &SpectralState<f64>) -> CliResult<()> {
    let mut w = create(path)?;
    state.write_snapshot(&mut w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Rows `t, mode, re_E, im_E, sup_x_E` of a field history, time-major.
pub fn field_rows(field: &FieldSeries<f64>) -> Vec<Vec<Cell>> {
    let sup = field.sup_x_series();
    let mut rows = Vec::new();
    for (i, s) in sup.iter().enumerate() {
        let t = field.time(i);
        for (m, values) in field.modes() {
            rows.push(vec![t.into(), m.into(), values[i].re.into(), values[i].im.into(), (*s).into()]);
        }
    }
    rows
}

/// Rows `t, k_prime, re_E, im_E` of a field history, time-major.
pub fn direct_rows(field: &FieldSeries<f64>) -> Vec<Vec<Cell>> {
    let mut rows = Vec::new();
    for i in 0..field.len() {
        let t = field.time(i);
        for (m, values) in field.modes() {
            rows.push(vec![t.into(), m.into(), values[i].re.into(), values[i].im.into()]);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.len(), 18, "{s}");
        }
    }

    #[test]
    fn empty_table_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_csv(&path, &["t", "mode"], Vec::<Vec<Cell>>::new()).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,mode\n");
    }
}
