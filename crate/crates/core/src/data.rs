//! Synthetic datasets and CSV input/output.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Two interleaved crescents: class 0 on the upper unit half-circle at the
/// origin, class 1 on the lower unit half-circle centred at (1, 0.5).
/// Angles are evenly spaced on [0, π]; Gaussian noise is added per coordinate.
pub fn banana(n_per_class: usize, noise_std: f64, seed: u64) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("banana needs at least one point per class".into()));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_std must be non-negative, got {noise_std}")));
    }
    let mut rng = rng::seeded(seed);
    let n = 2 * n_per_class;
    let mut xs = DMatrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    let step = if n_per_class > 1 { PI / (n_per_class - 1) as f64 } else { 0.0 };
    for class in 0..2 {
        for i in 0..n_per_class {
            let t = step * i as f64;
            let (x, y) = if class == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            let row = class * n_per_class + i;
            xs[(row, 0)] = x + noise_std * rng.sample::<f64, _>(StandardNormal);
            xs[(row, 1)] = y + noise_std * rng.sample::<f64, _>(StandardNormal);
            labels.push(class);
        }
    }
    Ok((xs, labels))
}

/// Numeric table read from CSV: a header and rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn width(&self) -> usize {
        self.header.len()
    }

    /// Rows as a matrix of the given columns.
    pub fn columns(&self, cols: std::ops::Range<usize>) -> DMatrix<f64> {
        let width = cols.len();
        DMatrix::from_fn(self.rows.len(), width, |i, j| self.rows[i][cols.start + j])
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[col]).collect()
    }
}

/// Reads a headed CSV of numbers, skipping `#` comment lines.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::Config(format!("row {}: `{field}` is not a number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config("CSV has no data rows".into()));
    }
    Ok(Table { header, rows })
}

pub fn read_table_path(path: &std::path::Path) -> Result<Table> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_table(file)
}

/// Writes `# <comment>` followed by a headed CSV of numbers.
pub fn write_table<W: Write>(out: W, comment: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|v| format_number(*v)).collect()).collect();
    write_records(out, comment, header, &rows)
}

pub fn write_records<W: Write>(mut out: W, comment: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    writeln!(out, "# {}", comment.replace('\n', " "))?;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest representation that round-trips; integers print without `.0`.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:?}")
    }
}
