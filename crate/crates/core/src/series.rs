use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Levels,
    Differences,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Levels => "levels",
            SeriesKind::Differences => "differences",
        }
    }

    fn prefix(self) -> char {
        match self {
            SeriesKind::Levels => 'y',
            SeriesKind::Differences => 'z',
        }
    }
}

/// A `T × N` panel of observations stored row-major (one row per time step).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    kind: SeriesKind,
    names: Vec<String>,
    cols: usize,
    data: Vec<f64>,
}

impl SeriesMatrix {
    /// Builds a panel from row-major data; column names default to `y1..yN` or `z1..zN`.
    pub fn from_row_major(kind: SeriesKind, cols: usize, data: Vec<f64>) -> Result<Self> {
        let names = (1..=cols).map(|i| format!("{}{i}", kind.prefix())).collect();
        Self::with_names(kind, names, data)
    }

    pub fn with_names(kind: SeriesKind, names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let cols = names.len();
        if cols == 0 {
            return Err(Error::Invalid("series needs at least one column".into()));
        }
        if !data.len().is_multiple_of(cols) {
            return Err(Error::Invalid(format!(
                "{} values do not fill rows of width {cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite value at row {}, column {}",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        Ok(SeriesMatrix { kind, names, cols, data })
    }

    pub fn from_rows(kind: SeriesKind, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Self::from_row_major(kind, cols, rows.concat())
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.row_iter().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// First `t` rows.
    pub fn head(&self, t: usize) -> SeriesMatrix {
        let t = t.min(self.rows());
        SeriesMatrix {
            kind: self.kind,
            names: self.names.clone(),
            cols: self.cols,
            data: self.data[..t * self.cols].to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_row_slice(self.rows(), self.cols, &self.data)
    }

    pub fn require_kind(&self, kind: SeriesKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::KindMismatch {
                expected: kind.as_str(),
                got: self.kind.as_str(),
            });
        }
        Ok(())
    }

    /// Header row of column names, then one row per time step. Values use the
    /// shortest decimal form that parses back to the identical `f64`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names)?;
        let mut buf = Vec::with_capacity(self.cols);
        for row in self.row_iter() {
            buf.clear();
            buf.extend(row.iter().map(|x| x.to_string()));
            out.write_record(&buf)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV with a header row. Columns named `z…` mark differenced
    /// data; anything else is treated as levels.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if names.is_empty() || names.iter().all(|n| n.is_empty()) {
            return Err(Error::Invalid("CSV has no header row".into()));
        }
        let kind = if names.iter().all(|n| n.starts_with('z')) {
            SeriesKind::Differences
        } else {
            SeriesKind::Levels
        };
        let mut data = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != names.len() {
                return Err(Error::Invalid(format!(
                    "line {line}: expected {} fields, found {}",
                    names.len(),
                    rec.len()
                )));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Invalid(format!(
                        "line {line}, field {} ({}): cannot parse {field:?} as a number",
                        j + 1,
                        names[j]
                    ))
                })?;
                data.push(v);
            }
        }
        Self::with_names(kind, names, data)
    }
}
