//! Paired response/covariate data and its CSV form.
//!
//! Columns are bound by header name: `y1..yd` for responses and `x1..xq` for
//! covariates. Other columns are ignored.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    y: RowMatrix,
    x: RowMatrix,
}

impl ObservationSet {
    pub fn new(y: RowMatrix, x: RowMatrix) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "responses have {} rows but covariates have {}",
                y.nrows(),
                x.nrows()
            )));
        }
        if y.nrows() < 2 {
            return Err(Error::RowCountTooSmall(y.nrows()));
        }
        if y.ncols() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "need at least 2 response columns, got {}",
                y.ncols()
            )));
        }
        if x.ncols() < 1 {
            return Err(Error::ShapeMismatch(
                "need at least 1 covariate column".into(),
            ));
        }
        for (m, prefix) in [(&y, "y"), (&x, "x")] {
            if let Some(pos) = m.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: pos / m.ncols() + 1,
                    col: format!("{prefix}{}", pos % m.ncols() + 1),
                });
            }
        }
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &RowMatrix {
        &self.y
    }

    pub fn x(&self) -> &RowMatrix {
        &self.x
    }

    pub fn response(&self, j: usize) -> Vec<f64> {
        self.y.column(j)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<String> = (1..=self.d())
            .map(|j| format!("y{j}"))
            .chain((1..=self.q()).map(|k| format!("x{k}")))
            .collect();
        wr.write_record(&header)?;
        for i in 0..self.n() {
            // `{}` on f64 prints the shortest representation that parses back exactly
            let rec: Vec<String> = self
                .y
                .row(i)
                .iter()
                .chain(self.x.row(i))
                .map(|v| format!("{v}"))
                .collect();
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(f)
    }
}

pub fn load_csv(path: &Path, d: usize, q: usize) -> Result<ObservationSet> {
    let f = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(f, d, q)
}

pub fn read_csv<R: Read>(reader: R, d: usize, q: usize) -> Result<ObservationSet> {
    if d < 2 || q < 1 {
        return Err(Error::ShapeMismatch(format!(
            "need d >= 2 and q >= 1, got d = {d}, q = {q}"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let wanted: Vec<String> = (1..=d)
        .map(|j| format!("y{j}"))
        .chain((1..=q).map(|k| format!("x{k}")))
        .collect();
    let mut positions = Vec::with_capacity(wanted.len());
    for name in &wanted {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        positions.push(pos);
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        for (k, (&pos, name)) in positions.iter().zip(&wanted).enumerate() {
            let cell = rec.get(pos).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row,
                col: name.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row,
                    col: name.clone(),
                });
            }
            if k < d {
                y.push(v);
            } else {
                x.push(v);
            }
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::RowCountTooSmall(n));
    }
    ObservationSet::new(
        RowMatrix::from_row_major(n, d, y)?,
        RowMatrix::from_row_major(n, q, x)?,
    )
}
