use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Design matrix and responses, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Pool {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pool"));
        }
        Ok(Pool { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Reads a headerless CSV where each row holds the features followed by the
/// response.
pub fn load_pool_csv(path: impl AsRef<Path>) -> Result<Pool> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| Error::Csv(e.to_string()))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() < 2 {
            return Err(Error::Csv(format!("row {}: need features and a response", line + 1)));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Csv(format!(
                    "row {}: expected {} fields, got {}",
                    line + 1,
                    w,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Csv(format!("row {}: cannot parse {field:?}", line + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let w = width.ok_or_else(|| Error::Csv("empty file".into()))?;
    let all = DMatrix::from_row_slice(rows, w, &values);
    let x = all.columns(0, w - 1).into_owned();
    let y = all.column(w - 1).into_owned();
    Pool::new(x, y)
}
