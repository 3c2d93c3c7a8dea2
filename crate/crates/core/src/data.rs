//! Regression data model, column scaling and CSV ingestion.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{norm2_sq, Scalar};

/// Design matrix `X` (rows are observations), response `y`, and the scaling
/// applied to the raw columns.
///
/// Columns are scaled but never centered; the model has no intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionData<T> {
    x: Matrix<T>,
    y: Vec<T>,
    column_scales: Vec<T>,
    standardized: bool,
}

impl<T: Scalar> RegressionData<T> {
    /// Unscaled data. Requires `n >= 2`, `p >= 1` and finite entries.
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        let p = x.ncols();
        Self::validate(&x, &y)?;
        Ok(Self {
            x,
            y,
            column_scales: vec![T::one(); p],
            standardized: false,
        })
    }

    fn validate(x: &Matrix<T>, y: &[T]) -> Result<()> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {}",
                x.nrows()
            )));
        }
        if x.ncols() < 1 {
            return Err(Error::InvalidData("design has no columns".into()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[T] {
        &self.y
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_scales(&self) -> &[T] {
        &self.column_scales
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Same design, new response (bootstrap and translation experiments).
    pub fn with_response(&self, y: Vec<T>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite response".into()));
        }
        Ok(Self {
            y,
            ..self.clone()
        })
    }

    /// Scales every column so that `‖x_j‖₂² = n`.
    ///
    /// `column_scales` accumulates across calls, so it always maps the
    /// original raw columns to the current ones.
    pub fn standardize(&self) -> Result<Self> {
        let n = T::lit(self.n() as f64);
        let mut x = self.x.clone();
        let mut scales = self.column_scales.clone();
        for j in 0..self.p() {
            let nrm = norm2_sq(x.col(j)).sqrt();
            if nrm == T::zero() {
                return Err(Error::ZeroColumn(j));
            }
            let factor = n.sqrt() / nrm;
            x.col_mut(j).iter_mut().for_each(|v| *v = *v * factor);
            scales[j] = scales[j] * factor;
        }
        Ok(Self {
            x,
            y: self.y.clone(),
            column_scales: scales,
            standardized: true,
        })
    }

    /// Largest deviation `|‖x_j‖² − n| / n` over columns.
    pub fn normalization_error(&self) -> T {
        let n = T::lit(self.n() as f64);
        (0..self.p())
            .map(|j| (norm2_sq(self.x.col(j)) - n).abs() / n)
            .fold(T::zero(), T::max)
    }
}

/// Maps coefficients fitted on standardized columns back to the raw scale.
pub fn destandardize_coefficients<T: Scalar>(beta_std: &[T], scales: &[T]) -> Result<Vec<T>> {
    if beta_std.len() != scales.len() {
        return Err(Error::LengthMismatch {
            expected: scales.len(),
            got: beta_std.len(),
        });
    }
    Ok(beta_std.iter().zip(scales).map(|(&b, &s)| b * s).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Name(String),
    Index(usize),
}

impl ColumnSelector {
    /// Parses a bare non-negative integer as an index, anything else as a name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub response: ColumnSelector,
}

/// Data read from CSV, with the names of the design columns in order.
#[derive(Debug, Clone)]
pub struct CsvDataset<T> {
    pub data: RegressionData<T>,
    pub feature_names: Vec<String>,
    pub response_name: String,
}

pub fn read_csv<T: Scalar>(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<CsvDataset<T>> {
    let file = std::fs::File::open(path)?;
    read_csv_from(file, opts)
}

/// Comma-separated, `.` decimal point, UTF-8. Every non-response column must be numeric.
pub fn read_csv_from<T: Scalar, R: Read>(reader: R, opts: &CsvOptions) -> Result<CsvDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Option<Vec<String>> = if opts.has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::InvalidData(format!(
                        "row {}, column {}: `{}` is not a number",
                        line + 1,
                        c,
                        field
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let ncols = header
        .as_ref()
        .map(Vec::len)
        .or_else(|| rows.first().map(Vec::len))
        .ok_or_else(|| Error::InvalidData("empty csv".into()))?;
    let names: Vec<String> = header.unwrap_or_else(|| (0..ncols).map(|c| format!("x{c}")).collect());
    let resp = match &opts.response {
        ColumnSelector::Index(i) if *i < ncols => *i,
        ColumnSelector::Index(i) => return Err(Error::IndexOutOfRange(*i, ncols)),
        ColumnSelector::Name(name) => names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("no column named `{name}`")))?,
    };
    if ncols < 2 {
        return Err(Error::InvalidData("need a response and at least one feature".into()));
    }
    let n = rows.len();
    let p = ncols - 1;
    let feature_cols: Vec<usize> = (0..ncols).filter(|&c| c != resp).collect();
    let mut x = Matrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::InvalidData(format!(
                "row {} has {} fields, expected {}",
                i + 1,
                row.len(),
                ncols
            )));
        }
        y.push(T::lit(row[resp]));
        for (jj, &c) in feature_cols.iter().enumerate() {
            x[(i, jj)] = T::lit(row[c]);
        }
    }
    Ok(CsvDataset {
        data: RegressionData::new(x, y)?,
        feature_names: feature_cols.iter().map(|&c| names[c].clone()).collect(),
        response_name: names[resp].clone(),
    })
}
