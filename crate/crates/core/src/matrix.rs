use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of fingerprint-like data: one observation per row.
///
/// Kernel evaluation walks rows pairwise, so rows are kept contiguous. Linear
/// algebra on kernel matrices uses `nalgebra::DMatrix` instead.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                actual: data.len(),
                context: "row-major buffer length",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    actual: r.len(),
                    context: "row length",
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for r in self.rows_iter() {
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Self {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// Appends the rows of `other` below `self`. An empty `self` adopts the
    /// width of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.rows == 0 {
            return Ok(other.clone());
        }
        if other.rows > 0 && other.cols != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                actual: other.cols,
                context: "stacked column count",
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Population variance of each column.
    pub fn column_variances(&self) -> Vec<f64> {
        let n = self.rows as f64;
        (0..self.cols)
            .map(|j| {
                let mean = (0..self.rows).map(|i| self.get(i, j)).sum::<f64>() / n;
                (0..self.rows)
                    .map(|i| {
                        let d = self.get(i, j) - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / n
            })
            .collect()
    }
}
