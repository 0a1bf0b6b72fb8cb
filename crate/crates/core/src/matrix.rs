//! Small dense row-major matrix.
//!
//! Utility tables, policy tables, and decision value tables are all tiny
//! (tens of entries), so this stays deliberately minimal. Serialization is
//! a nested array of rows, matching the config file format.

use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds from nested rows. Rejects empty and ragged input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix> {
        Self::from_rows_ctx(rows, "matrix")
    }

    /// Same as [`Matrix::from_rows`] with a caller-supplied context for errors.
    pub fn from_rows_ctx(rows: Vec<Vec<f64>>, context: &str) -> Result<Matrix> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix {
                context: context.to_string(),
            });
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::RaggedMatrix {
                    context: context.to_string(),
                    row: i,
                    got: row.len(),
                    expected: cols,
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds from a flat row-major buffer of length `rows * cols`.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix {
                context: "matrix".to_string(),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "matrix".to_string(),
                expected: format!("{} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// One-hot rows: row i is all zeros except a 1 at `hot[i]`.
    pub fn one_hot(cols: usize, hot: &[usize]) -> Result<Matrix> {
        let mut data = vec![0.0; hot.len() * cols];
        for (i, &h) in hot.iter().enumerate() {
            if h >= cols {
                return Err(Error::IndexOutOfRange {
                    context: "one-hot matrix".to_string(),
                    index: h,
                    bound: cols,
                });
            }
            data[i * cols + h] = 1.0;
        }
        Matrix::from_flat(hot.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(|r| r.to_vec()).collect()
    }

    /// Checks every entry with `pred`; returns the first offending position.
    pub fn position_where(&self, mut pred: impl FnMut(f64) -> bool) -> Option<(usize, usize, f64)> {
        for (i, row) in self.iter_rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if pred(v) {
                    return Some((i, j, v));
                }
            }
        }
        None
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for row in self.iter_rows() {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_round_trips() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 2);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.to_nested(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn ragged_rejected() {
        let err = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::RaggedMatrix { row: 1, .. }));
    }

    #[test]
    fn empty_rejected() {
        assert!(Matrix::from_rows(vec![]).is_err());
        assert!(Matrix::from_rows(vec![vec![]]).is_err());
    }

    #[test]
    fn one_hot_rows() {
        let m = Matrix::one_hot(3, &[2, 0]).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(m.row(1), &[1.0, 0.0, 0.0]);
        assert!(Matrix::one_hot(2, &[2]).is_err());
    }

    #[test]
    fn serde_nested_arrays() {
        let m = Matrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[[0.5,0.5]]");
        let back: Matrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
