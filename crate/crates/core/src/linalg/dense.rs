use serde::{Deserialize, Serialize};

use super::{normalize_slice, NormalizeReport};
use crate::{Error, Result};

/// Row-major single-precision matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::shape(format!("{cols} columns"), bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f32) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · v` with double-precision accumulation.
    pub fn matvec(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.cols {
            return Err(Error::shape(self.cols, v.len()));
        }
        Ok(self
            .iter_rows()
            .map(|row| {
                row.iter()
                    .zip(v)
                    .map(|(&a, &b)| f64::from(a) * f64::from(b))
                    .sum::<f64>() as f32
            })
            .collect())
    }

    /// `vᵀ · self` with double-precision accumulation.
    pub fn vecmat(&self, v: &[f32]) -> Result<Vec<f32>> {
        if v.len() != self.rows {
            return Err(Error::shape(self.rows, v.len()));
        }
        let mut acc = vec![0.0f64; self.cols];
        for (row, &w) in self.iter_rows().zip(v) {
            if w == 0.0 {
                continue;
            }
            for (a, &x) in acc.iter_mut().zip(row) {
                *a += f64::from(w) * f64::from(x);
            }
        }
        Ok(acc.into_iter().map(|a| a as f32).collect())
    }

    /// Scales every row with norm above [`super::NORM_EPS`] to unit ℓ2 norm.
    /// Zero rows stay zero and are reported.
    pub fn row_l2_normalize(&mut self) -> NormalizeReport {
        let mut report = NormalizeReport::default();
        let cols = self.cols;
        if cols == 0 {
            return report;
        }
        for (i, row) in self.data.chunks_exact_mut(cols).enumerate() {
            if !normalize_slice(row) {
                report.zero_rows.push(i);
            }
        }
        report
    }

    pub fn row_l2_normalized(&self) -> (Self, NormalizeReport) {
        let mut out = self.clone();
        let report = out.row_l2_normalize();
        (out, report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five_row() {
        let mut m = DenseMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let report = m.row_l2_normalize();
        assert!(report.zero_rows.is_empty());
        assert!((m.get(0, 0) - 0.6).abs() < 1e-7);
        assert!((m.get(0, 1) - 0.8).abs() < 1e-7);
    }

    #[test]
    fn zero_row_is_flagged_not_touched() {
        let mut m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let report = m.row_l2_normalize();
        assert_eq!(report.zero_rows, vec![1]);
        assert_eq!(m.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn unit_row_is_unchanged() {
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let mut m = DenseMatrix::from_rows(&[vec![s, -s], vec![1.0, 0.0]]).unwrap();
        let before = m.clone();
        m.row_l2_normalize();
        for (a, b) in m.as_slice().iter().zip(before.as_slice()) {
            assert!((a - b).abs() <= 1e-7);
        }
    }

    #[test]
    fn rejects_bad_shapes_and_non_finite_values() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![0.0; 3]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![0.0, f32::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn matvec_and_vecmat() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(m.vecmat(&[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }
}
