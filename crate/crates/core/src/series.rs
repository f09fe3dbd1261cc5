use nalgebra::DVector;

use crate::error::{Error, Result};

/// Vector-valued samples on a time grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != t.len() * dim {
            return Err(Error::dim(format!(
                "{} samples for {} stamps of dimension {dim}",
                data.len(),
                t.len()
            )));
        }
        Ok(TimeSeries { t, dim, data })
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        TimeSeries { t: Vec::with_capacity(n), dim, data: Vec::with_capacity(n * dim) }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.dim, "row dimension");
        self.t.push(t);
        self.data.extend_from_slice(row);
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn vector(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(self.row(k))
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.row(k)[i]).collect()
    }

    /// Largest Euclidean norm over all samples.
    pub fn peak_norm(&self) -> f64 {
        (0..self.len())
            .map(|k| self.row(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Forward-difference derivative (last sample repeats the previous slope).
    pub fn derivative(&self) -> TimeSeries {
        let n = self.len();
        let mut out = TimeSeries::with_capacity(self.dim, n);
        for k in 0..n {
            let (a, b) = if k + 1 < n { (k, k + 1) } else { (k.saturating_sub(1), k) };
            let dt = self.t[b] - self.t[a];
            let row: Vec<f64> = if dt > 0.0 {
                self.row(b).iter().zip(self.row(a)).map(|(y1, y0)| (y1 - y0) / dt).collect()
            } else {
                vec![0.0; self.dim]
            };
            out.push(self.t[k], &row);
        }
        out
    }
}
