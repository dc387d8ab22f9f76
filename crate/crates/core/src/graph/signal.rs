//! Column-major signal matrices: one column per graph signal.

use crate::error::{Error, Result};

/// An `n x channels` real matrix of graph signals, stored column-major so
/// each channel is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    n: usize,
    channels: usize,
    data: Vec<f64>,
}

impl SignalMatrix {
    pub fn zeros(n: usize, channels: usize) -> Self {
        Self {
            n,
            channels,
            data: vec![0.0; n * channels],
        }
    }

    /// Builds from column-major data; length must be `n * channels`.
    pub fn from_data(n: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * channels {
            return Err(Error::DimensionMismatch {
                context: "signal data length",
                expected: n * channels,
                got: data.len(),
            });
        }
        Ok(Self { n, channels, data })
    }

    /// Single-channel signal from a vector.
    pub fn from_column(values: Vec<f64>) -> Self {
        Self {
            n: values.len(),
            channels: 1,
            data: values,
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * columns.len());
        for col in columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "signal column length",
                    expected: n,
                    got: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Ok(Self {
            n,
            channels: columns.len(),
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n..(c + 1) * self.n]
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[c * self.n + i]
    }

    pub fn set(&mut self, i: usize, c: usize, value: f64) {
        self.data[c * self.n + i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-wise absolute value.
    pub fn abs(&self) -> Self {
        Self {
            n: self.n,
            channels: self.channels,
            data: self.data.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Element-wise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Self {
            n: self.n,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self += coeff * other`.
    pub fn axpy(&mut self, coeff: f64, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += coeff * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()))
    }

    /// Sum of entry-wise products over all channels.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}
