//! Uniformly sampled 1-D traces and 2-D grids with axis metadata.
//!
//! Axes are stored as `start + k * step`; two-dimensional grids are row-major
//! with the first axis always the signal coordinate and the second the idler
//! coordinate.

use num_complex::Complex;
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("axis step must be positive")]
    NonPositiveStep,
    #[error("axis needs at least two samples")]
    TooFewSamples,
    #[error("value count {got} does not match declared axis length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grids are sampled on different axes")]
    GridMismatch,
    #[error("axes must be uniform for this operation")]
    NonUniformGrid,
    #[error("no half-maximum crossing inside the sampled range")]
    NoHalfCrossing,
}

/// A uniform sampling axis with a unit-carrying label (e.g. `"tau_s"`).
#[derive(Debug, Clone, PartialEq)]
pub struct Axis<T> {
    start: T,
    step: T,
    len: usize,
    pub label: String,
}

impl<T: Scalar> Axis<T> {
    pub fn new(start: T, step: T, len: usize, label: impl Into<String>) -> Result<Self, GridError> {
        if !(step > T::zero()) {
            return Err(GridError::NonPositiveStep);
        }
        if len < 2 {
            return Err(GridError::TooFewSamples);
        }
        Ok(Self {
            start,
            step,
            len,
            label: label.into(),
        })
    }

    /// Axis spanning `[start, end]` inclusive with `len` samples.
    pub fn span(start: T, end: T, len: usize, label: impl Into<String>) -> Result<Self, GridError> {
        if len < 2 {
            return Err(GridError::TooFewSamples);
        }
        let step = (end - start) / T::of((len - 1) as f64);
        Self::new(start, step, len, label)
    }

    /// Axis symmetric about zero: `[-half_span, half_span]`.
    pub fn symmetric(half_span: T, len: usize, label: impl Into<String>) -> Result<Self, GridError> {
        Self::span(-half_span, half_span, len, label)
    }

    pub fn start(&self) -> T {
        self.start
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end(&self) -> T {
        self.value(self.len - 1)
    }

    pub fn value(&self, index: usize) -> T {
        self.start + self.step * T::of(index as f64)
    }

    pub fn values(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len).map(move |k| self.value(k))
    }

    /// Index of the sample nearest to `x`.
    pub fn nearest(&self, x: T) -> usize {
        let raw = ((x - self.start) / self.step).round();
        let idx = raw.to_f64().unwrap_or(0.0).max(0.0) as usize;
        idx.min(self.len - 1)
    }

    pub fn same_sampling(&self, other: &Self) -> bool {
        self.len == other.len
            && (self.start - other.start).abs() <= self.step * T::of(1e-9)
            && (self.step - other.step).abs() <= self.step * T::of(1e-9)
    }
}

/// A uniformly sampled 1-D trace; `V` is `T` for real data or `Complex<T>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T, V = T> {
    pub axis: Axis<T>,
    pub values: Vec<V>,
    pub value_label: String,
}

impl<T: Scalar, V> Trace<T, V> {
    pub fn new(
        axis: Axis<T>,
        values: Vec<V>,
        value_label: impl Into<String>,
    ) -> Result<Self, GridError> {
        if values.len() != axis.len() {
            return Err(GridError::LengthMismatch {
                expected: axis.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            axis,
            values,
            value_label: value_label.into(),
        })
    }

    pub fn from_fn(
        axis: Axis<T>,
        value_label: impl Into<String>,
        mut f: impl FnMut(T) -> V,
    ) -> Self {
        let values = axis.values().map(&mut f).collect();
        Self {
            axis,
            values,
            value_label: value_label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &V)> + '_ {
        self.axis.values().zip(self.values.iter())
    }
}

impl<T: Scalar> Trace<T> {
    /// Index and value of the global maximum.
    pub fn argmax(&self) -> (usize, T) {
        let mut best = (0, self.values[0]);
        for (k, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (k, v);
            }
        }
        best
    }

    /// Index and value of the global minimum.
    pub fn argmin(&self) -> (usize, T) {
        let mut best = (0, self.values[0]);
        for (k, &v) in self.values.iter().enumerate() {
            if v < best.1 {
                best = (k, v);
            }
        }
        best
    }

    /// Full width at half maximum of the sampled peak, with linear
    /// interpolation at the two half crossings.
    pub fn fwhm(&self) -> Result<T, GridError> {
        let (peak_idx, peak) = self.argmax();
        // Offset-insensitive: measure against the smaller edge value.
        let base = self.values[0].min(self.values[self.len() - 1]);
        let half = base + (peak - base) * T::half();
        let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<T> {
            let mut prev = peak_idx;
            for k in range {
                if self.values[k] <= half {
                    let (x0, y0) = (self.axis.value(prev), self.values[prev]);
                    let (x1, y1) = (self.axis.value(k), self.values[k]);
                    let t = (half - y0) / (y1 - y0);
                    return Some(x0 + (x1 - x0) * t);
                }
                prev = k;
            }
            None
        };
        let right = cross(&mut ((peak_idx + 1)..self.len())).ok_or(GridError::NoHalfCrossing)?;
        let left = cross(&mut (0..peak_idx).rev()).ok_or(GridError::NoHalfCrossing)?;
        Ok(right - left)
    }

    /// Count of interior local maxima; a run of equal samples flanked by
    /// lower ones counts as a single maximum.
    pub fn local_maxima(&self) -> usize {
        let v = &self.values;
        let n = v.len();
        let mut count = 0;
        let mut k = 1;
        while k < n - 1 {
            if v[k] > v[k - 1] {
                let mut m = k;
                while m + 1 < n && v[m + 1] == v[k] {
                    m += 1;
                }
                if m + 1 < n && v[m + 1] < v[k] {
                    count += 1;
                }
                k = m + 1;
            } else {
                k += 1;
            }
        }
        count
    }
}

/// A uniformly sampled 2-D complex or real grid, row-major over
/// `(axis0, axis1)` = (signal coordinate, idler coordinate).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2<T, V> {
    pub axis0: Axis<T>,
    pub axis1: Axis<T>,
    values: Vec<V>,
    pub value_label: String,
}

impl<T: Scalar, V: Copy> Grid2<T, V> {
    pub fn new(
        axis0: Axis<T>,
        axis1: Axis<T>,
        values: Vec<V>,
        value_label: impl Into<String>,
    ) -> Result<Self, GridError> {
        if values.len() != axis0.len() * axis1.len() {
            return Err(GridError::LengthMismatch {
                expected: axis0.len() * axis1.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            axis0,
            axis1,
            values,
            value_label: value_label.into(),
        })
    }

    pub fn from_fn(
        axis0: Axis<T>,
        axis1: Axis<T>,
        value_label: impl Into<String>,
        mut f: impl FnMut(T, T) -> V,
    ) -> Self {
        let mut values = Vec::with_capacity(axis0.len() * axis1.len());
        for i in 0..axis0.len() {
            let x0 = axis0.value(i);
            for j in 0..axis1.len() {
                values.push(f(x0, axis1.value(j)));
            }
        }
        Self {
            axis0,
            axis1,
            values,
            value_label: value_label.into(),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> V {
        self.values[i * self.axis1.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: V) {
        self.values[i * self.axis1.len() + j] = v;
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [V] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[V] {
        let n1 = self.axis1.len();
        &self.values[i * n1..(i + 1) * n1]
    }

    pub fn same_sampling(&self, other: &Self) -> bool {
        self.axis0.same_sampling(&other.axis0) && self.axis1.same_sampling(&other.axis1)
    }
}

impl<T: Scalar> Grid2<T, Complex<T>> {
    /// Largest modulus on the grid.
    pub fn max_modulus(&self) -> T {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}
