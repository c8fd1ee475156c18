//! Uniform time grids and the scalar trait shared by real and complex samples.

use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid `t_j = j * dt`, `j = 0..=steps`, on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl UniformGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain("grid horizon must be positive", horizon));
        }
        if steps == 0 {
            return Err(Error::arg("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    /// Number of nodes, `steps + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.t(j)).collect()
    }
}

/// Values that can be sampled on a grid and integrated against real weights.
pub trait GridValue:
    Copy
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + Send
    + Sync
    + std::fmt::Debug
{
    fn magnitude(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl GridValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl GridValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Composite trapezoid cumulative integral of grid samples.
pub fn cumulative_trapezoid<T: GridValue>(dt: f64, f: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = T::default();
    out.push(acc);
    for w in f.windows(2) {
        acc += (w[0] + w[1]) * (0.5 * dt);
        out.push(acc);
    }
    out
}
