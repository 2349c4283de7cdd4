//! Uniform one-dimensional grids on a truncated domain `[-L, L]`.
//!
//! Nodes are indexed by signed integers `k` with coordinate `k * h`; the
//! origin is always node 0. Grid functions are extended by zero outside the
//! stored range, so every difference and shift operator here is total.

use crate::error::{Error, Result};

/// Nodes `k * h` with `|k * h| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    h: f64,
    radius: f64,
    half: usize,
}

impl Grid {
    pub fn new(h: f64, radius: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParams(format!("grid spacing must be positive, got {h}")));
        }
        if !(radius.is_finite() && radius >= h) {
            return Err(Error::InvalidParams(format!(
                "domain radius {radius} must be at least the spacing {h}"
            )));
        }
        // Tolerance keeps L/h = 256 from flooring to 255 on binary fractions.
        let half = (radius / h * (1.0 + 1e-12)).floor() as usize;
        Ok(Self { h, radius, half })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Largest node index; nodes run over `-half..=half`.
    #[inline]
    pub fn half(&self) -> i64 {
        self.half as i64
    }

    /// Number of nodes (always odd).
    #[inline]
    pub fn count(&self) -> usize {
        2 * self.half + 1
    }

    /// Coordinate of the node stored at array position `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as i64 - self.half as i64) as f64 * self.h
    }

    /// Coordinate of node index `k`.
    #[inline]
    pub fn node(&self, k: i64) -> f64 {
        k as f64 * self.h
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.count()).map(|i| self.x(i)).collect()
    }

    /// Same spacing and node range.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.h == other.h && self.half == other.half
    }

    pub fn check_compatible(&self, other: &Grid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch { left: self.h, right: other.h })
        }
    }
}

/// Discrete norms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    /// `sqrt(h * sum |phi|^2)`
    pub l2: f64,
    /// `max |phi|`
    pub sup: f64,
}

/// Real values at the nodes of a [`Grid`], zero outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Grid) -> Self {
        Self { values: vec![0.0; grid.count()], grid }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::InvalidParams(format!(
                "expected {} values, got {}",
                grid.count(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite grid value {v}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.count()).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    /// Wraps values without the finiteness check; used by the steppers, whose
    /// outputs may legitimately blow up when a stability condition is violated.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.count());
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at node index `k`, zero outside the stored range.
    #[inline]
    pub fn at(&self, k: i64) -> f64 {
        let i = k + self.grid.half();
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// Value at array position `i + offset`, zero outside.
    #[inline]
    pub(crate) fn at_offset(&self, i: usize, offset: i64) -> f64 {
        let j = i as i64 + offset;
        if j < 0 || j as usize >= self.values.len() {
            0.0
        } else {
            self.values[j as usize]
        }
    }

    /// `(phi(x + s h) - phi(x)) / (s h)` for `s = +1` or `s = -1`.
    pub fn forward_diff(&self, sign: i8) -> GridFunction {
        let h = self.grid.h;
        let n = self.values.len();
        let values = if sign >= 0 {
            (0..n).map(|i| (self.at_offset(i, 1) - self.values[i]) / h).collect()
        } else {
            (0..n).map(|i| (self.values[i] - self.at_offset(i, -1)) / h).collect()
        };
        Self::from_raw(self.grid, values)
    }

    /// Central difference `(phi(x + h) - phi(x - h)) / (2h)`.
    pub fn symmetric_diff(&self) -> GridFunction {
        let h2 = 2.0 * self.grid.h;
        let values = (0..self.values.len())
            .map(|i| (self.at_offset(i, 1) - self.at_offset(i, -1)) / h2)
            .collect();
        Self::from_raw(self.grid, values)
    }

    /// Second difference `delta_h delta_{-h} phi`.
    pub fn second_diff(&self) -> GridFunction {
        let inv = 1.0 / (self.grid.h * self.grid.h);
        let values = (0..self.values.len())
            .map(|i| (self.at_offset(i, 1) - 2.0 * self.values[i] + self.at_offset(i, -1)) * inv)
            .collect();
        Self::from_raw(self.grid, values)
    }

    /// `phi(x + k h)` with zero extension.
    pub fn shift(&self, k: i64) -> GridFunction {
        let values = (0..self.values.len()).map(|i| self.at_offset(i, k)).collect();
        Self::from_raw(self.grid, values)
    }

    pub fn norms(&self) -> Norms {
        let mut sq = 0.0;
        let mut sup: f64 = 0.0;
        for v in &self.values {
            sq += v * v;
            sup = sup.max(v.abs());
        }
        Norms { l2: (self.grid.h * sq).sqrt(), sup }
    }

    /// `ell_2(G_h)` inner product `h * sum phi psi`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_compatible(&other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(self.grid.h * s)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &GridFunction) -> Result<()> {
        self.grid.check_compatible(&other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        Self::from_raw(self.grid, self.values.iter().map(|v| alpha * v).collect())
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.grid.check_compatible(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.grid, values))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
