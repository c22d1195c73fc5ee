use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box `[-L, L)^d` sampled with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub half_length: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Grid(format!("dimension {dim} must be 1, 2 or 3")));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Grid(format!("half-length L = {half_length} must be positive")));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::Grid(format!("N = {points} must be a power of two and at least 8")));
        }
        Ok(Self { dim, half_length, points })
    }

    /// Grid spacing `h = 2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Total number of nodes `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Box volume `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    /// Physical coordinate of node `i` along any axis: `-L + i h`.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.spacing()
    }

    /// Signed lattice index of FFT slot `j`: `0..N/2-1` then `-N/2..-1`.
    pub fn signed_index(&self, j: usize) -> i64 {
        let n = self.points as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular frequency `pi k / L` of FFT slot `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        PI * self.signed_index(j) as f64 / self.half_length
    }

    /// Frequency lattice spacing `pi / L`.
    pub fn frequency_spacing(&self) -> f64 {
        PI / self.half_length
    }

    /// Splits a row-major flat index into per-axis indices (unused axes are 0).
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of node `flat`; entries beyond `dim` are 0.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// Index of the node sitting at `x = 0`.
    pub fn center_index(&self) -> usize {
        self.flatten(&[self.points / 2; 3])
    }
}

/// Complex samples of a function on a [`GridSpec`], row-major, axis 0 slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x)` at every node; `x` has `dim` meaningful entries.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..grid.dim])
            })
            .collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.grid != *grid || self.values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), found: self.values.len() });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Diverged)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|z| z * factor).collect() }
    }

    pub fn scaled_complex(&self, factor: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|z| z * factor).collect() }
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &ComplexField) -> Result<Self> {
        other.check_grid(&self.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + factor * b).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// `sup |self - other|`.
    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).fold(0.0, f64::max).sqrt()
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Ratio between the largest modulus on the outermost shell of nodes
    /// (any axis index 0 or N-1) and the global maximum.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.sup_norm();
        if peak == 0.0 {
            return 0.0;
        }
        let n = self.grid.points;
        let edge = (0..self.len())
            .filter(|&i| {
                let idx = self.grid.unflatten(i);
                idx[..self.grid.dim].iter().any(|&k| k == 0 || k == n - 1)
            })
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max);
        edge / peak
    }

    /// Logs a truncation warning when the boundary shell exceeds `1e-10` of the peak.
    pub fn warn_if_truncated(&self, what: &str) -> bool {
        let ratio = self.boundary_ratio();
        if ratio > BOUNDARY_TOLERANCE {
            log::warn!(
                "{what}: boundary magnitude is {ratio:.2e} of the peak (> {BOUNDARY_TOLERANCE:.0e}); box may be too small"
            );
            true
        } else {
            false
        }
    }
}

/// Boundary-shell magnitude, relative to the peak, above which a box is flagged as truncating.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;
