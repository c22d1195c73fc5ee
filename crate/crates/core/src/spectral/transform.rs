use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::{ComplexField, GridSpec};
use crate::error::{Error, Result};
use crate::params::ModelParams;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Lines per rayon task when transforming in parallel.
const LINES_PER_TASK: usize = 32;
/// Strided lines gathered per transposition pass.
const TILE: usize = 16;

/// Unitary Fourier coefficients of a field, stored in FFT slot order.
///
/// In the continuum limit `c(xi) = (2 pi)^{-d/2} \int u(x) e^{-i xi.x} dx`, so
/// `sum |c|^2 (pi/L)^d` equals the grid mass `h^d sum |u|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoefficients {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl SpectralCoefficients {
    /// Coefficient at signed lattice index `k` (one entry per axis).
    pub fn at(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.points as i64;
        let slots: Vec<usize> = k.iter().map(|&ki| ki.rem_euclid(n) as usize).collect();
        self.values[self.grid.flatten(&slots)]
    }

    /// `sum |c|^2 (pi/L)^d`.
    pub fn mass(&self) -> f64 {
        let dxi = self.grid.frequency_spacing().powi(self.grid.dim as i32);
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * dxi
    }
}

/// Norms entering every functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    /// `\int |f|^2`
    pub mass: f64,
    /// `\int |xi|^{2s} |\hat f|^2`
    pub hs_seminorm_sq: f64,
    /// `(\int |f|^{alpha+2})^{1/(alpha+2)}`
    pub lebesgue_alpha2: f64,
    /// `\int |f|^{alpha+2}`
    pub lp_alpha2_pow: f64,
}

/// FFT plans and frequency tables for one grid.
///
/// Multi-dimensional transforms are done axis by axis. Each 1-D line is an
/// independent transform, so running lines on the rayon pool gives results
/// bit-identical to the serial path.
pub struct Spectral {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
    xi_sq: Vec<f64>,
    parallel: bool,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).field("parallel", &self.parallel).finish()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        let wavenumbers: Vec<f64> = (0..grid.points).map(|j| grid.wavenumber(j)).collect();
        let xi_sq = (0..grid.len())
            .map(|flat| {
                let idx = grid.unflatten(flat);
                idx[..grid.dim].iter().map(|&j| wavenumbers[j] * wavenumbers[j]).sum()
            })
            .collect();
        Self { grid, forward, inverse, wavenumbers, xi_sq, parallel: true }
    }

    /// Serial transforms only. Output is identical either way; this just keeps
    /// the process off the thread pool.
    pub fn serial(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `|xi|^2` for every flat index in FFT slot order.
    pub fn xi_sq(&self) -> &[f64] {
        &self.xi_sq
    }

    /// Angular frequencies of one axis in FFT slot order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Component `axis` of `xi` at flat FFT index `flat`.
    pub fn xi_component(&self, flat: usize, axis: usize) -> f64 {
        self.wavenumbers[self.grid.unflatten(flat)[axis]]
    }

    /// Unnormalized forward DFT in place.
    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.process(data, &self.forward);
    }

    /// Inverse DFT in place, including the `1/N^d` normalization.
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.process(data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Inverse DFT in place without the `1/N^d` factor.
    pub fn fft_inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.process(data, &self.inverse);
    }

    fn process(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.grid.len(), "buffer does not match grid");
        let n = self.grid.points;
        let d = self.grid.dim;
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                self.run_lines(data, fft);
                continue;
            }
            let block = n * stride;
            let tile = TILE.min(stride);
            let strided = |chunk: &mut [Complex64], buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>| {
                // gather `tile` neighbouring strided lines into contiguous rows
                for c0 in (0..stride).step_by(tile) {
                    for j in 0..n {
                        let src = &chunk[j * stride + c0..j * stride + c0 + tile];
                        for (t, z) in src.iter().enumerate() {
                            buf[t * n + j] = *z;
                        }
                    }
                    fft.process_with_scratch(buf, scratch);
                    for j in 0..n {
                        let dst = &mut chunk[j * stride + c0..j * stride + c0 + tile];
                        for (t, z) in dst.iter_mut().enumerate() {
                            *z = buf[t * n + j];
                        }
                    }
                }
            };
            let scratch_len = fft.get_inplace_scratch_len();
            if self.parallel && data.len() > block {
                data.par_chunks_mut(block).for_each(|chunk| {
                    let mut buf = vec![ZERO; n * tile];
                    let mut scratch = vec![ZERO; scratch_len];
                    strided(chunk, &mut buf, &mut scratch);
                });
            } else {
                let mut buf = vec![ZERO; n * tile];
                let mut scratch = vec![ZERO; scratch_len];
                for chunk in data.chunks_mut(block) {
                    strided(chunk, &mut buf, &mut scratch);
                }
            }
        }
    }

    fn run_lines(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points;
        if self.parallel && data.len() > n * LINES_PER_TASK {
            data.par_chunks_mut(n * LINES_PER_TASK).for_each(|chunk| {
                let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
                fft.process_with_scratch(chunk, &mut scratch);
            });
        } else {
            let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
            fft.process_with_scratch(data, &mut scratch);
        }
    }

    fn unitary_factor(&self) -> f64 {
        (self.grid.spacing() / (2.0 * PI).sqrt()).powi(self.grid.dim as i32)
    }

    /// `(-1)^{k_1 + ... + k_d}`: the phase from sampling on `[-L, L)` rather than `[0, 2L)`.
    fn parity(&self, flat: usize) -> f64 {
        let idx = self.grid.unflatten(flat);
        let sum: i64 = idx[..self.grid.dim].iter().map(|&j| self.grid.signed_index(j)).sum();
        if sum.rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn transform(&self, f: &ComplexField) -> Result<SpectralCoefficients> {
        f.check_grid(&self.grid)?;
        let mut values = f.values.clone();
        self.fft_forward(&mut values);
        let a = self.unitary_factor();
        for (flat, c) in values.iter_mut().enumerate() {
            *c *= a * self.parity(flat);
        }
        Ok(SpectralCoefficients { grid: self.grid, values })
    }

    pub fn inverse_transform(&self, coeffs: &SpectralCoefficients) -> Result<ComplexField> {
        if coeffs.grid != self.grid || coeffs.values.len() != self.grid.len() {
            return Err(Error::SizeMismatch { expected: self.grid.len(), found: coeffs.values.len() });
        }
        let a = self.unitary_factor();
        let mut values: Vec<Complex64> =
            coeffs.values.iter().enumerate().map(|(flat, c)| c * (self.parity(flat) / a)).collect();
        self.fft_inverse(&mut values);
        Ok(ComplexField { grid: self.grid, values })
    }

    /// Applies the Fourier multiplier `symbol(flat FFT index)`.
    pub fn apply_multiplier(
        &self,
        f: &ComplexField,
        symbol: impl Fn(usize) -> Complex64,
    ) -> Result<ComplexField> {
        f.check_grid(&self.grid)?;
        let mut values = f.values.clone();
        self.fft_forward(&mut values);
        for (flat, z) in values.iter_mut().enumerate() {
            *z *= symbol(flat);
        }
        self.fft_inverse(&mut values);
        Ok(ComplexField { grid: self.grid, values })
    }

    /// `|xi|^{2s}` for each flat FFT index; exactly 0 at `xi = 0`.
    pub fn fractional_symbol(&self, s: f64) -> Vec<f64> {
        self.xi_sq.iter().map(|&q| if q == 0.0 { 0.0 } else { q.powf(s) }).collect()
    }

    /// `(-Delta)^s f = F^{-1}[|xi|^{2s} F f]`.
    pub fn fractional_laplacian(&self, f: &ComplexField, s: f64) -> Result<ComplexField> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("fractional order s = {s} must satisfy 0 < s <= 1")));
        }
        let symbol = self.fractional_symbol(s);
        self.apply_multiplier(f, |flat| Complex64::new(symbol[flat], 0.0))
    }

    /// Spectral gradient; component `j` is `F^{-1}[i xi_j F f]`.
    ///
    /// The Nyquist slot of each differentiated axis is zeroed so real fields
    /// have real derivatives.
    pub fn gradient(&self, f: &ComplexField) -> Result<Vec<ComplexField>> {
        f.check_grid(&self.grid)?;
        let mut hat = f.values.clone();
        self.fft_forward(&mut hat);
        Ok((0..self.grid.dim).map(|axis| self.gradient_component(&hat, axis)).collect())
    }

    /// One gradient component from already-transformed data.
    pub fn gradient_component(&self, hat: &[Complex64], axis: usize) -> ComplexField {
        let n = self.grid.points;
        let nyquist = n / 2;
        let stride = n.pow((self.grid.dim - 1 - axis) as u32);
        let mut values: Vec<Complex64> = hat
            .iter()
            .enumerate()
            .map(|(flat, z)| {
                let j = (flat / stride) % n;
                if j == nyquist {
                    ZERO
                } else {
                    z * Complex64::new(0.0, self.wavenumbers[j])
                }
            })
            .collect();
        self.fft_inverse(&mut values);
        ComplexField { grid: self.grid, values }
    }

    /// `\int |f|^2` as a Riemann sum.
    pub fn mass(&self, f: &ComplexField) -> f64 {
        f.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// `\int |f|^p` as a Riemann sum.
    pub fn lp_pow(&self, f: &ComplexField, p: f64) -> f64 {
        f.values.iter().map(|z| z.norm_sqr().powf(0.5 * p)).sum::<f64>() * self.grid.cell_volume()
    }

    /// `\int |xi|^{2s} |\hat f|^2` under the unitary convention.
    pub fn hs_seminorm_sq(&self, f: &ComplexField, s: f64) -> Result<f64> {
        f.check_grid(&self.grid)?;
        let mut hat = f.values.clone();
        self.fft_forward(&mut hat);
        Ok(self.hs_from_hat(&hat, s))
    }

    /// Same as [`Self::hs_seminorm_sq`] from unnormalized DFT data.
    pub fn hs_from_hat(&self, hat: &[Complex64], s: f64) -> f64 {
        let weight = self.grid.cell_volume() / self.grid.len() as f64;
        hat.iter()
            .zip(&self.xi_sq)
            .map(|(z, &q)| if q == 0.0 { 0.0 } else { q.powf(s) * z.norm_sqr() })
            .sum::<f64>()
            * weight
    }

    pub fn norms(&self, f: &ComplexField, p: &ModelParams) -> Result<Norms> {
        f.check_grid(&self.grid)?;
        f.ensure_finite()?;
        let mass = self.mass(f);
        let hs_seminorm_sq = self.hs_seminorm_sq(f, p.s)?;
        let lp_alpha2_pow = self.lp_pow(f, p.alpha + 2.0);
        Ok(Norms { mass, hs_seminorm_sq, lebesgue_alpha2: lp_alpha2_pow.powf(1.0 / (p.alpha + 2.0)), lp_alpha2_pow })
    }

    /// Fraction of the spectral mass carried by modes with some `|k_j| > N/3`.
    pub fn spectral_tail_fraction(&self, f: &ComplexField) -> f64 {
        let mut hat = f.values.clone();
        self.fft_forward(&mut hat);
        self.tail_fraction_from_hat(&hat)
    }

    pub fn tail_fraction_from_hat(&self, hat: &[Complex64]) -> f64 {
        let cut = self.grid.points as i64 / 3;
        let mut total = 0.0;
        let mut tail = 0.0;
        for (flat, z) in hat.iter().enumerate() {
            let w = z.norm_sqr();
            total += w;
            let idx = self.grid.unflatten(flat);
            if idx[..self.grid.dim].iter().any(|&j| self.grid.signed_index(j).abs() > cut) {
                tail += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}
