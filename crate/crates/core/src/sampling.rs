//! Seeded smooth test fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::spectral::{ComplexField, GridSpec};

/// `amp * exp(i k.x - |x - c|^2 / (2 w^2))`.
pub fn gaussian_packet(grid: GridSpec, center: [f64; 3], momentum: [f64; 3], width: f64, amp: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for (a, xa) in x.iter().enumerate() {
            r2 += (xa - center[a]).powi(2);
            phase += momentum[a] * xa;
        }
        Complex64::from_polar(amp * (-r2 / (2.0 * width * width)).exp(), phase)
    })
}

/// Sum of `count` Gaussians with centers in `[-spread, spread)^d`, widths in
/// `[0.6, 1.6)` and random complex amplitudes.
pub fn random_bumps(grid: GridSpec, rng: &mut impl Rng, spread: f64, count: usize) -> ComplexField {
    let bumps: Vec<([f64; 3], f64, Complex64)> = (0..count)
        .map(|_| {
            let mut c = [0.0; 3];
            for ca in c.iter_mut().take(grid.dim) {
                *ca = rng.gen_range(-spread..spread);
            }
            let w = rng.gen_range(0.6..1.6);
            let a = Complex64::from_polar(rng.gen_range(0.3..2.0), rng.gen_range(0.0..2.0 * PI));
            (c, w, a)
        })
        .collect();
    ComplexField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(xi, ci)| (xi - ci).powi(2)).sum();
                a * (-r2 / (2.0 * w * w)).exp()
            })
            .sum()
    })
}
