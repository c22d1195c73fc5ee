//! Virial actions `M_phi(u) = 2 \int grad(phi) . Im(conj(u) grad(u))`, the
//! truncated radial weights `phi_R`, and the resolvent representation
//! `u_m = c_s (-Delta + m)^{-1} u` of the fractional kinetic term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::spectral::{ComplexField, GridSpec, Spectral};

/// `psi(t) = 1 - 35t^4 + 84t^5 - 70t^6 + 20t^7`: descends from 1 to 0 on `[0, 1]`
/// with three vanishing derivatives at both ends.
const PSI: [f64; 8] = [1.0, 0.0, 0.0, 0.0, -35.0, 84.0, -70.0, 20.0];

/// The unit profile `phi`: `r^2` on `[0, 1]`, constant on `[10, inf)`, and
/// `phi'(r) = 2 r psi((r - 1)/9)` in between.
#[derive(Clone, Debug)]
struct UnitProfile {
    /// `phi'(1 + 9t)` as a polynomial in `t`.
    slope: Vec<f64>,
    /// `phi(1 + 9t) - 1`.
    value: Vec<f64>,
    plateau: f64,
}

impl UnitProfile {
    fn new() -> Self {
        let mut slope = vec![0.0; PSI.len() + 1];
        for (k, c) in PSI.iter().enumerate() {
            slope[k] += 2.0 * c;
            slope[k + 1] += 18.0 * c;
        }
        let mut value = vec![0.0; slope.len() + 1];
        for (k, c) in slope.iter().enumerate() {
            value[k + 1] = 9.0 * c / (k + 1) as f64;
        }
        let plateau = 1.0 + horner(&value, 1.0);
        Self { slope, value, plateau }
    }

    /// `[phi, phi', phi'', phi''', phi'''']` at `r`.
    fn eval(&self, r: f64) -> [f64; 5] {
        if r <= 1.0 {
            return [r * r, 2.0 * r, 2.0, 0.0, 0.0];
        }
        if r >= 10.0 {
            return [self.plateau, 0.0, 0.0, 0.0, 0.0];
        }
        let t = (r - 1.0) / 9.0;
        let d1 = derivative(&self.slope);
        let d2 = derivative(&d1);
        let d3 = derivative(&d2);
        [
            1.0 + horner(&self.value, t),
            horner(&self.slope, t),
            horner(&d1, t) / 9.0,
            horner(&d2, t) / 81.0,
            horner(&d3, t) / 729.0,
        ]
    }
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

/// `phi_R(x) = R^2 phi(|x|/R)` and the derivatives entering the virial calculus,
/// tabulated on a grid centered at `x = 0`.
#[derive(Clone, Debug)]
pub struct VirialWeight {
    pub radius: f64,
    pub grid: GridSpec,
    pub phi: Vec<f64>,
    /// Radial derivatives `phi_R'` and `phi_R''`.
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub bilaplacian: Vec<f64>,
}

impl VirialWeight {
    pub fn build(grid: GridSpec, radius: f64) -> Result<Self> {
        if !(radius > 1.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("virial weight needs R > 1 (got {radius})")));
        }
        if 10.0 * radius > grid.half_length {
            log::warn!(
                "virial weight: plateau radius 10R = {} exceeds the half box length {}",
                10.0 * radius,
                grid.half_length
            );
        }
        let unit = UnitProfile::new();
        let d = grid.dim as f64;
        let n = grid.len();
        let (mut phi, mut d1, mut d2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut laplacian, mut bilaplacian) = (vec![0.0; n], vec![0.0; n]);
        for flat in 0..n {
            let x = grid.position(flat);
            let r = x[..grid.dim].iter().map(|c| c * c).sum::<f64>().sqrt();
            let [f0, f1, f2, f3, f4] = radial_derivatives(&unit, radius, r);
            phi[flat] = f0;
            d1[flat] = f1;
            d2[flat] = f2;
            if r <= radius {
                laplacian[flat] = 2.0 * d;
                bilaplacian[flat] = 0.0;
            } else {
                laplacian[flat] = f2 + (d - 1.0) * f1 / r;
                bilaplacian[flat] = f4 + 2.0 * (d - 1.0) * f3 / r
                    + (d - 1.0) * (d - 3.0) * (f2 / (r * r) - f1 / (r * r * r));
            }
        }
        let w = Self { radius, grid, phi, d1, d2, laplacian, bilaplacian };
        w.check_constraints()?;
        Ok(w)
    }

    /// `phi_R`, its first four radial derivatives, at radius `r`.
    pub fn profile(&self, r: f64) -> [f64; 5] {
        radial_derivatives(&UnitProfile::new(), self.radius, r)
    }

    /// `phi_R'' <= 2`, `phi_R'/r <= 2`, `Delta phi_R <= 2d` at every node.
    pub fn check_constraints(&self) -> Result<()> {
        let d = self.grid.dim as f64;
        let tol = 1e-12;
        for flat in 0..self.grid.len() {
            let x = self.grid.position(flat);
            let r = x[..self.grid.dim].iter().map(|c| c * c).sum::<f64>().sqrt();
            let ratio = if r > 0.0 { self.d1[flat] / r } else { 2.0 };
            if self.d2[flat] > 2.0 + tol || ratio > 2.0 + tol || self.laplacian[flat] > 2.0 * d + tol {
                return Err(Error::Domain(format!("virial weight violates its bounds at r = {r}")));
            }
        }
        Ok(())
    }

    /// `d/dx_j phi_R` at a node.
    fn gradient(&self, flat: usize, x: &[f64; 3], axis: usize) -> f64 {
        let r = x[..self.grid.dim].iter().map(|c| c * c).sum::<f64>().sqrt();
        if r <= self.radius {
            2.0 * x[axis]
        } else {
            self.d1[flat] * x[axis] / r
        }
    }

    /// Hessian entry `d^2 phi_R / dx_j dx_k` at a node.
    fn hessian(&self, flat: usize, x: &[f64; 3], j: usize, k: usize) -> f64 {
        let r = x[..self.grid.dim].iter().map(|c| c * c).sum::<f64>().sqrt();
        let delta = if j == k { 1.0 } else { 0.0 };
        if r <= self.radius {
            return 2.0 * delta;
        }
        let outer = x[j] * x[k] / (r * r);
        self.d2[flat] * outer + self.d1[flat] / r * (delta - outer)
    }
}

fn radial_derivatives(unit: &UnitProfile, radius: f64, r: f64) -> [f64; 5] {
    let [f0, f1, f2, f3, f4] = unit.eval(r / radius);
    [radius * radius * f0, radius * f1, f2, f3 / radius, f4 / (radius * radius)]
}

/// Weight selector for virial quantities.
#[derive(Clone, Copy, Debug)]
pub enum Weight<'a> {
    /// `phi = |x|^2`.
    Full,
    Truncated(&'a VirialWeight),
}

impl Weight<'_> {
    fn gradient(&self, flat: usize, x: &[f64; 3], axis: usize) -> f64 {
        match self {
            Weight::Full => 2.0 * x[axis],
            Weight::Truncated(w) => w.gradient(flat, x, axis),
        }
    }

    fn hessian(&self, flat: usize, x: &[f64; 3], j: usize, k: usize) -> f64 {
        match self {
            Weight::Full => {
                if j == k {
                    2.0
                } else {
                    0.0
                }
            }
            Weight::Truncated(w) => w.hessian(flat, x, j, k),
        }
    }

    fn laplacian(&self, flat: usize, dim: usize) -> f64 {
        match self {
            Weight::Full => 2.0 * dim as f64,
            Weight::Truncated(w) => w.laplacian[flat],
        }
    }

    fn bilaplacian(&self, flat: usize) -> f64 {
        match self {
            Weight::Full => 0.0,
            Weight::Truncated(w) => w.bilaplacian[flat],
        }
    }

    fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        match self {
            Weight::Truncated(w) if w.grid != *grid => Err(Error::Domain("virial weight built on another grid".into())),
            _ => Ok(()),
        }
    }
}

/// `M_phi(u) = 2 \int grad(phi) . Im(conj(u) grad(u)) dx`.
pub fn virial_action(sp: &Spectral, u: &ComplexField, w: Weight<'_>) -> Result<f64> {
    u.check_grid(sp.grid())?;
    w.check_grid(sp.grid())?;
    let mut hat = u.values.clone();
    sp.fft_forward(&mut hat);
    virial_action_from_hat(sp, u, &hat, w)
}

/// [`virial_action`] with the unnormalized DFT of `u` already at hand.
pub fn virial_action_from_hat(sp: &Spectral, u: &ComplexField, hat: &[Complex64], w: Weight<'_>) -> Result<f64> {
    let grid = *sp.grid();
    let mut total = 0.0;
    for axis in 0..grid.dim {
        let du = sp.gradient_component(hat, axis);
        for (flat, (v, dv)) in u.values.iter().zip(&du.values).enumerate() {
            let x = grid.position(flat);
            total += w.gradient(flat, &x, axis) * (v.conj() * dv).im;
        }
    }
    Ok(2.0 * total * grid.cell_volume())
}

/// Forward difference `(M_phi(u(t + delta)) - M_phi(u(t))) / delta`.
pub fn virial_rate_fd(sp: &Spectral, before: &ComplexField, after: &ComplexField, delta: f64, w: Weight<'_>) -> Result<f64> {
    if !(delta != 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("difference step must be nonzero (got {delta})")));
    }
    before.ensure_finite()?;
    after.ensure_finite()?;
    Ok((virial_action(sp, after, w)? - virial_action(sp, before, w)?) / delta)
}

/// `c_s = sqrt(sin(pi s) / pi)`.
pub fn resolvent_normalization(s: f64) -> f64 {
    ((PI * s).sin() / PI).sqrt()
}

/// `u_m = c_s (-Delta + m)^{-1} u`.
pub fn balakrishnan_field(sp: &Spectral, u: &ComplexField, m: f64, s: f64) -> Result<ComplexField> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("resolvent parameter m must be positive (got {m})")));
    }
    let cs = resolvent_normalization(s);
    let xi_sq = sp.xi_sq();
    sp.apply_multiplier(u, |flat| Complex64::new(cs / (xi_sq[flat] + m), 0.0))
}

/// Quadrature for `\int_0^infty f(m) dm` in the variable `y = ln m`.
///
/// Integrands of the form `m^s g(m)` with `g` a rational function of `m`
/// whose poles lie on the negative axis are analytic in the strip
/// `|Im y| < pi`, so the trapezoid rule converges geometrically in the
/// step. The node range covers the poles `-q` for `q` in `[q_min, q_max]`
/// plus enough of both exponential tails.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalakrishnanQuadrature {
    pub s: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl BalakrishnanQuadrature {
    /// Target relative size of the neglected tails.
    const TAIL: f64 = 1e-14;

    pub fn new(s: f64, q_min: f64, q_max: f64, step: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("resolvent quadrature needs 0 < s < 1 (got {s})")));
        }
        if !(q_min > 0.0 && q_max >= q_min && step > 0.0) {
            return Err(Error::Domain(format!(
                "resolvent quadrature needs 0 < q_min <= q_max and a positive step (got {q_min}, {q_max}, {step})"
            )));
        }
        let ln_tail = -Self::TAIL.ln();
        // left tail decays like m^s, right tail like m^{s-1}
        let y_min = q_min.ln() - ln_tail / s;
        let y_max = q_max.ln() + ln_tail / (1.0 - s);
        let count = ((y_max - y_min) / step).ceil() as usize + 1;
        let nodes: Vec<f64> = (0..count).map(|j| (y_min + j as f64 * step).exp()).collect();
        let weights = nodes.iter().map(|m| step * m).collect();
        Ok(Self { s, nodes, weights, step, q_min, q_max })
    }

    /// Covers every nonzero `|xi|^2` on the grid together with `q` in `[1/4, 4]`.
    pub fn for_grid(s: f64, grid: &GridSpec) -> Result<Self> {
        let dk = grid.frequency_spacing();
        let kmax = dk * (grid.points / 2) as f64;
        let q_min = (dk * dk).min(0.25);
        let q_max = (grid.dim as f64 * kmax * kmax).max(4.0);
        Self::new(s, q_min, q_max, 0.5)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&m, w)| w * f(m)).sum()
    }

    /// `(sin(pi s)/pi) \int_0^infty m^s/(q+m)^2 dm`, which equals `s q^{s-1}`.
    pub fn kernel_integral(&self, q: f64) -> f64 {
        let s = self.s;
        (PI * s).sin() / PI * self.integrate(|m| m.powf(s) / ((q + m) * (q + m)))
    }

    /// Largest relative defect of [`Self::kernel_integral`] over `q` in `{1/4, 1, 4}`.
    pub fn invariant_defect(&self) -> f64 {
        [0.25f64, 1.0, 4.0]
            .iter()
            .map(|&q| {
                let exact = self.s * q.powf(self.s - 1.0);
                (self.kernel_integral(q) - exact).abs() / exact
            })
            .fold(0.0, f64::max)
    }

    pub fn check_invariant(&self) -> Result<()> {
        let defect = self.invariant_defect();
        if defect > 1e-8 {
            return Err(Error::Configuration(format!(
                "resolvent quadrature reproduces s q^(s-1) only to {defect:.2e} (needs 1e-8)"
            )));
        }
        Ok(())
    }
}

/// `\int_0^infty m^s \int |grad u_m|^2 dx dm`, evaluated mode by mode.
pub fn resolvent_kinetic(sp: &Spectral, u: &ComplexField, quad: &BalakrishnanQuadrature) -> Result<f64> {
    u.check_grid(sp.grid())?;
    let mut hat = u.values.clone();
    sp.fft_forward(&mut hat);
    let weight = sp.grid().cell_volume() / sp.grid().len() as f64;
    let cs2 = resolvent_normalization(quad.s).powi(2);
    let spectrum: Vec<(f64, f64)> = hat
        .iter()
        .zip(sp.xi_sq())
        .filter(|(_, &q)| q > 0.0)
        .map(|(z, &q)| (q, z.norm_sqr()))
        .collect();
    let s = quad.s;
    Ok(cs2
        * weight
        * quad.integrate(|m| m.powf(s) * spectrum.iter().map(|(q, a)| q * a / ((q + m) * (q + m))).sum::<f64>()))
}

/// Right-hand side of the time-evolution law for `M_phi` along the flow,
///
/// `- \int m^s \int Delta^2 phi |u_m|^2 + 4 sum_jk \int m^s \int d_jk phi conj(d_j u_m) d_k u_m
///  - 2 alpha/(alpha+2) \int Delta phi |u|^{alpha+2}`,
///
/// by quadrature in `m`. The self-interaction of the zero mode of `u_m` is
/// dropped from the first term: it multiplies `\int Delta^2 phi = 0`.
/// Costs `d + 1` transforms per quadrature node.
pub fn virial_rate_balakrishnan(
    sp: &Spectral,
    u: &ComplexField,
    p: &ModelParams,
    w: Weight<'_>,
    quad: &BalakrishnanQuadrature,
) -> Result<f64> {
    u.check_grid(sp.grid())?;
    w.check_grid(sp.grid())?;
    u.ensure_finite()?;
    quad.check_invariant()?;
    if (quad.s - p.s).abs() > 0.0 {
        return Err(Error::Configuration(format!("quadrature built for s = {}, model has s = {}", quad.s, p.s)));
    }
    let grid = *sp.grid();
    let dim = grid.dim;
    let dv = grid.cell_volume();
    let mut hat = u.values.clone();
    sp.fft_forward(&mut hat);
    let cs = resolvent_normalization(p.s);
    let xi_sq = sp.xi_sq();
    let positions: Vec<[f64; 3]> = (0..grid.len()).map(|f| grid.position(f)).collect();
    let hess: Vec<[[f64; 3]; 3]> = positions
        .iter()
        .enumerate()
        .map(|(flat, x)| {
            let mut h = [[0.0; 3]; 3];
            for j in 0..dim {
                for k in 0..dim {
                    h[j][k] = w.hessian(flat, x, j, k);
                }
            }
            h
        })
        .collect();
    let needs_bilaplacian = !matches!(w, Weight::Full);

    let mut kinetic = 0.0;
    let mut resolvent_hat = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (&m, &wt) in quad.nodes.iter().zip(&quad.weights) {
        for ((o, z), q) in resolvent_hat.iter_mut().zip(&hat).zip(xi_sq) {
            *o = z * (cs / (q + m));
        }
        let grads: Vec<ComplexField> = (0..dim).map(|a| sp.gradient_component(&resolvent_hat, a)).collect();
        let mut inner = 0.0;
        for flat in 0..grid.len() {
            let h = &hess[flat];
            for j in 0..dim {
                let gj = grads[j].values[flat].conj();
                for k in 0..dim {
                    inner += 4.0 * h[j][k] * (gj * grads[k].values[flat]).re;
                }
            }
        }
        if needs_bilaplacian {
            let mean = resolvent_hat[0] / grid.len() as f64;
            let mut um = resolvent_hat.clone();
            sp.fft_inverse(&mut um);
            let self_term = mean.norm_sqr();
            for (flat, z) in um.iter().enumerate() {
                inner -= w.bilaplacian(flat) * (z.norm_sqr() - self_term);
            }
        }
        kinetic += wt * m.powf(p.s) * inner;
    }
    let potential: f64 = u
        .values
        .iter()
        .enumerate()
        .map(|(flat, z)| w.laplacian(flat, dim) * z.norm_sqr().powf(0.5 * (p.alpha + 2.0)))
        .sum();
    Ok(kinetic * dv - 2.0 * p.alpha / (p.alpha + 2.0) * potential * dv)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn gaussian(g: GridSpec, center: [f64; 3], k: [f64; 3], width: f64) -> ComplexField {
        ComplexField::from_fn(g, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..x.len() {
                r2 += (x[a] - center[a]).powi(2);
                phase += k[a] * x[a];
            }
            Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase)
        })
    }

    #[test]
    fn weight_profile_values() {
        let g = GridSpec::new(2, 256.0, 64).unwrap();
        let w = VirialWeight::build(g, 10.0).unwrap();
        assert_eq!(w.profile(3.0)[0], 9.0);
        let plateau = w.profile(100.0)[0];
        assert_eq!(w.profile(200.0)[0], plateau);
        assert!(plateau > 100.0);
        assert!(w.d2.iter().fold(f64::MIN, |a, &b| a.max(b)) <= 2.0 + 1e-12);
        assert!(matches!(VirialWeight::build(g, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn weight_constraints_hold_for_all_radii() {
        for (dim, n) in [(1usize, 1024usize), (2, 128), (3, 32)] {
            let g = GridSpec::new(dim, 250.0, n).unwrap();
            for r in [2.0, 5.0, 10.0, 20.0] {
                let w = VirialWeight::build(g, r).unwrap();
                w.check_constraints().unwrap();
                let d = dim as f64;
                assert!(w.laplacian.iter().all(|&l| 2.0 * d - l >= -1e-12));
            }
        }
    }

    #[test]
    fn profile_is_four_times_continuously_differentiable() {
        let unit = UnitProfile::new();
        for join in [1.0, 10.0] {
            let below = unit.eval(join - 1e-9);
            let above = unit.eval(join + 1e-9);
            for k in 0..5 {
                assert!((below[k] - above[k]).abs() < 1e-6 * (1.0 + below[k].abs()), "{join} {k}");
            }
        }
        // derivatives against central differences of the next lower one
        let h = 1e-5;
        for r in [1.5, 3.0, 5.5, 9.2] {
            let (lo, mid, hi) = (unit.eval(r - h), unit.eval(r), unit.eval(r + h));
            for k in 0..4 {
                assert_relative_eq!((hi[k] - lo[k]) / (2.0 * h), mid[k + 1], epsilon = 1e-5, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn bilaplacian_matches_spectral_evaluation() {
        // phi_R is smooth and constant near the box edge, so spectral derivatives apply
        for (dim, n) in [(1usize, 512usize), (2, 256), (3, 128)] {
            let g = GridSpec::new(dim, 32.0, n).unwrap();
            let sp = Spectral::new(g);
            let w = VirialWeight::build(g, 3.0).unwrap();
            let phi = ComplexField::from_values(g, w.phi.iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap();
            let lap = sp.fractional_laplacian(&phi, 1.0).unwrap();
            let bilap = sp.fractional_laplacian(&lap, 1.0).unwrap();
            let e1 = (0..g.len()).map(|f| (-lap.values[f].re - w.laplacian[f]).abs()).fold(0.0, f64::max);
            let e2 = (0..g.len()).map(|f| (bilap.values[f].re - w.bilaplacian[f]).abs()).fold(0.0, f64::max);
            // the fifth derivative jumps at r = 10R, so the spectral fourth derivative is only O(h) there
            assert!(e1 < 1e-4 && e2 < 0.02 * g.spacing(), "{dim}: {e1} {e2}");
        }
    }

    #[test]
    fn virial_action_closed_forms() {
        let g = GridSpec::new(2, 16.0, 128).unwrap();
        let sp = Spectral::new(g);
        let real = gaussian(g, [0.5, -0.3, 0.0], [0.0; 3], 1.0);
        let real = ComplexField::from_values(g, real.values.iter().map(|z| Complex64::new(z.re, 0.0)).collect()).unwrap();
        assert!(virial_action(&sp, &real, Weight::Full).unwrap().abs() < 1e-12);

        let centered = gaussian(g, [0.0; 3], [1.5, -0.5, 0.0], 1.0);
        assert!(virial_action(&sp, &centered, Weight::Full).unwrap().abs() < 1e-10);

        // 4 (k . x0) |g|^2 with |g|^2 = pi for a unit Gaussian in 2D
        let (k, x0) = ([1.5, -0.5, 0.0], [1.0, 2.0, 0.0]);
        let shifted = gaussian(g, x0, k, 1.0);
        let expected = 4.0 * (k[0] * x0[0] + k[1] * x0[1]) * std::f64::consts::PI;
        assert_relative_eq!(virial_action(&sp, &shifted, Weight::Full).unwrap(), expected, max_relative = 1e-10);
    }

    #[test]
    fn truncated_weight_agrees_inside_its_core() {
        let g = GridSpec::new(2, 64.0, 256).unwrap();
        let sp = Spectral::new(g);
        let w = VirialWeight::build(g, 6.0).unwrap();
        let u = gaussian(g, [0.5, 0.2, 0.0], [1.0, 0.3, 0.0], 0.7);
        let full = virial_action(&sp, &u, Weight::Full).unwrap();
        let local = virial_action(&sp, &u, Weight::Truncated(&w)).unwrap();
        assert!((full - local).abs() < 1e-10 * full.abs());
        let other = VirialWeight::build(GridSpec::new(2, 64.0, 128).unwrap(), 6.0).unwrap();
        assert!(virial_action(&sp, &u, Weight::Truncated(&other)).is_err());
    }

    #[test]
    fn quadrature_reproduces_kernel_integral() {
        for s in [0.3, 0.5, 0.8] {
            let q = BalakrishnanQuadrature::new(s, 0.25, 4.0, 0.5).unwrap();
            assert!(q.invariant_defect() < 1e-8, "{s}: {}", q.invariant_defect());
            q.check_invariant().unwrap();
        }
        let half = BalakrishnanQuadrature::new(0.5, 1.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(half.kernel_integral(1.0), 0.5, max_relative = 1e-12);
        // a coarse step misses the invariant
        let coarse = BalakrishnanQuadrature::new(0.5, 0.25, 4.0, 4.0).unwrap();
        assert!(matches!(coarse.check_invariant(), Err(Error::Configuration(_))));
        assert!(BalakrishnanQuadrature::new(1.0, 0.25, 4.0, 0.5).is_err());
    }

    #[test]
    fn balakrishnan_field_cases() {
        let g = GridSpec::new(1, 8.0, 64).unwrap();
        let sp = Spectral::new(g);
        let k = 3.0 * g.frequency_spacing();
        let wave = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k * x[0]));
        let um = balakrishnan_field(&sp, &wave, 2.0, 0.5).unwrap();
        let factor = resolvent_normalization(0.5) / (k * k + 2.0);
        assert!(um.max_abs_diff(&wave.scaled(factor)) < 1e-13);
        assert!(balakrishnan_field(&sp, &ComplexField::zeros(g), 1.0, 0.5).unwrap().is_zero());
        assert!(matches!(balakrishnan_field(&sp, &wave, 0.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn resolvent_kinetic_identity_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = GridSpec::new(1, 20.0, 256).unwrap();
        let sp = Spectral::new(g);
        for s in [0.3, 0.5, 0.8] {
            let quad = BalakrishnanQuadrature::for_grid(s, &g).unwrap();
            for _ in 0..3 {
                let c: f64 = rng.gen_range(-3.0..3.0);
                let k: f64 = rng.gen_range(-2.0..2.0);
                let u = gaussian(g, [c, 0.0, 0.0], [k, 0.0, 0.0], rng.gen_range(0.5..2.0));
                let hs = sp.hs_seminorm_sq(&u, s).unwrap();
                let u = u.scaled(hs.powf(-0.5));
                assert_relative_eq!(resolvent_kinetic(&sp, &u, &quad).unwrap(), s, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn full_weight_rate_is_eight_times_virial_functional() {
        let g = GridSpec::new(2, 16.0, 128).unwrap();
        let sp = Spectral::new(g);
        let p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        let quad = BalakrishnanQuadrature::for_grid(p.s, &g).unwrap();
        let u = gaussian(g, [0.3, -0.2, 0.0], [0.5, 0.0, 0.0], 1.0).scaled(2.0);
        let rate = virial_rate_balakrishnan(&sp, &u, &p, Weight::Full, &quad).unwrap();
        let r = crate::functionals::evaluate(&sp, &u, &p).unwrap();
        assert_relative_eq!(rate, 8.0 * r.virial, max_relative = 1e-8);

        let wrong = BalakrishnanQuadrature::for_grid(0.5, &g).unwrap();
        assert!(matches!(
            virial_rate_balakrishnan(&sp, &u, &p, Weight::Full, &wrong),
            Err(Error::Configuration(_))
        ));
    }
}
