//! Scalar functionals of a field and the scaling maps that act on them.
//!
//! Everything here is derived from three numbers per field, the mass
//! `\int |v|^2`, the seminorm `\int |xi|^{2s} |\hat v|^2` and the power
//! `\int |v|^{alpha+2}`, so identities between functionals hold to round-off
//! and the only discretization error lives in those three integrals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::spectral::{ComplexField, Norms, Spectral};

/// All functionals of one field. Serializes to a flat JSON object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub hs_seminorm_sq: f64,
    pub lp_alpha2_pow: f64,
    pub energy: f64,
    #[serde(rename = "S_omega")]
    pub s_omega: f64,
    #[serde(rename = "K_omega")]
    pub k_omega: f64,
    pub h_omega: f64,
    #[serde(rename = "I")]
    pub virial: f64,
    /// Weinstein functional; `None` for the zero field.
    #[serde(rename = "J")]
    pub weinstein: Option<f64>,
}

impl FunctionalReport {
    pub fn from_norms(n: &Norms, p: &ModelParams) -> Self {
        Self::from_parts(n.mass, n.hs_seminorm_sq, n.lp_alpha2_pow, p)
    }

    pub fn from_parts(mass: f64, hs: f64, lp: f64, p: &ModelParams) -> Self {
        let energy = 0.5 * hs - lp / (p.alpha + 2.0);
        let h_omega = hs + p.omega * mass;
        Self {
            mass,
            hs_seminorm_sq: hs,
            lp_alpha2_pow: lp,
            energy,
            s_omega: energy + 0.5 * p.omega * mass,
            k_omega: h_omega - lp,
            h_omega,
            virial: p.s * hs - p.virial_coefficient() * lp,
            weinstein: weinstein_from_parts(mass, hs, lp, p).ok(),
        }
    }

    /// Pohozaev residuals of the field this report describes.
    pub fn pohozaev(&self, p: &ModelParams) -> PohozaevResidual {
        let wm = p.omega * self.mass;
        PohozaevResidual {
            r1: (wm - p.pohozaev_c1() * self.hs_seminorm_sq).abs() / wm,
            r2: (wm - p.pohozaev_c2() * self.lp_alpha2_pow).abs() / wm,
        }
    }
}

/// Relative defects in `omega*mass = c1*|v|^2_{H^s} = c2*|v|^{alpha+2}_{L^{alpha+2}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResidual {
    pub r1: f64,
    pub r2: f64,
}

impl PohozaevResidual {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2)
    }
}

pub fn evaluate(sp: &Spectral, v: &ComplexField, p: &ModelParams) -> Result<FunctionalReport> {
    let n = sp.norms(v, p)?;
    Ok(FunctionalReport::from_norms(&n, p))
}

/// `J(v) = |v|^{d alpha/(2s)}_{H^s} |v|^{alpha+2-d alpha/(2s)}_{L^2} / |v|^{alpha+2}_{L^{alpha+2}}`.
pub fn weinstein(sp: &Spectral, v: &ComplexField, p: &ModelParams) -> Result<f64> {
    let n = sp.norms(v, p)?;
    weinstein_from_parts(n.mass, n.hs_seminorm_sq, n.lp_alpha2_pow, p)
}

pub fn weinstein_from_parts(mass: f64, hs: f64, lp: f64, p: &ModelParams) -> Result<f64> {
    if lp <= 0.0 {
        return Err(Error::Domain("Weinstein functional is undefined at v = 0".into()));
    }
    Ok(hs.powf(p.weinstein_kinetic_exponent()) * mass.powf(p.weinstein_mass_exponent()) / lp)
}

/// Sharp Gagliardo-Nirenberg constant from the mass of the `omega = 1` ground state `Q`.
pub fn sharp_gn_constant(p: &ModelParams, q_mass: f64) -> Result<f64> {
    if !(p.alpha > 0.0 && p.alpha < p.alpha_star()) {
        return Err(Error::Domain(format!(
            "sharp constant requires 0 < alpha < alpha* = {} (got alpha = {})",
            p.alpha_star(),
            p.alpha
        )));
    }
    if !(q_mass > 0.0) {
        return Err(Error::Domain(format!("ground-state mass must be positive (got {q_mass})")));
    }
    let d = p.d();
    let a = 2.0 * p.s * (p.alpha + 2.0);
    let b = d * p.alpha;
    Ok(((a - b) / b).powf(b / (4.0 * p.s)) * a / (a - b) * q_mass.powf(-p.alpha / 2.0))
}

/// `|v|^{alpha+2}_{L^{alpha+2}} / (C_opt |v|^{d alpha/(2s)}_{H^s} |v|^{...}_{L^2})`; at most 1.
pub fn gn_ratio(n: &Norms, p: &ModelParams, c_opt: f64) -> f64 {
    n.lp_alpha2_pow
        / (c_opt * n.hs_seminorm_sq.powf(p.weinstein_kinetic_exponent()) * n.mass.powf(p.weinstein_mass_exponent()))
}

/// `v(mu x)` by exact evaluation of the trigonometric interpolant of `v`.
///
/// Evaluating the interpolant on the dilated lattice is a chirp-z transform
/// of the spectrum along each axis, so the cost stays `O(N^d log N)`.
/// The field is taken to vanish outside the box: nodes with `mu |x_j| >= L`
/// on any axis are set to zero instead of reading a periodic image.
pub fn dilate(sp: &Spectral, v: &ComplexField, mu: f64) -> Result<ComplexField> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("dilation factor must be positive (got {mu})")));
    }
    let grid = *sp.grid();
    v.check_grid(&grid)?;
    if mu == 1.0 {
        return Ok(v.clone());
    }
    let mut data = v.values.clone();
    sp.fft_forward(&mut data);
    let czt = ChirpZ::new(grid.points, mu);
    let n = grid.points;
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let block = n * stride;
        for chunk in data.chunks_mut(block) {
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            for j in 0..n {
                for i in 0..stride {
                    lines[i * n + j] = chunk[j * stride + i];
                }
            }
            lines.par_chunks_mut(n).for_each(|line| czt.evaluate(line));
            for j in 0..n {
                for i in 0..stride {
                    chunk[j * stride + i] = lines[i * n + j];
                }
            }
        }
    }
    Ok(ComplexField { grid, values: data })
}

/// Bluestein evaluation of `out_j = (1/N) sum_k c_k e^{i xi_k (mu x_j + L)}`
/// for `k = -N/2..N/2` (the Nyquist coefficient split evenly between both ends).
///
/// With `a = pi mu / N` the phase is `pi k (1 - mu) + a (k^2 + j^2 - (j-k)^2)`,
/// which turns the sum into a linear convolution against the chirp `e^{-i a m^2}`.
struct ChirpZ {
    n: usize,
    mu: f64,
    size: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
    kernel_hat: Vec<Complex64>,
}

impl ChirpZ {
    fn new(n: usize, mu: f64) -> Self {
        let size = 4 * n;
        let mut planner = rustfft::FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let half = (n / 2) as i64;
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for m in -half..(3 * half) {
            let slot = if m >= 0 { m as usize } else { (size as i64 + m) as usize };
            kernel[slot] = Complex64::from_polar(1.0, -Self::chirp_phase(n, mu, m));
        }
        forward.process(&mut kernel);
        Self { n, mu, size, forward, inverse, kernel_hat: kernel }
    }

    /// `pi mu m^2 / N`.
    fn chirp_phase(n: usize, mu: f64, m: i64) -> f64 {
        let m2 = (m * m) as f64;
        PI * mu * m2 / n as f64
    }

    /// Replaces a line of unnormalized DFT data (FFT slot order) with interpolant values.
    fn evaluate(&self, line: &mut [Complex64]) {
        let n = self.n;
        let half = (n / 2) as i64;
        let mut work = vec![Complex64::new(0.0, 0.0); self.size];
        for p in 0..=n {
            let k = p as i64 - half;
            let c = if k == -half || k == half {
                line[n / 2] * 0.5
            } else {
                line[k.rem_euclid(n as i64) as usize]
            };
            let phase = PI * k as f64 * (1.0 - self.mu) + Self::chirp_phase(n, self.mu, k);
            work[p] = c * Complex64::from_polar(1.0, phase);
        }
        self.forward.process(&mut work);
        for (w, k) in work.iter_mut().zip(&self.kernel_hat) {
            *w *= k;
        }
        self.inverse.process(&mut work);
        let scale = 1.0 / (self.size as f64 * n as f64);
        for (j, out) in line.iter_mut().enumerate() {
            // mu |x_j| >= L  <=>  mu |2j - N| >= N
            if self.mu * (2.0 * j as f64 - n as f64).abs() >= n as f64 {
                *out = Complex64::new(0.0, 0.0);
                continue;
            }
            let phase = Self::chirp_phase(n, self.mu, j as i64);
            *out = work[j + n / 2] * Complex64::from_polar(scale, phase);
        }
    }
}

/// `v^lambda(x) = lambda^{d/2} v(lambda x)`: mass-preserving dilation.
pub fn scale_field(sp: &Spectral, v: &ComplexField, lambda: f64) -> Result<ComplexField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("scaling parameter lambda must be positive (got {lambda})")));
    }
    let out = dilate(sp, v, lambda)?.scaled(lambda.powf(sp.grid().dim as f64 / 2.0));
    out.warn_if_truncated("scale_field");
    Ok(out)
}

/// `phi_omega(x) = omega^{1/alpha} phi(omega^{1/(2s)} x)` for `phi` solving the `omega = 1` equation.
pub fn omega_scale(sp: &Spectral, phi: &ComplexField, p: &ModelParams, omega_new: f64) -> Result<ComplexField> {
    if !(omega_new > 0.0 && omega_new.is_finite()) {
        return Err(Error::Domain(format!("target frequency must be positive (got {omega_new})")));
    }
    if omega_new == 1.0 {
        return Ok(phi.clone());
    }
    let mu = omega_new.powf(1.0 / (2.0 * p.s));
    let out = dilate(sp, phi, mu)?.scaled(omega_new.powf(1.0 / p.alpha));
    out.warn_if_truncated("omega_scale");
    Ok(out)
}

/// Mass ratio `|phi_omega|^2 / |phi|^2 = omega^{2/alpha - d/(2s)}` of the map in [`omega_scale`].
pub fn omega_mass_factor(p: &ModelParams, omega: f64) -> f64 {
    omega.powf(2.0 / p.alpha - p.d() / (2.0 * p.s))
}

/// Amplitude factor `lambda0` with `K_omega(lambda0 v) = 0`.
pub fn nehari_lambda(n: &Norms, p: &ModelParams) -> Result<f64> {
    if n.lp_alpha2_pow <= 0.0 {
        return Err(Error::Domain("Nehari rescaling is undefined at v = 0".into()));
    }
    let h = n.hs_seminorm_sq + p.omega * n.mass;
    Ok((h / n.lp_alpha2_pow).powf(1.0 / p.alpha))
}

pub fn rescale_to_nehari(sp: &Spectral, v: &ComplexField, p: &ModelParams) -> Result<(f64, ComplexField)> {
    let n = sp.norms(v, p)?;
    let lambda = nehari_lambda(&n, p)?;
    Ok((lambda, v.scaled(lambda)))
}

/// Dilation factor `lambda0` with `I(v^{lambda0}) = 0` (mass-supercritical only).
pub fn virial_null_lambda(n: &Norms, p: &ModelParams) -> Result<f64> {
    if !p.is_mass_supercritical() {
        return Err(Error::Regime(format!(
            "virial rescaling requires d*alpha > 4s (got d*alpha = {}, 4s = {})",
            p.d() * p.alpha,
            4.0 * p.s
        )));
    }
    if n.lp_alpha2_pow <= 0.0 || n.hs_seminorm_sq <= 0.0 {
        return Err(Error::Domain("virial rescaling is undefined at v = 0".into()));
    }
    let c = p.d() * p.alpha / (2.0 * p.s * (p.alpha + 2.0));
    let ratio = n.hs_seminorm_sq / (c * n.lp_alpha2_pow);
    Ok(ratio.powf(2.0 / (p.d() * p.alpha - 4.0 * p.s)))
}

pub fn rescale_to_virial_null(sp: &Spectral, v: &ComplexField, p: &ModelParams) -> Result<(f64, ComplexField)> {
    let n = sp.norms(v, p)?;
    let lambda = virial_null_lambda(&n, p)?;
    Ok((lambda, scale_field(sp, v, lambda)?))
}

/// Membership in `{S_omega(v) < S_omega(phi_omega), I(v) < 0}` given `S_omega(phi_omega)`.
pub fn in_unstable_set(sp: &Spectral, v: &ComplexField, p: &ModelParams, s_ground: f64) -> Result<bool> {
    if v.is_zero() {
        return Ok(false);
    }
    let r = evaluate(sp, v, p)?;
    Ok(report_in_unstable_set(&r, s_ground))
}

pub fn report_in_unstable_set(r: &FunctionalReport, s_ground: f64) -> bool {
    r.mass > 0.0 && r.s_omega < s_ground && r.virial < 0.0
}

/// `S_omega(v^lambda)` from the norms of `v` via the exact scaling laws.
pub fn action_along_dilation(n: &Norms, p: &ModelParams, lambda: f64) -> f64 {
    0.5 * lambda.powf(2.0 * p.s) * n.hs_seminorm_sq + 0.5 * p.omega * n.mass
        - lambda.powf(p.d() * p.alpha / 2.0) * n.lp_alpha2_pow / (p.alpha + 2.0)
}

/// Benjamin-Ono soliton `2/(1+x^2)`, the exact ground state for `d = 1, s = 1/2, alpha = 1, omega = 1`.
pub fn benjamin_ono_soliton(x: f64) -> f64 {
    2.0 / (1.0 + x * x)
}

/// Exact values `(mass, |Q|^2_{H^{1/2}}, |Q|^3_{L^3}) = (2 pi, pi, 3 pi)` of the Benjamin-Ono soliton.
pub const BENJAMIN_ONO_NORMS: (f64, f64, f64) = (2.0 * PI, PI, 3.0 * PI);

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::spectral::GridSpec;

    fn bo_params() -> ModelParams {
        ModelParams::new(1, 0.5, 1.0, 1.0).unwrap()
    }

    fn norms(mass: f64, hs: f64, lp: f64, p: &ModelParams) -> Norms {
        Norms { mass, hs_seminorm_sq: hs, lebesgue_alpha2: lp.powf(1.0 / (p.alpha + 2.0)), lp_alpha2_pow: lp }
    }

    /// Sum of a few random Gaussians with random complex amplitudes.
    fn random_bumps(grid: GridSpec, rng: &mut ChaCha8Rng, spread: f64) -> ComplexField {
        let bumps: Vec<(Vec<f64>, f64, Complex64)> = (0..3)
            .map(|_| {
                let c = (0..grid.dim).map(|_| rng.gen_range(-spread..spread)).collect();
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

    #[test]
    fn zero_field_report() {
        let g = GridSpec::new(1, 8.0, 32).unwrap();
        let sp = Spectral::new(g);
        let p = bo_params();
        let r = evaluate(&sp, &ComplexField::zeros(g), &p).unwrap();
        assert_eq!(r.mass, 0.0);
        assert_eq!(r.energy, 0.0);
        assert_eq!(r.s_omega, 0.0);
        assert_eq!(r.k_omega, 0.0);
        assert_eq!(r.virial, 0.0);
        assert!(r.weinstein.is_none());
        assert!(weinstein(&sp, &ComplexField::zeros(g), &p).is_err());
    }

    #[test]
    fn benjamin_ono_functionals_from_closed_form() {
        let p = bo_params();
        let (m, hs, lp) = BENJAMIN_ONO_NORMS;
        let r = FunctionalReport::from_parts(m, hs, lp, &p);
        assert_relative_eq!(r.energy, -PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(r.s_omega, PI / 2.0, max_relative = 1e-14);
        assert!(r.k_omega.abs() < 1e-13);
        assert!(r.virial.abs() < 1e-13);
        assert_relative_eq!(r.weinstein.unwrap(), 2.0 * PI.sqrt() / 3.0, max_relative = 1e-14);
        let poh = r.pohozaev(&p);
        assert!(poh.max() < 1e-14);
    }

    #[test]
    fn benjamin_ono_functionals_on_grid() {
        let g = GridSpec::new(1, 1000.0, 1 << 15).unwrap();
        let sp = Spectral::new(g);
        let p = bo_params();
        let q = ComplexField::from_real_fn(g, |x| benjamin_ono_soliton(x[0]));
        let r = evaluate(&sp, &q, &p).unwrap();
        assert_relative_eq!(r.energy, -PI / 2.0, max_relative = 2e-5);
        assert_relative_eq!(r.s_omega, PI / 2.0, max_relative = 2e-5);
        assert!(r.k_omega.abs() < 1e-4);
        assert!(r.virial.abs() < 1e-4);
        assert_relative_eq!(r.weinstein.unwrap(), 2.0 * PI.sqrt() / 3.0, max_relative = 2e-5);
    }

    #[test]
    fn report_json_is_flat_with_exact_names() {
        let r = FunctionalReport::from_parts(2.0, 1.0, 3.0, &bo_params());
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["I", "J", "K_omega", "S_omega", "energy", "h_omega", "hs_seminorm_sq", "lp_alpha2_pow", "mass"]);
        assert!(v.as_object().unwrap().values().all(|x| x.is_number()));
    }

    #[test]
    fn report_invariants_hold() {
        let p = ModelParams::new(2, 0.8, 2.0, 1.7).unwrap();
        let r = FunctionalReport::from_parts(1.3, 2.1, 0.7, &p);
        assert_relative_eq!(r.s_omega, r.energy + 0.5 * p.omega * r.mass, max_relative = 1e-15);
        assert_relative_eq!(r.k_omega, r.h_omega - r.lp_alpha2_pow, max_relative = 1e-15);
        assert_relative_eq!(r.h_omega, r.hs_seminorm_sq + p.omega * r.mass, max_relative = 1e-15);
        assert_relative_eq!(r.virial, 0.8 * 2.1 - 0.5 * 0.7, max_relative = 1e-15);
    }

    #[test]
    fn sharp_constant_benjamin_ono() {
        let p = bo_params();
        let c = sharp_gn_constant(&p, 2.0 * PI).unwrap();
        assert_relative_eq!(c, 3.0 / (2.0 * PI.sqrt()), max_relative = 1e-14);
        assert!((c - 0.84628).abs() < 1e-5);
        // C_opt = 1/J(Q)
        assert_relative_eq!(c * 2.0 * PI.sqrt() / 3.0, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn sharp_constant_domain_errors() {
        let mut p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        assert!(sharp_gn_constant(&p, 0.0).is_err());
        p.alpha = 8.5; // bypass validation
        assert!(sharp_gn_constant(&p, 1.0).is_err());
    }

    #[test]
    fn gn_inequality_on_random_fields() {
        let g = GridSpec::new(1, 40.0, 1024).unwrap();
        let sp = Spectral::new(g);
        let p = bo_params();
        let c = sharp_gn_constant(&p, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let v = random_bumps(g, &mut rng, 6.0);
            let ratio = gn_ratio(&sp.norms(&v, &p).unwrap(), &p, c);
            assert!(ratio <= 1.0 + 1e-10, "{ratio}");
        }
    }

    #[test]
    fn scale_field_identity_and_errors() {
        let g = GridSpec::new(2, 8.0, 32).unwrap();
        let sp = Spectral::new(g);
        let v = ComplexField::from_real_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        assert_eq!(scale_field(&sp, &v, 1.0).unwrap(), v);
        assert!(scale_field(&sp, &v, 0.0).is_err());
        assert!(scale_field(&sp, &v, -1.0).is_err());
    }

    #[test]
    fn dilation_matches_analytic_gaussian() {
        let g = GridSpec::new(2, 10.0, 128).unwrap();
        let sp = Spectral::new(g);
        let f = |x: &[f64], mu: f64| (-(mu * mu) * ((x[0] - 0.5 / mu).powi(2) + 2.0 * x[1] * x[1]) / 2.0).exp();
        let v = ComplexField::from_real_fn(g, |x| f(x, 1.0));
        for mu in [0.7, 1.3, 1.9, 3.0] {
            let exact = ComplexField::from_real_fn(g, |x| f(x, mu));
            let got = dilate(&sp, &v, mu).unwrap();
            assert!(got.max_abs_diff(&exact) < 1e-10, "mu = {mu}: {}", got.max_abs_diff(&exact));
        }
    }

    #[test]
    fn scaling_laws() {
        // Modulated profile with negligible mean: the lattice sum of |xi|^{2s}|c|^2 has no
        // kink at xi = 0 to resolve, so the H^s law is visible to interpolation accuracy.
        let g = GridSpec::new(1, 160.0, 8192).unwrap();
        let sp = Spectral::new(g);
        let p = ModelParams::new(1, 0.5, 1.0, 1.0).unwrap();
        let v = ComplexField::from_fn(g, |x| Complex64::from_polar((-x[0] * x[0] / 2.0).exp(), 4.0 * x[0]));
        let n0 = sp.norms(&v, &p).unwrap();

        let v4 = scale_field(&sp, &v, 4.0).unwrap();
        let n4 = sp.norms(&v4, &p).unwrap();
        assert_relative_eq!(n4.hs_seminorm_sq.sqrt(), 2.0 * n0.hs_seminorm_sq.sqrt(), max_relative = 1e-8);

        let v2 = scale_field(&sp, &v, 2.0).unwrap();
        let n2 = sp.norms(&v2, &p).unwrap();
        assert_relative_eq!(n2.mass, n0.mass, max_relative = 1e-8);
        let expo = p.d() * p.alpha / (2.0 * (p.alpha + 2.0));
        assert_relative_eq!(n2.lebesgue_alpha2, 2f64.powf(expo) * n0.lebesgue_alpha2, max_relative = 1e-8);

        let vh = scale_field(&sp, &v, 0.5).unwrap();
        let nh = sp.norms(&vh, &p).unwrap();
        assert_relative_eq!(nh.mass, n0.mass, max_relative = 1e-8);
        assert_relative_eq!(nh.hs_seminorm_sq, 0.5 * n0.hs_seminorm_sq, max_relative = 1e-8);
    }

    #[test]
    fn nonzero_mean_fields_carry_the_box_error() {
        // For a Gaussian the H^{1/2} sum on the lattice misses the continuum value by
        // O((pi/L)^2); the scaling law is only met to that order.
        let g = GridSpec::new(1, 40.0, 2048).unwrap();
        let sp = Spectral::new(g);
        let v = ComplexField::from_real_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let h0 = sp.hs_seminorm_sq(&v, 0.5).unwrap();
        let h4 = sp.hs_seminorm_sq(&scale_field(&sp, &v, 4.0).unwrap(), 0.5).unwrap();
        let defect = (h4 / h0 / 4.0 - 1.0).abs();
        let dxi = g.frequency_spacing();
        assert!(defect > 1e-6 && defect < dxi * dxi, "{defect}");
    }

    #[test]
    fn omega_scaling_of_benjamin_ono() {
        let g = GridSpec::new(1, 400.0, 1 << 14).unwrap();
        let sp = Spectral::new(g);
        let p = bo_params();
        let q = ComplexField::from_real_fn(g, |x| benjamin_ono_soliton(x[0]));
        assert_eq!(omega_scale(&sp, &q, &p, 1.0).unwrap(), q);
        assert!(omega_scale(&sp, &q, &p, 0.0).is_err());

        let omega = 4.0;
        let q4 = omega_scale(&sp, &q, &p, omega).unwrap();
        let exact = ComplexField::from_real_fn(g, |x| 2.0 * omega / (1.0 + omega * omega * x[0] * x[0]));
        // nodes with 4|x| >= L fall outside the source box and are zeroed
        let inner = |f: &ComplexField| -> Vec<Complex64> {
            (0..g.points).filter(|&j| g.coordinate(j).abs() < 0.24 * g.half_length).map(|j| f.values[j]).collect()
        };
        let err = inner(&q4).iter().zip(inner(&exact)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9 * exact.sup_norm(), "{err}");

        let n1 = sp.norms(&q, &p).unwrap();
        let n4 = sp.norms(&q4, &p).unwrap();
        assert_relative_eq!(omega_mass_factor(&p, omega), 4.0, max_relative = 1e-15);
        assert_relative_eq!(n4.mass / n1.mass, 4.0, max_relative = 1e-6);
        // the algebraic tail keeps the H^{1/2} sums O((pi/L)^2) off the continuum
        let j1 = weinstein_from_parts(n1.mass, n1.hs_seminorm_sq, n1.lp_alpha2_pow, &p).unwrap();
        let j4 = weinstein_from_parts(n4.mass, n4.hs_seminorm_sq, n4.lp_alpha2_pow, &p).unwrap();
        assert_relative_eq!(j4, j1, max_relative = 1e-4);
    }

    #[test]
    fn omega_scaling_keeps_weinstein_on_decayed_fields() {
        let g = GridSpec::new(2, 24.0, 512).unwrap();
        let sp = Spectral::new(g);
        let p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        let v = ComplexField::from_real_fn(g, |x| x[0] * x[1] * (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let j1 = weinstein(&sp, &v, &p).unwrap();
        let m1 = sp.mass(&v);
        for omega in [0.5, 2.0, 4.0] {
            let w = omega_scale(&sp, &v, &p, omega).unwrap();
            assert_relative_eq!(weinstein(&sp, &w, &p).unwrap(), j1, max_relative = 1e-8);
            assert_relative_eq!(sp.mass(&w), omega_mass_factor(&p, omega) * m1, max_relative = 1e-10);
        }
    }

    #[test]
    fn weinstein_is_scale_and_amplitude_invariant() {
        let p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        let (m, hs, lp) = (1.3, 0.9, 2.2);
        let j = weinstein_from_parts(m, hs, lp, &p).unwrap();
        for (a, mu) in [(2.0f64, 1.0f64), (0.3, 1.7), (5.0, 0.4)] {
            // v -> a v(mu x): mass a^2 mu^-d, hs a^2 mu^{2s-d}, lp a^{alpha+2} mu^-d
            let m2 = a * a * mu.powi(-2) * m;
            let hs2 = a * a * mu.powf(1.6 - 2.0) * hs;
            let lp2 = a.powf(4.0) * mu.powi(-2) * lp;
            assert_relative_eq!(weinstein_from_parts(m2, hs2, lp2, &p).unwrap(), j, max_relative = 1e-13);
        }
    }

    #[test]
    fn nehari_rescaling() {
        let p = bo_params();
        let (m, hs, lp) = BENJAMIN_ONO_NORMS;
        // v = 2Q: H = 4(pi + 2 pi) = 12 pi, |v|^3 = 24 pi
        let lambda = nehari_lambda(&norms(4.0 * m, 4.0 * hs, 8.0 * lp, &p), &p).unwrap();
        assert_relative_eq!(lambda, 0.5, max_relative = 1e-14);
        assert_relative_eq!(nehari_lambda(&norms(m, hs, lp, &p), &p).unwrap(), 1.0, max_relative = 1e-14);

        let g = GridSpec::new(1, 30.0, 512).unwrap();
        let sp = Spectral::new(g);
        assert!(rescale_to_nehari(&sp, &ComplexField::zeros(g), &p).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v = random_bumps(g, &mut rng, 5.0);
            let (l0, w) = rescale_to_nehari(&sp, &v, &p).unwrap();
            assert!(l0 > 0.0);
            let r = evaluate(&sp, &w, &p).unwrap();
            assert!(r.k_omega.abs() <= 1e-12 * r.h_omega, "{}", r.k_omega);
        }
    }

    /// Independent oracle: bisection on a central-difference derivative of `lambda -> S(v^lambda)`.
    fn virial_root_oracle(n: &Norms, p: &ModelParams) -> f64 {
        let deriv = |l: f64| {
            let h = 1e-6 * l;
            (action_along_dilation(n, p, l + h) - action_along_dilation(n, p, l - h)) / (2.0 * h)
        };
        let (mut lo, mut hi) = (1e-3f64, 1e3f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if deriv(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn virial_null_rescaling_matches_root_oracle() {
        let p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        let n = norms(1.0, 1.0, 2.0, &p);
        let lambda = virial_null_lambda(&n, &p).unwrap();
        let oracle = virial_root_oracle(&n, &p);
        assert_relative_eq!(lambda, oracle, max_relative = 1e-7);
        assert_relative_eq!(lambda, 0.572433402, max_relative = 1e-8);
        assert_relative_eq!(lambda, 0.8f64.powf(2.5), max_relative = 1e-14);

        // already on {I = 0}
        let on = norms(1.0, 1.0, 0.8 / 0.5, &p);
        assert_relative_eq!(virial_null_lambda(&on, &p).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn virial_null_rescaling_on_fields() {
        let p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        let g = GridSpec::new(2, 16.0, 256).unwrap();
        let sp = Spectral::new(g);
        // modulated profile keeps the spectrum away from the origin, see `scaling_laws`
        let unit = ComplexField::from_fn(g, |x| {
            Complex64::from_polar((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 6.0 * x[0])
        });
        // amplitude chosen so that lambda0 = 0.87^{2.5}, about 0.7
        let n1 = sp.norms(&unit, &p).unwrap();
        let ratio1 = n1.hs_seminorm_sq / (0.625 * n1.lp_alpha2_pow);
        let v = unit.scaled((ratio1 / 0.87).sqrt());
        let r = evaluate(&sp, &v, &p).unwrap();
        assert!(r.virial < 0.0);
        let (l0, w) = rescale_to_virial_null(&sp, &v, &p).unwrap();
        assert!(l0 > 0.0 && l0 < 1.0);
        assert_relative_eq!(l0, 0.87f64.powf(2.5), max_relative = 1e-12);
        let rw = evaluate(&sp, &w, &p).unwrap();
        assert!(rw.virial.abs() < 1e-8 * rw.hs_seminorm_sq, "{}", rw.virial);

        let sub = ModelParams::new(2, 0.8, 1.0, 1.0).unwrap();
        assert!(matches!(rescale_to_virial_null(&sp, &v, &sub), Err(Error::Regime(_))));
        assert!(rescale_to_virial_null(&sp, &ComplexField::zeros(g), &p).is_err());
    }

    #[test]
    fn unstable_set_predicate() {
        let p = ModelParams::new(2, 0.8, 2.0, 1.0).unwrap();
        let below = FunctionalReport::from_parts(1.0, 1.0, 4.0, &p);
        assert!(below.virial < 0.0);
        assert!(report_in_unstable_set(&below, below.s_omega + 0.1));
        assert!(!report_in_unstable_set(&below, below.s_omega - 0.1));
        let positive = FunctionalReport::from_parts(1.0, 1.0, 0.1, &p);
        assert!(!report_in_unstable_set(&positive, positive.s_omega + 1.0));
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        assert!(!in_unstable_set(&Spectral::new(g), &ComplexField::zeros(g), &p, 1.0).unwrap());
    }

    #[test]
    fn h_omega_equivalence_bounds() {
        let g = GridSpec::new(1, 20.0, 256).unwrap();
        let sp = Spectral::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for omega in [0.1, 0.5, 1.0, 3.0, 20.0] {
            let p = ModelParams::new(1, 0.6, 1.0, omega).unwrap();
            for _ in 0..10 {
                let v = random_bumps(g, &mut rng, 4.0);
                let r = evaluate(&sp, &v, &p).unwrap();
                let hs_full = r.mass + r.hs_seminorm_sq;
                assert!(omega.min(1.0) * hs_full <= r.h_omega * (1.0 + 1e-14));
                assert!(r.h_omega <= omega.max(1.0) * hs_full * (1.0 + 1e-14));
            }
        }
    }
}
