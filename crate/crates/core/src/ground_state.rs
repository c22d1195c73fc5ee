//! Ground states of `(-Delta)^s phi + omega phi - |phi|^alpha phi = 0` by
//! Petviashvili iteration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{self, FunctionalReport, PohozaevResidual};
use crate::params::ModelParams;
use crate::spectral::{ComplexField, Spectral};

/// Centered Gaussian `A exp(-|x|^2 / (2 sigma^2))` used to start the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialGuess {
    pub amplitude: f64,
    pub width: f64,
}

impl InitialGuess {
    /// `A = 2 omega^{1/alpha}`, `sigma = omega^{-1/(2s)}`.
    pub fn for_params(p: &ModelParams) -> Self {
        Self {
            amplitude: 2.0 * p.omega.powf(1.0 / p.alpha),
            width: p.omega.powf(-1.0 / (2.0 * p.s)),
        }
    }

    fn field(&self, sp: &Spectral) -> ComplexField {
        let w2 = 2.0 * self.width * self.width;
        ComplexField::from_real_fn(*sp.grid(), |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            self.amplitude * (-r2 / w2).exp()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Tolerance on `|m_n - 1|`.
    pub factor_tol: f64,
    /// Tolerance on the relative equation residual.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Iterations without a tenfold drop of the best residual before giving up.
    pub stagnation_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            factor_tol: 1e-10,
            residual_tol: 1e-8,
            max_iter: 5000,
            stagnation_window: 400,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub field: ComplexField,
    pub params: ModelParams,
    pub iterations: usize,
    pub final_residual: f64,
    pub pohozaev: PohozaevResidual,
    pub s_omega_value: f64,
    pub report: FunctionalReport,
}

impl GroundStateResult {
    fn from_field(sp: &Spectral, field: ComplexField, p: &ModelParams, iterations: usize) -> Result<Self> {
        let final_residual = equation_residual(sp, &field, p)?;
        let report = functionals::evaluate(sp, &field, p)?;
        Ok(Self {
            field,
            params: *p,
            iterations,
            final_residual,
            pohozaev: report.pohozaev(p),
            s_omega_value: report.s_omega,
            report,
        })
    }

    /// Largest `|phi(x) - phi(-x)|` about the box center, relative to the peak.
    pub fn parity_defect(&self) -> f64 {
        let g = self.field.grid;
        let n = g.points;
        let mirror = |i: usize| if i == 0 { 0 } else { n - i };
        let mut worst = 0.0f64;
        for flat in 0..g.len() {
            let idx = g.unflatten(flat);
            let mut m = [0usize; 3];
            for a in 0..g.dim {
                m[a] = mirror(idx[a]);
            }
            let other = self.field.values[g.flatten(&m[..g.dim])];
            worst = worst.max((self.field.values[flat] - other).norm());
        }
        worst / self.field.sup_norm()
    }
}

/// `sup|(-Delta)^s phi + omega phi - |phi|^alpha phi| / sup|phi|^{alpha+1}`.
pub fn equation_residual(sp: &Spectral, phi: &ComplexField, p: &ModelParams) -> Result<f64> {
    let lap = sp.fractional_laplacian(phi, p.s)?;
    let mut worst = 0.0f64;
    for (l, v) in lap.values.iter().zip(&phi.values) {
        let r = l + v * p.omega - v * v.norm().powf(p.alpha);
        worst = worst.max(r.norm());
    }
    let scale = phi.sup_norm().powf(p.alpha + 1.0);
    if !(scale > 0.0) {
        return Err(Error::Domain("equation residual is undefined at phi = 0".into()));
    }
    Ok(worst / scale)
}

/// Petviashvili iteration
/// `u <- m^gamma ((-Delta)^s + omega)^{-1} (|u|^alpha u)`, `gamma = (alpha+1)/alpha`,
/// with `m = <((-Delta)^s + omega) u, u> / <|u|^alpha u, u>`.
pub fn solve(sp: &Spectral, p: &ModelParams, guess: InitialGuess, opts: &SolverOptions) -> Result<GroundStateResult> {
    p.validate()?;
    if !(guess.amplitude > 0.0 && guess.width > 0.0) {
        return Err(Error::Domain("initial guess needs positive amplitude and width".into()));
    }
    let grid = *sp.grid();
    let symbol: Vec<f64> = sp.fractional_symbol(p.s).iter().map(|k| k + p.omega).collect();
    let gamma = (p.alpha + 1.0) / p.alpha;

    let mut u = guess.field(sp);
    let mut u_hat = u.values.clone();
    sp.fft_forward(&mut u_hat);
    let mut nl = vec![Complex64::new(0.0, 0.0); grid.len()];

    let mut res = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut best = f64::INFINITY;
    let mut best_at = 0usize;
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        for (o, v) in nl.iter_mut().zip(&u.values) {
            *o = Complex64::new(power_nonlinearity(v.re, p.alpha), 0.0);
        }
        sp.fft_forward(&mut nl);
        let mut num = 0.0;
        let mut den = 0.0;
        for ((uh, nh), k) in u_hat.iter().zip(&nl).zip(&symbol) {
            num += k * uh.norm_sqr();
            den += (nh * uh.conj()).re;
        }
        if !(num.is_finite() && den.is_finite()) {
            return Err(Error::Diverged);
        }
        if den <= 0.0 {
            return Err(Error::NonConvergence { iterations: iter, residual });
        }
        let m = num / den;

        // near the fixed point, measure the equation residual of the current iterate
        if (m - 1.0).abs() <= opts.factor_tol.max(1e-6) {
            for ((r, uh), (nh, k)) in res.iter_mut().zip(&u_hat).zip(nl.iter().zip(&symbol)) {
                *r = uh * k - nh;
            }
            sp.fft_inverse(&mut res);
            let worst = res.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt();
            residual = worst / u.sup_norm().powf(p.alpha + 1.0);
            if (m - 1.0).abs() <= opts.factor_tol && residual <= opts.residual_tol {
                let field = normalize_gauge(u);
                log::debug!("petviashvili converged in {iter} iterations, residual {residual:.3e}");
                return GroundStateResult::from_field(sp, field, p, iter);
            }
        } else {
            residual = (m - 1.0).abs();
        }
        if residual < 0.1 * best {
            best = residual;
            best_at = iter;
        } else if iter - best_at > opts.stagnation_window {
            log::warn!("petviashvili stagnated at residual {residual:.3e}");
            return Err(Error::NonConvergence { iterations: iter, residual });
        }

        let factor = m.powf(gamma);
        for ((uh, nh), k) in u_hat.iter_mut().zip(&nl).zip(&symbol) {
            *uh = nh * (factor / k);
        }
        u.values.copy_from_slice(&u_hat);
        sp.fft_inverse(&mut u.values);
        for v in u.values.iter_mut() {
            v.im = 0.0;
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual })
}

/// `|x|^alpha x` with the common integer powers spelled out.
fn power_nonlinearity(x: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        x * x.abs()
    } else if alpha == 2.0 {
        x * x * x
    } else {
        x * x.abs().powf(alpha)
    }
}

pub fn solve_default(sp: &Spectral, p: &ModelParams) -> Result<GroundStateResult> {
    solve(sp, p, InitialGuess::for_params(p), &SolverOptions::default())
}

fn normalize_gauge(mut u: ComplexField) -> ComplexField {
    let peak = u.values.iter().map(|v| v.re).fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    if peak < 0.0 {
        for v in u.values.iter_mut() {
            v.re = -v.re;
        }
    }
    u
}

/// `phi_omega` from the `omega = 1` ground state by the exact scaling map.
pub fn solve_via_omega_scaling(sp: &Spectral, p: &ModelParams, base: &GroundStateResult) -> Result<GroundStateResult> {
    let b = &base.params;
    if b.dim != p.dim || b.s != p.s || b.alpha != p.alpha {
        return Err(Error::Domain(format!(
            "base ground state has (d, s, alpha) = ({}, {}, {}), requested ({}, {}, {})",
            b.dim, b.s, b.alpha, p.dim, p.s, p.alpha
        )));
    }
    if b.omega != 1.0 {
        return Err(Error::Domain(format!("base ground state must have omega = 1 (got {})", b.omega)));
    }
    base.field.check_grid(sp.grid())?;
    let field = functionals::omega_scale(sp, &base.field, p, p.omega)?;
    GroundStateResult::from_field(sp, field, p, 0)
}

/// `phi_omega^lambda(x) = lambda^{d/2} phi_omega(lambda x)`.
pub fn scaled_initial_data(sp: &Spectral, gs: &GroundStateResult, lambda: f64) -> Result<ComplexField> {
    functionals::scale_field(sp, &gs.field, lambda)
}
