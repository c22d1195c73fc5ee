//! Strang-split time stepping for `i u_t - (-Delta)^s u = -|u|^alpha u`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::FunctionalReport;
use crate::params::ModelParams;
use crate::spectral::{ComplexField, Spectral};
use crate::virial::{virial_action_from_hat, VirialWeight, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub blowup_hs_factor: f64,
    pub blowup_linf: f64,
    pub cfl_const: f64,
    pub diag_stride: usize,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_stride: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            dt_min: 1e-9,
            t_max: 1.0,
            blowup_hs_factor: 100.0,
            blowup_linf: 1e6,
            cfl_const: 0.1,
            diag_stride: 10,
            snapshot_stride: 0,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt0", self.dt0),
            ("dt_min", self.dt_min),
            ("t_max", self.t_max),
            ("blowup_hs_factor", self.blowup_hs_factor),
            ("blowup_linf", self.blowup_linf),
            ("cfl_const", self.cfl_const),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite (got {v})")));
            }
        }
        if self.dt_min >= self.dt0 {
            return Err(Error::Domain(format!("dt_min = {} must be below dt0 = {}", self.dt_min, self.dt0)));
        }
        if self.diag_stride == 0 {
            return Err(Error::Domain("diag_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the diagnostics log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    pub hs_seminorm_sq: f64,
    pub linf: f64,
    #[serde(rename = "I")]
    pub virial: f64,
    #[serde(rename = "K_omega")]
    pub k_omega: f64,
    #[serde(rename = "S_omega")]
    pub s_omega: f64,
    #[serde(rename = "M_phiR")]
    pub m_phi_r: f64,
    #[serde(rename = "M_full")]
    pub m_full: f64,
}

impl DiagnosticsRow {
    pub const HEADER: &'static str = "t,dt,mass,energy,hs_seminorm_sq,linf,I,K_omega,S_omega,M_phiR,M_full";

    pub fn values(&self) -> [f64; 11] {
        [
            self.t,
            self.dt,
            self.mass,
            self.energy,
            self.hs_seminorm_sq,
            self.linf,
            self.virial,
            self.k_omega,
            self.s_omega,
            self.m_phi_r,
            self.m_full,
        ]
    }

    /// Inverse of [`DiagnosticsRow::values`].
    pub fn from_values(v: &[f64]) -> Result<Self> {
        if v.len() != 11 {
            return Err(Error::SizeMismatch { expected: 11, found: v.len() });
        }
        Ok(Self {
            t: v[0],
            dt: v[1],
            mass: v[2],
            energy: v[3],
            hs_seminorm_sq: v[4],
            linf: v[5],
            virial: v[6],
            k_omega: v[7],
            s_omega: v[8],
            m_phi_r: v[9],
            m_full: v[10],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowupDetected,
    Diverged,
    Aborted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupTrigger {
    HsGrowth,
    SupNorm,
    StepFloor,
}

/// Whether the grid still resolved the solution when growth was flagged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Certified,
    UnderResolved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub t_end: f64,
    pub steps: usize,
    pub final_diagnostics: Option<DiagnosticsRow>,
    pub blowup_time_estimate: Option<f64>,
    pub trigger: Option<BlowupTrigger>,
    pub certification: Option<Certification>,
    /// Spectral mass fraction outside the inner two thirds of frequencies at the end.
    pub spectral_tail: f64,
}

/// Receives diagnostics rows and snapshots in order.
pub trait RunObserver {
    fn on_row(&mut self, _row: &DiagnosticsRow) -> Result<()> {
        Ok(())
    }

    fn on_snapshot(&mut self, _step: usize, _t: f64, _u: &ComplexField) -> Result<()> {
        Ok(())
    }

    /// Polled after every step; `true` ends the run as aborted.
    fn should_stop(&self) -> bool {
        false
    }
}

impl RunObserver for Vec<DiagnosticsRow> {
    fn on_row(&mut self, row: &DiagnosticsRow) -> Result<()> {
        self.push(*row);
        Ok(())
    }
}

/// Discards everything.
pub struct NullObserver;

impl RunObserver for NullObserver {}

/// Reusable Strang stepper; caches the linear propagator for the last step size.
pub struct Stepper<'a> {
    sp: &'a Spectral,
    p: ModelParams,
    symbol: Vec<f64>,
    cached_dt: f64,
    propagator: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    pub fn new(sp: &'a Spectral, p: &ModelParams) -> Self {
        Self {
            sp,
            p: *p,
            symbol: sp.fractional_symbol(p.s),
            cached_dt: f64::NAN,
            propagator: Vec::new(),
        }
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Exact nonlinear flow `u -> u exp(i |u|^alpha tau)`.
    fn nonlinear(&self, u: &mut [Complex64], tau: f64) {
        let alpha = self.p.alpha;
        for z in u.iter_mut() {
            let a2 = z.norm_sqr();
            let amp = if alpha == 2.0 {
                a2
            } else if alpha == 1.0 {
                a2.sqrt()
            } else {
                a2.powf(0.5 * alpha)
            };
            let (sn, cs) = (amp * tau).sin_cos();
            *z *= Complex64::new(cs, sn);
        }
    }

    /// Exact linear flow over `dt`.
    fn linear(&mut self, u: &mut [Complex64], dt: f64) {
        if dt != self.cached_dt {
            let scale = 1.0 / self.sp.grid().len() as f64;
            self.propagator = self.symbol.iter().map(|k| Complex64::from_polar(scale, -k * dt)).collect();
            self.cached_dt = dt;
        }
        self.sp.fft_forward(u);
        for (z, e) in u.iter_mut().zip(&self.propagator) {
            *z *= e;
        }
        // normalization is folded into the propagator
        self.sp.fft_inverse_unnormalized(u);
    }

    /// `N(dt/2) L(dt) N(dt/2)` in place. A negative `dt` runs the exact inverse step.
    pub fn step(&mut self, u: &mut ComplexField, dt: f64) -> Result<()> {
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be nonzero and finite (got {dt})")));
        }
        u.check_grid(self.sp.grid())?;
        self.nonlinear(&mut u.values, 0.5 * dt);
        self.linear(&mut u.values, dt);
        self.nonlinear(&mut u.values, 0.5 * dt);
        if !u.is_finite() {
            return Err(Error::Diverged);
        }
        Ok(())
    }

    /// All logged quantities of `u` at time `t`.
    pub fn diagnostics(&self, u: &ComplexField, t: f64, dt: f64, weight: Option<&VirialWeight>) -> Result<DiagnosticsRow> {
        let sp = self.sp;
        let p = &self.p;
        let grid = sp.grid();
        let mut hat = u.values.clone();
        sp.fft_forward(&mut hat);
        let spectral_weight = grid.cell_volume() / grid.len() as f64;
        let hs = hat.iter().zip(&self.symbol).map(|(z, k)| k * z.norm_sqr()).sum::<f64>() * spectral_weight;
        let mass = sp.mass(u);
        let lp = sp.lp_pow(u, p.alpha + 2.0);
        let r = FunctionalReport::from_parts(mass, hs, lp, p);
        let m_full = virial_action_from_hat(sp, u, &hat, Weight::Full)?;
        let m_phi_r = match weight {
            Some(w) => virial_action_from_hat(sp, u, &hat, Weight::Truncated(w))?,
            None => f64::NAN,
        };
        Ok(DiagnosticsRow {
            t,
            dt,
            mass,
            energy: r.energy,
            hs_seminorm_sq: hs,
            linf: u.sup_norm(),
            virial: r.virial,
            k_omega: r.k_omega,
            s_omega: r.s_omega,
            m_phi_r,
            m_full,
        })
    }
}

/// One Strang step of size `dt`.
pub fn step(sp: &Spectral, u: &ComplexField, p: &ModelParams, dt: f64) -> Result<ComplexField> {
    let mut out = u.clone();
    Stepper::new(sp, p).step(&mut out, dt)?;
    Ok(out)
}

/// `cfl_const / (1 + sup|u|^alpha)` before clamping.
pub fn raw_dt(u: &ComplexField, p: &ModelParams, cfg: &EvolveConfig) -> f64 {
    raw_dt_for_sup(u.sup_norm(), p, cfg)
}

fn raw_dt_for_sup(sup: f64, p: &ModelParams, cfg: &EvolveConfig) -> f64 {
    cfg.cfl_const / (1.0 + sup.powf(p.alpha))
}

/// `clamp(cfl_const / (1 + sup|u|^alpha), dt_min, dt0)`.
pub fn adapt_dt(u: &ComplexField, p: &ModelParams, cfg: &EvolveConfig) -> f64 {
    raw_dt(u, p, cfg).clamp(cfg.dt_min, cfg.dt0)
}

/// Integrates from `u0` until `t_max` or a blow-up trigger.
///
/// Returns the outcome together with the final state; on divergence the
/// state is the last finite one.
pub fn evolve(
    sp: &Spectral,
    u0: &ComplexField,
    p: &ModelParams,
    cfg: &EvolveConfig,
    weight: Option<&VirialWeight>,
    observer: &mut dyn RunObserver,
) -> Result<(RunOutcome, ComplexField)> {
    cfg.validate()?;
    u0.check_grid(sp.grid())?;
    u0.ensure_finite()?;
    let mut stepper = Stepper::new(sp, p);
    let mut u = u0.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut last_dt = adapt_dt(&u, p, cfg);
    let first = stepper.diagnostics(&u, t, last_dt, weight)?;
    observer.on_row(&first)?;
    let hs0 = first.hs_seminorm_sq;
    let mut last_row = first;
    let mut trigger = None;
    let mut status = RunStatus::Completed;
    // rounding guard so that t_max itself is reached rather than overshot
    let t_eps = 1e-12 * cfg.t_max;
    // N leaves |u| unchanged, so the trailing half-step of one step and the
    // leading half-step of the next are applied together; `pending` is the
    // nonlinear time still owed to `u`.
    let mut pending = 0.0;
    let mut sup = u.sup_norm();
    let mut backup = u.clone();

    while t < cfg.t_max - t_eps {
        let raw = raw_dt_for_sup(sup, p, cfg);
        if raw < cfg.dt_min {
            trigger = Some(BlowupTrigger::StepFloor);
            break;
        }
        let dt = raw.min(cfg.dt0).min(cfg.t_max - t);
        backup.values.copy_from_slice(&u.values);
        stepper.nonlinear(&mut u.values, pending + 0.5 * dt);
        stepper.linear(&mut u.values, dt);
        let next_sup = u.values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt();
        if !next_sup.is_finite() {
            // roll back to the last finite state
            std::mem::swap(&mut u, &mut backup);
            status = RunStatus::Diverged;
            break;
        }
        pending = 0.5 * dt;
        sup = next_sup;
        t += dt;
        steps += 1;
        last_dt = dt;
        let row_due = steps % cfg.diag_stride == 0 || t >= cfg.t_max - t_eps;
        let snapshot_due = cfg.snapshot_stride > 0 && steps % cfg.snapshot_stride == 0;
        let sup_tripped = sup >= cfg.blowup_linf;
        if row_due || snapshot_due || sup_tripped {
            stepper.nonlinear(&mut u.values, pending);
            pending = 0.0;
        }
        if snapshot_due {
            observer.on_snapshot(steps, t, &u)?;
        }
        if sup_tripped {
            trigger = Some(BlowupTrigger::SupNorm);
            break;
        }
        if row_due {
            let row = stepper.diagnostics(&u, t, dt, weight)?;
            observer.on_row(&row)?;
            last_row = row;
            if row.hs_seminorm_sq >= cfg.blowup_hs_factor * hs0 {
                trigger = Some(BlowupTrigger::HsGrowth);
                break;
            }
        }
        if observer.should_stop() {
            status = RunStatus::Aborted;
            break;
        }
    }
    if pending != 0.0 {
        stepper.nonlinear(&mut u.values, pending);
    }

    let spectral_tail = sp.spectral_tail_fraction(&u);
    let mut certification = None;
    if let Some(tr) = trigger {
        status = RunStatus::BlowupDetected;
        if tr != BlowupTrigger::HsGrowth {
            // record the state that tripped the detector
            let row = stepper.diagnostics(&u, t, last_dt, weight)?;
            if row.t > last_row.t {
                observer.on_row(&row)?;
            }
            last_row = row;
        }
        certification = Some(if spectral_tail > 0.01 {
            Certification::UnderResolved
        } else {
            Certification::Certified
        });
        log::info!("blow-up detected at t = {t} ({tr:?}), spectral tail {spectral_tail:.2e}");
    }
    let outcome = RunOutcome {
        status,
        t_end: t,
        steps,
        final_diagnostics: Some(last_row),
        blowup_time_estimate: trigger.map(|_| t),
        trigger,
        certification,
        spectral_tail,
    };
    Ok((outcome, u))
}
