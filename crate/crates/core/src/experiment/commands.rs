//! Experiment drivers behind the command-line subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, RunOutcome, Stepper};
use crate::functionals::{self, FunctionalReport, PohozaevResidual};
use crate::ground_state::{scaled_initial_data, solve_default, GroundStateResult};
use crate::params::ModelParams;
use crate::sampling::{gaussian_packet, random_bumps};
use crate::spectral::{ComplexField, GridSpec, Spectral};
use crate::virial::{resolvent_kinetic, virial_rate_fd, BalakrishnanQuadrature, VirialWeight, Weight};

use super::config::ExperimentConfig;
use super::io::{write_snapshot, CsvRecorder};

/// Seed of every random draw made by the drivers.
pub const SAMPLING_SEED: u64 = 20_240_917;

pub fn spectral_for(cfg: &ExperimentConfig) -> Spectral {
    let sp = Spectral::new(cfg.grid);
    if cfg.deterministic {
        sp.serial()
    } else {
        sp
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// JSON sidecar written next to a ground-state snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub iterations: usize,
    pub final_residual: f64,
    pub pohozaev: PohozaevResidual,
    pub functionals: FunctionalReport,
    pub parity_defect: f64,
    pub boundary_ratio: f64,
}

impl GroundStateSummary {
    pub fn new(gs: &GroundStateResult) -> Self {
        Self {
            params: gs.params,
            grid: gs.field.grid,
            iterations: gs.iterations,
            final_residual: gs.final_residual,
            pohozaev: gs.pohozaev,
            functionals: gs.report,
            parity_defect: gs.parity_defect(),
            boundary_ratio: gs.field.boundary_ratio(),
        }
    }
}

pub fn cmd_ground_state(cfg: &ExperimentConfig) -> Result<GroundStateResult> {
    let sp = spectral_for(cfg);
    let gs = solve_default(&sp, &cfg.params)?;
    gs.field.warn_if_truncated("ground state");
    write_snapshot(&cfg.output_dir, "ground_state", &gs.field, &cfg.params, 0.0)?;
    write_json(&cfg.output_dir.join("ground_state_summary.json"), &GroundStateSummary::new(&gs))?;
    Ok(gs)
}

/// Final record of an evolution or instability run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: ModelParams,
    pub grid: GridSpec,
    pub lambda0: f64,
    pub ground_state_action: f64,
    pub initial: FunctionalReport,
    pub in_unstable_set: bool,
    pub outcome: RunOutcome,
}

/// Tolerance below which `I` counts as zero: the ground state's own virial
/// defect on this grid plus a relative floor.
pub fn virial_zero_tolerance(gs: &GroundStateResult) -> f64 {
    gs.report.virial.abs() + 1e-8 * gs.report.hs_seminorm_sq
}

/// Sign of `I` with the tolerance of [`virial_zero_tolerance`].
pub fn virial_sign(virial: f64, tol: f64) -> i32 {
    if virial > tol {
        1
    } else if virial < -tol {
        -1
    } else {
        0
    }
}

/// Membership of `u0` in the unstable set with the grid's zero tolerance on `I`.
pub fn unstable_set_check(gs: &GroundStateResult, r: &FunctionalReport) -> std::result::Result<(), String> {
    let tol = virial_zero_tolerance(gs);
    let s_tol = 1e-12 * gs.s_omega_value.abs();
    match virial_sign(r.virial, tol) {
        1 => return Err(format!("I(u0) = {} > 0", r.virial)),
        0 => return Err(format!("I(u0) = {} is zero within tolerance {tol:.3e}", r.virial)),
        _ => {}
    }
    if !(r.s_omega < gs.s_omega_value - s_tol) {
        return Err(format!("S_omega(u0) = {} is not below S_omega(phi_omega) = {}", r.s_omega, gs.s_omega_value));
    }
    Ok(())
}

fn run_from_ground_state(
    cfg: &ExperimentConfig,
    sp: &Spectral,
    gs: &GroundStateResult,
    require_unstable: bool,
) -> Result<RunRecord> {
    let p = &cfg.params;
    let u0 = scaled_initial_data(sp, gs, cfg.lambda0)?;
    let initial = functionals::evaluate(sp, &u0, p)?;
    let membership = unstable_set_check(gs, &initial);
    if require_unstable {
        if let Err(why) = &membership {
            return Err(Error::Precondition(format!("initial data is not in the unstable set: {why}")));
        }
    }
    let dir = &cfg.output_dir;
    write_snapshot(dir, "initial", &u0, p, 0.0)?;
    let weight = VirialWeight::build(cfg.grid, cfg.radius)?;
    let snapshots = (cfg.evolve.snapshot_stride > 0).then(|| dir.join("snapshots"));
    let mut recorder = CsvRecorder::create(&dir.join("diagnostics.csv"), p, snapshots)?;
    let (outcome, u) = evolve(sp, &u0, p, &cfg.evolve, Some(&weight), &mut recorder)?;
    recorder.finish()?;
    write_snapshot(dir, "final", &u, p, outcome.t_end)?;
    let record = RunRecord {
        params: *p,
        grid: cfg.grid,
        lambda0: cfg.lambda0,
        ground_state_action: gs.s_omega_value,
        initial,
        in_unstable_set: membership.is_ok(),
        outcome,
    };
    write_json(&dir.join("outcome.json"), &record)?;
    if record.outcome.status == crate::evolution::RunStatus::Diverged {
        return Err(Error::Diverged);
    }
    Ok(record)
}

/// Evolves `phi_omega^lambda0` without any precondition on the data.
pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let sp = spectral_for(cfg);
    let gs = solve_default(&sp, &cfg.params)?;
    run_from_ground_state(cfg, &sp, &gs, false)
}

/// The strong-instability experiment: refuses to run outside the theorem
/// regime (unless `allow_any_regime`) or when `phi_omega^lambda0` is not in
/// the unstable set.
pub fn cmd_instability(cfg: &ExperimentConfig, allow_any_regime: bool) -> Result<RunRecord> {
    if let Some(why) = cfg.params.theorem_regime_violation() {
        if !allow_any_regime {
            return Err(Error::Regime(why));
        }
        log::warn!("running outside the theorem regime: {why}");
    }
    let sp = spectral_for(cfg);
    let gs = solve_default(&sp, &cfg.params)?;
    run_from_ground_state(cfg, &sp, &gs, true)
}

fn check_ground_state(cfg: &ExperimentConfig, gs: &GroundStateResult) -> Result<()> {
    if gs.params != cfg.params || gs.field.grid != cfg.grid {
        return Err(Error::Configuration("ground state does not match the configured parameters and grid".into()));
    }
    Ok(())
}

/// [`cmd_evolve`] with a precomputed ground state on the configured grid.
pub fn evolve_with_ground_state(cfg: &ExperimentConfig, gs: &GroundStateResult) -> Result<RunRecord> {
    check_ground_state(cfg, gs)?;
    run_from_ground_state(cfg, &spectral_for(cfg), gs, false)
}

/// [`cmd_instability`] with a precomputed ground state on the configured grid.
pub fn instability_with_ground_state(cfg: &ExperimentConfig, gs: &GroundStateResult) -> Result<RunRecord> {
    if let Some(why) = cfg.params.theorem_regime_violation() {
        return Err(Error::Regime(why));
    }
    check_ground_state(cfg, gs)?;
    run_from_ground_state(cfg, &spectral_for(cfg), gs, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    #[serde(rename = "S_omega")]
    pub s_omega: f64,
    #[serde(rename = "I")]
    pub virial: f64,
    pub virial_sign: i32,
    pub below_ground_action: bool,
    pub in_unstable_set: bool,
}

pub const SWEEP_HEADER: &str = "lambda,S_omega,I,I_sign,S_below_ground,in_unstable_set";

/// `S_omega` and `I` along the dilation orbit of a ground state.
pub fn sweep_rows(sp: &Spectral, gs: &GroundStateResult, lambdas: &[f64], parallel: bool) -> Result<Vec<SweepRow>> {
    let tol = virial_zero_tolerance(gs);
    let row = |&lambda: &f64| -> Result<SweepRow> {
        let u = scaled_initial_data(sp, gs, lambda)?;
        let r = functionals::evaluate(sp, &u, &gs.params)?;
        Ok(SweepRow {
            lambda,
            s_omega: r.s_omega,
            virial: r.virial,
            virial_sign: virial_sign(r.virial, tol),
            below_ground_action: r.s_omega < gs.s_omega_value,
            in_unstable_set: unstable_set_check(gs, &r).is_ok(),
        })
    };
    if parallel {
        lambdas.par_iter().map(row).collect()
    } else {
        lambdas.iter().map(row).collect()
    }
}

pub fn cmd_sweep(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::Domain(format!("sweep values must be positive and finite (got {lambdas:?})")));
    }
    let sp = spectral_for(cfg);
    let gs = solve_default(&sp, &cfg.params)?;
    let rows = sweep_rows(&sp, &gs, lambdas, !cfg.deterministic)?;
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            super::io::format_value(r.lambda),
            super::io::format_value(r.s_omega),
            super::io::format_value(r.virial),
            r.virial_sign,
            r.below_ground_action,
            r.in_unstable_set
        ));
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("sweep.csv"), text)?;
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub status: CheckStatus,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        let status = if measured <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { status, measured, tolerance, detail: detail.into() }
    }

    fn not_applicable(detail: impl Into<String>) -> Self {
        Self { status: CheckStatus::NotApplicable, measured: f64::NAN, tolerance: f64::NAN, detail: detail.into() }
    }

    fn failed(detail: impl Into<String>) -> Self {
        Self { status: CheckStatus::Fail, measured: f64::NAN, tolerance: f64::NAN, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: BTreeMap<String, CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, c)| c.status == CheckStatus::Fail).map(|(k, _)| k.as_str()).collect()
    }
}

/// Names accepted by [`cmd_validate`], in execution order.
pub const VALIDATION_CHECKS: [&str; 8] = [
    "pohozaev",
    "gn_saturation",
    "gn_random",
    "balakrishnan",
    "virial_identity",
    "nehari",
    "key_estimate",
    "sign_structure",
];

const SAMPLES: usize = 20;

/// Runs the selected checks (all of them for `None`) on the configured model
/// and grid, writes `validation.json` and returns the report. Failures are
/// reported, not raised; the caller decides the exit status.
pub fn cmd_validate(cfg: &ExperimentConfig, selection: Option<&[String]>) -> Result<ValidationReport> {
    let names: Vec<String> = match selection {
        Some(list) => {
            for n in list {
                if !VALIDATION_CHECKS.contains(&n.as_str()) {
                    return Err(Error::Domain(format!("unknown check `{n}` (known: {})", VALIDATION_CHECKS.join(", "))));
                }
            }
            list.to_vec()
        }
        None => VALIDATION_CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    let sp = spectral_for(cfg);
    let p = cfg.params;
    let mut warnings = Vec::new();
    let mut checks = BTreeMap::new();
    let gs = if names.is_empty() {
        None
    } else {
        match solve_default(&sp, &p) {
            Ok(gs) => {
                if gs.field.warn_if_truncated("ground state") {
                    warnings.push(format!("ground state is truncated: boundary ratio {:.3e}", gs.field.boundary_ratio()));
                }
                Some(gs)
            }
            Err(e) => {
                warnings.push(format!("ground-state solve failed: {e}"));
                None
            }
        }
    };
    for name in &names {
        let result = match run_check(name, &sp, &p, gs.as_ref()) {
            Ok(r) => r,
            Err(e) => CheckResult::failed(format!("error: {e}")),
        };
        checks.insert(name.clone(), result);
    }
    let passed = checks.values().all(|c| c.status != CheckStatus::Fail);
    let report = ValidationReport { passed, checks, warnings };
    write_json(&cfg.output_dir.join("validation.json"), &report)?;
    Ok(report)
}

fn run_check(name: &str, sp: &Spectral, p: &ModelParams, gs: Option<&GroundStateResult>) -> Result<CheckResult> {
    let grid = *sp.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    let spread = 0.1 * grid.half_length;
    let need_gs = || gs.ok_or_else(|| Error::Precondition("no ground state available".into()));
    Ok(match name {
        "pohozaev" => {
            let gs = need_gs()?;
            CheckResult::at_most(gs.pohozaev.max(), 1e-6, "max relative Pohozaev residual of the ground state")
        }
        "gn_saturation" => {
            let gs = need_gs()?;
            let q_mass = gs.report.mass / functionals::omega_mass_factor(p, p.omega);
            let c_opt = functionals::sharp_gn_constant(p, q_mass)?;
            let ratio = functionals::gn_ratio(&sp.norms(&gs.field, p)?, p, c_opt);
            CheckResult::at_most((ratio - 1.0).abs(), 1e-6, "|GN ratio at the ground state - 1|")
        }
        "gn_random" => {
            let gs = need_gs()?;
            let q_mass = gs.report.mass / functionals::omega_mass_factor(p, p.omega);
            let c_opt = functionals::sharp_gn_constant(p, q_mass)?;
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..SAMPLES {
                let v = random_bumps(grid, &mut rng, spread, 3);
                worst = worst.max(functionals::gn_ratio(&sp.norms(&v, p)?, p, c_opt) - 1.0);
            }
            CheckResult::at_most(worst, 1e-10, format!("max GN ratio - 1 over {SAMPLES} random fields"))
        }
        "balakrishnan" => {
            let quad = BalakrishnanQuadrature::for_grid(p.s, &grid)?;
            let mut worst = quad.invariant_defect();
            for _ in 0..3 {
                let v = random_bumps(grid, &mut rng, spread, 2);
                let hs = sp.hs_seminorm_sq(&v, p.s)?;
                worst = worst.max((resolvent_kinetic(sp, &v, &quad)? / (p.s * hs) - 1.0).abs());
            }
            CheckResult::at_most(worst, 1e-6, "relative defect of the resolvent identity for the kinetic term")
        }
        "virial_identity" => {
            let u = gaussian_packet(grid, [0.0; 3], [0.4, 0.0, 0.0], 1.0, 1.0);
            let delta = 1e-4;
            let mut stepper = Stepper::new(sp, p);
            let mut fwd = u.clone();
            stepper.step(&mut fwd, delta)?;
            let mut back = u.clone();
            stepper.step(&mut back, -delta)?;
            let rate = virial_rate_fd(sp, &back, &fwd, 2.0 * delta, Weight::Full)?;
            let target = 8.0 * functionals::evaluate(sp, &u, p)?.virial;
            CheckResult::at_most((rate - target).abs() / target.abs(), 1e-3, "centered difference of M_{|x|^2} against 8 I")
        }
        "nehari" => {
            let gs = need_gs()?;
            let mut worst = f64::INFINITY;
            for _ in 0..SAMPLES {
                let v = random_bumps(grid, &mut rng, spread, 3);
                let (_, w) = functionals::rescale_to_nehari(sp, &v, p)?;
                worst = worst.min(functionals::evaluate(sp, &w, p)?.s_omega - gs.s_omega_value);
            }
            CheckResult::at_most(-worst, 1e-6, format!("max of S_omega(phi) - S_omega(v) over {SAMPLES} Nehari fields"))
        }
        "key_estimate" => {
            if !p.is_mass_supercritical() {
                return Ok(CheckResult::not_applicable("requires d*alpha > 4s"));
            }
            let gs = need_gs()?;
            let samples = sample_unstable_members(sp, p, gs.s_omega_value, &mut rng, SAMPLES, spread)?;
            let mut worst = f64::NEG_INFINITY;
            for v in &samples {
                let r = functionals::evaluate(sp, v, p)?;
                worst = worst.max(r.virial - 2.0 * p.s * (r.s_omega - gs.s_omega_value));
            }
            CheckResult::at_most(worst, 1e-8, format!("max of I - 2s(S_omega - d) over {} unstable-set members", samples.len()))
        }
        "sign_structure" => {
            if !p.is_mass_supercritical() {
                return Ok(CheckResult::not_applicable("requires d*alpha > 4s"));
            }
            let gs = need_gs()?;
            let lambdas = [0.5, 0.9, 1.0, 1.1, 2.0];
            let expected = [1, 1, 0, -1, -1];
            let rows = sweep_rows(sp, gs, &lambdas, false)?;
            let bad = rows
                .iter()
                .zip(expected)
                .filter(|(r, e)| r.virial_sign != *e || (r.lambda != 1.0 && !r.below_ground_action))
                .count();
            CheckResult::at_most(bad as f64, 0.0, "sweep rows with a wrong I sign or S_omega not below the ground state")
        }
        other => return Err(Error::Domain(format!("unknown check `{other}`"))),
    })
}

/// Draws `count` members of the unstable set by dilating random fields past
/// the point where the exact scaling law puts `S_omega` below `s_ground`.
pub fn sample_unstable_members(
    sp: &Spectral,
    p: &ModelParams,
    s_ground: f64,
    rng: &mut impl Rng,
    count: usize,
    spread: f64,
) -> Result<Vec<ComplexField>> {
    let grid = *sp.grid();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 20 * count {
            return Err(Error::NonConvergence { iterations: attempts, residual: out.len() as f64 });
        }
        let v = random_bumps(grid, rng, spread, 3);
        let n = sp.norms(&v, p)?;
        let mut lambda = functionals::virial_null_lambda(&n, p)?;
        // S_omega is decreasing in lambda past the virial null point
        while functionals::action_along_dilation(&n, p, lambda) >= s_ground {
            lambda *= 1.05;
            if lambda > 1e3 {
                break;
            }
        }
        lambda *= rng.gen_range(1.0..1.3);
        let w = functionals::scale_field(sp, &v, lambda)?;
        if w.boundary_ratio() > 1e-10 || sp.spectral_tail_fraction(&w) > 1e-12 {
            continue;
        }
        if functionals::in_unstable_set(sp, &w, p, s_ground)? {
            out.push(w);
        }
    }
    Ok(out)
}
