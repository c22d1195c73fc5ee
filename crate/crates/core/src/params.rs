//! Model parameters `(d, s, alpha, omega)` and the regime predicates built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the focusing fractional NLS and its elliptic ground-state equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub s: f64,
    pub alpha: f64,
    pub omega: f64,
}

impl ModelParams {
    /// Validates `0 < s <= 1`, `alpha > 0`, `omega > 0`, `1 <= d <= 3` and the
    /// energy-subcritical bound `alpha < alpha_star`.
    pub fn new(dim: usize, s: f64, alpha: f64, omega: f64) -> Result<Self> {
        let p = Self { dim, s, alpha, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Domain(format!("dimension d = {} must be 1, 2 or 3", self.dim)));
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::Domain(format!("fractional order s = {} must satisfy 0 < s <= 1", self.s)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("nonlinearity power alpha = {} must be positive", self.alpha)));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Domain(format!("frequency omega = {} must be positive", self.omega)));
        }
        let star = self.alpha_star();
        if self.alpha >= star {
            return Err(Error::Domain(format!(
                "alpha = {} violates alpha < alpha* = 4s/(d-2s) = {:.6} (d = {}, s = {})",
                self.alpha, star, self.dim, self.s
            )));
        }
        Ok(())
    }

    pub fn d(&self) -> f64 {
        self.dim as f64
    }

    /// `4s/(d-2s)` when `d > 2s`, infinity otherwise.
    pub fn alpha_star(&self) -> f64 {
        let d = self.d();
        if d > 2.0 * self.s {
            4.0 * self.s / (d - 2.0 * self.s)
        } else {
            f64::INFINITY
        }
    }

    /// `d*alpha > 4s`.
    pub fn is_mass_supercritical(&self) -> bool {
        self.d() * self.alpha > 4.0 * self.s
    }

    /// Parameter range of the strong-instability theorem:
    /// `d >= 2`, `d/(2d-1) <= s < 1`, `4s/d < alpha < 4s/(d-2s)`, `alpha < 4s`.
    pub fn in_theorem_regime(&self) -> bool {
        self.theorem_regime_violation().is_none()
    }

    /// Names the first violated condition of the theorem regime, if any.
    pub fn theorem_regime_violation(&self) -> Option<String> {
        let d = self.d();
        let s = self.s;
        if self.dim < 2 {
            return Some(format!("theorem regime requires d >= 2 (got d = {})", self.dim));
        }
        let s_min = d / (2.0 * d - 1.0);
        if !(s >= s_min && s < 1.0) {
            return Some(format!("theorem regime requires d/(2d-1) = {s_min} <= s < 1 (got s = {s})"));
        }
        let lo = 4.0 * s / d;
        let hi = self.alpha_star();
        if !(self.alpha > lo && self.alpha < hi) {
            return Some(format!(
                "theorem regime requires 4s/d = {lo} < alpha < 4s/(d-2s) = {hi} (got alpha = {})",
                self.alpha
            ));
        }
        if self.alpha >= 4.0 * s {
            return Some(format!("theorem regime requires alpha < 4s = {} (got alpha = {})", 4.0 * s, self.alpha));
        }
        None
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.dim, self.s, self.alpha, omega)
    }

    /// `c1 = (4s-(d-2s)alpha)/(d alpha)` in `omega*mass = c1*|v|^2_{H^s}`.
    pub fn pohozaev_c1(&self) -> f64 {
        let d = self.d();
        (4.0 * self.s - (d - 2.0 * self.s) * self.alpha) / (d * self.alpha)
    }

    /// `c2 = (4s-(d-2s)alpha)/(2s(alpha+2))` in `omega*mass = c2*|v|^{alpha+2}_{L^{alpha+2}}`.
    pub fn pohozaev_c2(&self) -> f64 {
        let d = self.d();
        (4.0 * self.s - (d - 2.0 * self.s) * self.alpha) / (2.0 * self.s * (self.alpha + 2.0))
    }

    /// Exponent of the kinetic term in the Weinstein functional, `d alpha / (4s)`.
    pub fn weinstein_kinetic_exponent(&self) -> f64 {
        self.d() * self.alpha / (4.0 * self.s)
    }

    /// Exponent of the mass term in the Weinstein functional, `(alpha + 2 - d alpha/(2s)) / 2`.
    pub fn weinstein_mass_exponent(&self) -> f64 {
        (self.alpha + 2.0 - self.d() * self.alpha / (2.0 * self.s)) / 2.0
    }

    /// Coefficient `d alpha / (2(alpha+2))` of the potential term in the virial functional.
    pub fn virial_coefficient(&self) -> f64 {
        self.d() * self.alpha / (2.0 * (self.alpha + 2.0))
    }
}
