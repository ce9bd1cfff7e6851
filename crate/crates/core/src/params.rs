//! Physical and numerical constants of the skyrmion particle model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ratio of Magnus to damping coefficient used for all headline runs.
pub const DEFAULT_MAGNUS_RATIO: f64 = 9.962;

/// Force unit in N/m (documentation only; the simulation is dimensionless).
pub const UNIT_FORCE_NOTE: &str = "F0 ~ 1e-5 N/m";
/// Length unit (documentation only).
pub const UNIT_LENGTH_NOTE: &str = "l0 ~ 10 nm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PinModel {
    /// Linear restoring ramp inside the trap, maximal (`f_p`) at the edge.
    #[default]
    Harmonic,
    /// `f_p * exp(-d / radius)` toward the centre, truncated at `6 * radius`.
    Exponential,
}

/// Update rule applied within each sub-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Synchronous explicit Euler: one force evaluation per sub-step.
    #[default]
    Euler,
    /// Classical fourth-order Runge-Kutta: four force evaluations per sub-step.
    Rk4,
}

/// Solve `alpha_d^2 + alpha_m^2 = 1` with `alpha_m / alpha_d = ratio`.
pub fn derive_damping(magnus_ratio: f64) -> Result<(f64, f64)> {
    if !magnus_ratio.is_finite() || magnus_ratio < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "magnus_ratio must be finite and >= 0, got {magnus_ratio}"
        )));
    }
    let alpha_d = 1.0 / (1.0 + magnus_ratio * magnus_ratio).sqrt();
    Ok((alpha_d, magnus_ratio * alpha_d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha_d: f64,
    pub alpha_m: f64,
    pub magnus_ratio: f64,
    /// Pair-force prefactor.
    pub f_s0: f64,
    /// Skyrmion size; the pair force decays as K1(R / xi_s).
    pub xi_s: f64,
    /// Trap radius.
    pub pin_radius: f64,
    /// Maximum pinning force.
    pub f_p: f64,
    /// Drive magnitude along +x.
    pub f_d: f64,
    pub box_l: f64,
    pub rho_s: f64,
    pub rho_p: f64,
    /// Time advanced per iteration.
    pub dt: f64,
    /// Upper bound on one integration sub-step; an iteration of length `dt` is split as needed.
    pub max_substep: f64,
    /// Upper bound on any particle's displacement within one sub-step.
    pub max_move: f64,
    #[serde(default)]
    pub integrator: Integrator,
    pub r_cut: f64,
    /// Width of the smooth switch that brings the pair force to zero at `r_cut`.
    #[serde(default = "default_cutoff_taper")]
    pub cutoff_taper: f64,
    #[serde(default)]
    pub pin_model: PinModel,
}

fn default_cutoff_taper() -> f64 {
    2.0
}

impl Default for ModelParams {
    fn default() -> Self {
        let (alpha_d, alpha_m) = derive_damping(DEFAULT_MAGNUS_RATIO).expect("valid ratio");
        ModelParams {
            alpha_d,
            alpha_m,
            magnus_ratio: DEFAULT_MAGNUS_RATIO,
            f_s0: 1.0,
            xi_s: 3.0,
            pin_radius: 0.3,
            f_p: 0.0,
            f_d: 0.0,
            box_l: 36.0,
            rho_s: 0.1,
            rho_p: 0.3,
            dt: 1.0,
            max_substep: 0.5,
            max_move: 0.1,
            integrator: Integrator::Rk4,
            r_cut: 18.0,
            cutoff_taper: 2.0,
            pin_model: PinModel::Harmonic,
        }
    }
}

impl ModelParams {
    /// Single plain Euler step of length `dt` per iteration, as long as `max_move` allows.
    pub fn plain_euler(mut self, dt: f64) -> Self {
        self.dt = dt;
        self.max_substep = dt;
        self.integrator = Integrator::Euler;
        self
    }

    pub fn with_forces(mut self, f_p: f64, f_d: f64) -> Self {
        self.f_p = f_p;
        self.f_d = f_d;
        self
    }

    /// Copy with a new skyrmion size and trap radius.
    pub fn sized(mut self, xi_s: f64, xi_d: f64) -> Self {
        self.xi_s = xi_s;
        self.pin_radius = xi_d;
        self
    }

    /// Replace the damping pair from a new Magnus ratio.
    pub fn with_magnus_ratio(mut self, ratio: f64) -> Result<Self> {
        let (a, m) = derive_damping(ratio)?;
        self.magnus_ratio = ratio;
        self.alpha_d = a;
        self.alpha_m = m;
        Ok(self)
    }

    pub fn n_skyrmions(&self) -> usize {
        (self.rho_s * self.box_l * self.box_l).floor() as usize
    }

    pub fn n_pins(&self) -> usize {
        (self.rho_p * self.box_l * self.box_l).floor() as usize
    }

    /// Triangular-lattice spacing at density `rho_s`.
    pub fn lattice_spacing(&self) -> f64 {
        (2.0 / (3f64.sqrt() * self.rho_s)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let all = [
            self.alpha_d,
            self.alpha_m,
            self.magnus_ratio,
            self.f_s0,
            self.xi_s,
            self.pin_radius,
            self.f_p,
            self.f_d,
            self.box_l,
            self.rho_s,
            self.rho_p,
            self.dt,
            self.max_substep,
            self.max_move,
            self.r_cut,
            self.cutoff_taper,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite".into());
        }
        let norm = self.alpha_d * self.alpha_d + self.alpha_m * self.alpha_m;
        if (norm - 1.0).abs() > 1e-12 {
            return bad(format!("alpha_d^2 + alpha_m^2 = {norm}, expected 1"));
        }
        if self.alpha_d <= 0.0 {
            return bad("alpha_d must be > 0".into());
        }
        if (self.alpha_m / self.alpha_d - self.magnus_ratio).abs() > 1e-9 {
            return bad(format!(
                "alpha_m/alpha_d = {} disagrees with magnus_ratio {}",
                self.alpha_m / self.alpha_d,
                self.magnus_ratio
            ));
        }
        if self.box_l <= 0.0 || self.dt <= 0.0 {
            return bad("box_l and dt must be > 0".into());
        }
        if self.max_substep <= 0.0 || self.max_move <= 0.0 {
            return bad("max_substep and max_move must be > 0".into());
        }
        if self.r_cut <= 0.0 || self.r_cut > self.box_l / 2.0 {
            return bad(format!("r_cut must lie in (0, box_l/2], got {}", self.r_cut));
        }
        if self.cutoff_taper < 0.0 || self.cutoff_taper >= self.r_cut {
            return bad(format!("cutoff_taper must lie in [0, r_cut), got {}", self.cutoff_taper));
        }
        if self.f_p < 0.0 || self.f_d < 0.0 {
            return bad("f_p and f_d must be >= 0".into());
        }
        if self.xi_s <= 0.0 || self.pin_radius <= 0.0 {
            return bad("xi_s and pin_radius must be > 0".into());
        }
        if self.rho_s < 0.0 || self.rho_p < 0.0 {
            return bad("densities must be >= 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damping_pair() {
        let (a, m) = derive_damping(9.962).unwrap();
        // 30-digit reference evaluation of 1/sqrt(1 + r^2) and r/sqrt(1 + r^2)
        assert!((a - 0.099_879_496_168_101_87).abs() < 1e-15);
        assert!((m - 0.994_999_540_826_630_8).abs() < 1e-15);
        assert!((m / a - 9.962).abs() < 1e-12);
        assert!((a * a + m * m - 1.0).abs() < 1e-15);
        assert_eq!(derive_damping(0.0).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn damping_rejects_bad_ratio() {
        assert!(derive_damping(-1.0).is_err());
        assert!(derive_damping(f64::NAN).is_err());
        assert!(derive_damping(f64::INFINITY).is_err());
    }

    #[test]
    fn default_counts() {
        let p = ModelParams::default();
        p.validate().unwrap();
        assert_eq!(p.n_skyrmions(), 129);
        assert_eq!(p.n_pins(), 388);
        assert!((p.lattice_spacing() - 3.398).abs() < 1e-3);
    }

    #[test]
    fn validation_catches_violations() {
        let mut p = ModelParams::default();
        p.alpha_m = 0.5;
        assert!(p.validate().is_err());
        let mut p = ModelParams::default();
        p.r_cut = 20.0;
        assert!(p.validate().is_err());
        let p = ModelParams::default().with_forces(-0.1, 0.0);
        assert!(p.validate().is_err());
    }
}
