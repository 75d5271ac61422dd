//! Annealing schedules.
//!
//! The effective inverse temperature grows geometrically and is capped at 1;
//! the transverse field decays as `gamma0 / sqrt(t)`. The engine uses the
//! 1-based outer iteration `t` for the field and `t - 1` for the temperature
//! so that the first iteration runs at `beta_eff0`.

use alloc::format;

use crate::error::{domain, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    /// Initial inverse temperature. Carried for reporting; every update only
    /// uses the effective value.
    pub beta0: f64,
    pub r_beta: f64,
    pub gamma0: f64,
    pub beta_eff0: f64,
}

impl AnnealSchedule {
    pub fn new(beta0: f64, r_beta: f64, gamma0: f64, beta_eff0: f64) -> Result<Self> {
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(domain(format!("beta0 must be positive, got {beta0}")));
        }
        if !(r_beta > 1.0 && r_beta.is_finite()) {
            return Err(domain(format!("r_beta must exceed 1, got {r_beta}")));
        }
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(domain(format!("gamma0 must be positive, got {gamma0}")));
        }
        if !(beta_eff0 > 0.0 && beta_eff0.is_finite()) {
            return Err(domain(format!("beta_eff0 must be positive, got {beta_eff0}")));
        }
        Ok(Self {
            beta0,
            r_beta,
            gamma0,
            beta_eff0,
        })
    }

    /// `min(1, beta_eff0 * r_beta^t)`.
    pub fn beta_eff_at(&self, t: u32) -> f64 {
        let grown = self.beta_eff0 * math::powf(self.r_beta, f64::from(t));
        grown.min(1.0)
    }

    /// `gamma0 / sqrt(t)`; `t` must be at least 1.
    pub fn gamma_at(&self, t: u32) -> Result<f64> {
        if t == 0 {
            return Err(domain("transverse field schedule starts at t = 1"));
        }
        Ok(self.gamma0 / math::sqrt(f64::from(t)))
    }
}
