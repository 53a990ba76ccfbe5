//! Variable transform `v(t,x) = r^λ v*(r^ρ t, r^μ x)` and the two scalar
//! multipliers it puts on the mode equation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// Base `r > 1`.
    pub r: f64,
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl ScalingParams {
    /// `λ = ρ = μ = 0`: both multipliers are 1.
    pub fn identity() -> Self {
        ScalingParams {
            r: 2.0,
            lambda: 0.0,
            rho: 0.0,
            mu: 0.0,
        }
    }

    /// Purely spatial scaling with `r^μ = r_mu`, `ρ = λ = 0`.
    pub fn spatial(r_mu: f64) -> Result<Self> {
        if !(r_mu > 1.0 && r_mu.is_finite()) {
            return Err(SimError::InvalidParameter(format!(
                "spatial scaling needs r^mu > 1, got {r_mu}"
            )));
        }
        Ok(ScalingParams {
            r: r_mu,
            lambda: 0.0,
            rho: 0.0,
            mu: 1.0,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.lambda == 0.0 && self.rho == 0.0 && self.mu == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(SimError::InvalidParameter(format!(
                "scaling base r = {} must be > 1",
                self.r
            )));
        }
        if ![self.lambda, self.rho, self.mu].iter().all(|x| x.is_finite()) {
            return Err(SimError::InvalidParameter("scaling exponents must be finite".into()));
        }
        Ok(())
    }

    /// See [`scaled_coefficients`].
    pub fn coefficients(&self) -> (f64, f64) {
        scaled_coefficients(self)
    }
}

/// Viscosity multiplier `r^{2μ-ρ}` and nonlinear multiplier `r^{λ+μ-ρ}`.
pub fn scaled_coefficients(p: &ScalingParams) -> (f64, f64) {
    if p.is_identity() {
        return (1.0, 1.0);
    }
    (p.r.powf(2.0 * p.mu - p.rho), p.r.powf(p.lambda + p.mu - p.rho))
}

/// `r^μ = 2π(n+n²) c C*² / min{ν, 1}`, the spatial scaling that lets the
/// viscosity dominate the nonlinear growth at the envelope.
pub fn choose_r_mu(nu: f64, c_star: f64, c: f64, n: usize) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(SimError::InvalidParameter(format!(
            "choose_r_mu needs nu > 0, got {nu}"
        )));
    }
    if !(c_star >= 1.0) {
        return Err(SimError::InvalidParameter(format!(
            "choose_r_mu needs C* >= 1, got {c_star}"
        )));
    }
    if !(c > 0.0) {
        return Err(SimError::InvalidParameter(format!("choose_r_mu needs c > 0, got {c}")));
    }
    let nf = n as f64;
    Ok(2.0 * PI * (nf + nf * nf) * c * c_star * c_star / nu.min(1.0))
}

/// Horizon of the scaled problem, `T_ρ = r^ρ T`.
pub fn time_scale_map(p: &ScalingParams, horizon: f64) -> f64 {
    if p.rho == 0.0 {
        horizon
    } else {
        p.r.powf(p.rho) * horizon
    }
}
