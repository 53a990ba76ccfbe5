//! Physical and numerical parameters of a run.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scaling::ScalingParams;

/// Time stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepperKind {
    /// Forward Euler on the full right-hand side.
    Euler,
    /// Viscosity factor times the first-order Euler-term factor `(1 + E δt)`.
    Trotter,
}

/// Order of the two Trotter factors within one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitOrder {
    /// `(1 + E δt)` first, then the viscosity factor.
    #[default]
    NonlinearFirst,
    ViscosityFirst,
}

/// Form of the diagonal viscosity factor in a Trotter step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViscosityFactor {
    /// `exp(-ν |k|² δt)`, exact for the heat part.
    #[default]
    Exponential,
    /// `1 - ν |k|² δt`, the first-order product form.
    Linear,
}

/// How the quadratic convolutions are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvolutionMethod {
    /// Truncated double sum over the box, `O(K^{2n})`.
    Direct,
    /// Zero-padded FFT products on a `3K+1` grid; identical truncation.
    Spectral,
    /// Spectral except for tiny boxes.
    #[default]
    Auto,
}

/// Time-dilatation comparison scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DilatationVariant {
    #[default]
    None,
    /// Prefactor `1 + θ(t - t₀)`.
    Local,
    /// Prefactor `1 + θ t`.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilatationParams {
    pub theta: f64,
    pub t0: f64,
    /// Window length `Δ ∈ (0, 1)` of one comparison scheme.
    pub window: f64,
    pub variant: DilatationVariant,
}

impl Default for DilatationParams {
    fn default() -> Self {
        DilatationParams {
            theta: 1.0,
            t0: 0.0,
            window: 0.5,
            variant: DilatationVariant::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Spatial dimension, 1 to 3.
    pub n: usize,
    /// Period length `l` of the torus.
    pub period: f64,
    /// Viscosity `ν ≥ 0`.
    pub nu: f64,
    /// Cutoff `K`: modes with `|α|∞ ≤ K` are kept.
    pub cutoff: usize,
    /// Time step `δt > 0`.
    pub dt: f64,
    pub scaling: ScalingParams,
    pub dilatation: DilatationParams,
    /// Prefactor `λ′` of the nonlinear terms in the dilated scheme.
    pub lambda_prime: f64,
    /// Attenuated viscosity `ν̃ ∈ [0, ν]` used by the Trotter viscosity factor.
    pub damped_nu: Option<f64>,
    pub split_order: SplitOrder,
    pub viscosity_factor: ViscosityFactor,
    pub method: ConvolutionMethod,
}

impl SimConfig {
    pub fn new(n: usize, period: f64, nu: f64, cutoff: usize, dt: f64) -> Self {
        SimConfig {
            n,
            period,
            nu,
            cutoff,
            dt,
            scaling: ScalingParams::identity(),
            dilatation: DilatationParams::default(),
            lambda_prime: 1.0,
            damped_nu: None,
            split_order: SplitOrder::default(),
            viscosity_factor: ViscosityFactor::default(),
            method: ConvolutionMethod::default(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_scaling(mut self, scaling: ScalingParams) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn with_method(mut self, method: ConvolutionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_dilatation(mut self, dilatation: DilatationParams) -> Self {
        self.dilatation = dilatation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidParameter(msg));
        if !(1..=3).contains(&self.n) {
            return bad(format!("dimension n = {} not in 1..=3", self.n));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad(format!("period l = {} must be positive", self.period));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return bad(format!("viscosity nu = {} must be >= 0", self.nu));
        }
        if self.cutoff < 1 {
            return bad("cutoff K must be >= 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time step dt = {} must be positive", self.dt));
        }
        if let Some(nt) = self.damped_nu {
            if !(0.0..=self.nu).contains(&nt) {
                return bad(format!("damped viscosity {nt} outside [0, nu = {}]", self.nu));
            }
        }
        if !self.lambda_prime.is_finite() || self.lambda_prime <= 0.0 {
            return bad(format!("lambda' = {} must be positive", self.lambda_prime));
        }
        self.scaling.validate()?;
        let d = &self.dilatation;
        if d.variant != DilatationVariant::None {
            if !(d.window > 0.0 && d.window < 1.0) {
                return bad(format!("dilatation window {} not in (0, 1)", d.window));
            }
            if d.theta < 0.0 || d.t0 < 0.0 {
                return bad("dilatation theta and t0 must be >= 0".into());
            }
        }
        Ok(())
    }

    /// `visc_factor · ν · 4π² n K² δt / l²`: above 1 the linearised viscosity
    /// factor of the highest mode turns negative.
    pub fn stiffness_number(&self) -> f64 {
        let (visc, _) = self.scaling.coefficients();
        let k = self.cutoff as f64;
        visc * self.nu * 4.0 * PI * PI * self.n as f64 * k * k * self.dt / (self.period * self.period)
    }

    /// Logs a warning when [`Self::stiffness_number`] exceeds 1.
    pub fn check_step_size(&self) -> bool {
        let s = self.stiffness_number();
        if s > 1.0 {
            log::warn!(
                "dt = {} is stiff for the highest modes (nu 4pi^2 n K^2 dt / l^2 = {s:.3}); \
                 the Euler comparison degrades",
                self.dt
            );
            false
        } else {
            true
        }
    }
}
