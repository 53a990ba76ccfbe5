//! Zero-mode control and the time-dilated comparison scheme.
//!
//! The controlled field keeps `v_{i0} = 0`; the control `r_{i0}` collects
//! what the zero modes would have received, so the uncontrolled zero modes
//! are `r_{i0}` itself.
//!
//! The dilated scheme writes `v(t) = λ′ g(t) u(s)` with `τ = t - t₀`,
//! `s = τ / √(1 - τ²)` and `g = 1 + θτ` (local) or `1 + θt` (global). In
//! `s`-time the modes obey
//!
//! ```text
//! du/ds = μ0 ν Δu + λ′ μ1 (B + L)(u) - μd u
//! μ0 = (1 - τ²)^{3/2},  μ1 = μ0 g,  μd = θ μ0 / g
//! ```
//!
//! and are advanced with equidistant steps `δσ` in `s`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{DilatationVariant, SimConfig, SplitOrder, StepperKind};
use crate::error::{Result, SimError};
use crate::integrators::{apply_diagonal, viscosity_factors, Stepper};
use crate::lattice::{wavenumber_sq, ModeBox, ModeField, MultiIndex};
use crate::nonlinear::{burgers_mode, NonlinearEvaluator};

/// Accumulated zero-mode control `r_{i0}` and the latest increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    r_zero: Vec<Complex64>,
    last_increment: Vec<Complex64>,
    steps: usize,
}

/// One line of the control ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub step: usize,
    pub component: usize,
    pub increment: Complex64,
    pub cumulative: Complex64,
}

impl ControlState {
    pub fn new(n_components: usize) -> Self {
        ControlState {
            r_zero: vec![Complex64::new(0.0, 0.0); n_components],
            last_increment: vec![Complex64::new(0.0, 0.0); n_components],
            steps: 0,
        }
    }

    /// Running sum of all increments; equals the uncontrolled zero modes.
    pub fn r_zero(&self) -> &[Complex64] {
        &self.r_zero
    }

    pub fn last_increment(&self) -> &[Complex64] {
        &self.last_increment
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn record(&mut self, increments: &[Complex64]) {
        assert_eq!(increments.len(), self.r_zero.len(), "one increment per component");
        for (r, d) in self.r_zero.iter_mut().zip(increments) {
            *r += d;
        }
        self.last_increment.copy_from_slice(increments);
        self.steps += 1;
    }

    /// Ledger lines for the most recent increments.
    pub fn records(&self, step: usize) -> Vec<ControlRecord> {
        self.last_increment
            .iter()
            .zip(&self.r_zero)
            .enumerate()
            .map(|(component, (increment, cumulative))| ControlRecord {
                step,
                component,
                increment: *increment,
                cumulative: *cumulative,
            })
            .collect()
    }
}

/// `δt · B_{i0}` where `B_{i0} = -Σ_j Σ_γ (2πi γ_j / l) v_{j(-γ)} v_{iγ}` is
/// the Burgers term of the zero mode. Real for Hermitian fields (the
/// imaginary rounding residue is dropped when `f` is flagged real).
pub fn control_increment(f: &ModeField, l: f64, dt: f64) -> Vec<Complex64> {
    let zero = MultiIndex::zero(f.dim());
    (0..f.n_components())
        .map(|i| {
            let b = burgers_mode(f, i, &zero, l) * dt;
            if f.is_real() {
                Complex64::new(b.re, 0.0)
            } else {
                b
            }
        })
        .collect()
}

/// Moves the zero-mode change of `before → after` into `state` and zeroes
/// the zero modes of `after`.
pub(crate) fn absorb_zero_modes(before: &ModeField, after: &mut ModeField, state: &mut ControlState) {
    let increments: Vec<Complex64> = after
        .zero_modes()
        .iter()
        .zip(before.zero_modes())
        .map(|(a, b)| a - b)
        .collect();
    after.set_zero_modes(&vec![Complex64::new(0.0, 0.0); increments.len()]);
    state.record(&increments);
}

/// Steps with `stepper`, then records the zero-mode change as control and
/// resets the zero modes to exactly zero.
pub fn controlled_step(f: &ModeField, st: &ControlState, stepper: &mut Stepper) -> Result<(ModeField, ControlState)> {
    let mut next = stepper.step_indexed(f, st.steps() + 1)?;
    let mut state = st.clone();
    absorb_zero_modes(f, &mut next, &mut state);
    Ok((next, state))
}

/// Multipliers of the dilated equation at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilatationCoeffs {
    /// Viscosity multiplier `μ0 = (1 - τ²)^{3/2}`.
    pub mu0: f64,
    /// Nonlinear multiplier `μ1 = μ0 g`.
    pub mu1: f64,
    /// Damping rate `μd = θ μ0 / g`.
    pub mud: f64,
}

fn prefactor_g(t: f64, t0: f64, theta: f64, variant: DilatationVariant) -> Result<f64> {
    match variant {
        DilatationVariant::Local => Ok(1.0 + theta * (t - t0)),
        DilatationVariant::Global => Ok(1.0 + theta * t),
        DilatationVariant::None => Err(SimError::InvalidParameter(
            "dilatation variant must be local or global".into(),
        )),
    }
}

fn check_window(tau: f64, window: f64) -> Result<()> {
    if !(tau >= 0.0 && tau < window) {
        return Err(SimError::WindowExceeded { offset: tau, window });
    }
    Ok(())
}

/// `(μ0, μ1, μd)` at time `t` of the window anchored at `t₀`.
pub fn dilatation_coefficients(t: f64, t0: f64, theta: f64, variant: DilatationVariant) -> Result<DilatationCoeffs> {
    let tau = t - t0;
    check_window(tau, 1.0)?;
    let g = prefactor_g(t, t0, theta, variant)?;
    let q = 1.0 - tau * tau;
    let mu0 = q * q.sqrt();
    Ok(DilatationCoeffs {
        mu0,
        mu1: mu0 * g,
        mud: theta * mu0 / g,
    })
}

/// `v = λ′ g(t) u`.
pub fn pullback(
    u: &ModeField,
    t: f64,
    t0: f64,
    theta: f64,
    lambda_prime: f64,
    variant: DilatationVariant,
) -> Result<ModeField> {
    check_window(t - t0, 1.0)?;
    Ok(u.scaled(lambda_prime * prefactor_g(t, t0, theta, variant)?))
}

/// `u = v / (λ′ g(t))`, the inverse of [`pullback`].
pub fn pushforward(
    v: &ModeField,
    t: f64,
    t0: f64,
    theta: f64,
    lambda_prime: f64,
    variant: DilatationVariant,
) -> Result<ModeField> {
    check_window(t - t0, 1.0)?;
    Ok(v.scaled(1.0 / (lambda_prime * prefactor_g(t, t0, theta, variant)?)))
}

/// Equidistant `s`-grid of one window: `s_l = l δσ` with
/// `δσ = δt / √(1 - Δ²)`, mapped back by `t_l = t₀ + s_l / √(1 + s_l²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilatedClock {
    pub t0: f64,
    pub window: f64,
    pub dt: f64,
    pub dsigma: f64,
}

impl DilatedClock {
    pub fn new(t0: f64, window: f64, dt: f64) -> Result<Self> {
        if !(window > 0.0 && window < 1.0) {
            return Err(SimError::InvalidParameter(format!(
                "dilatation window {window} not in (0, 1)"
            )));
        }
        if !(dt > 0.0) {
            return Err(SimError::InvalidParameter(format!("time step {dt} must be positive")));
        }
        Ok(DilatedClock {
            t0,
            window,
            dt,
            dsigma: dt / (1.0 - window * window).sqrt(),
        })
    }

    /// Steps needed to cross the window.
    pub fn steps(&self) -> usize {
        (self.window / self.dt).round() as usize
    }

    pub fn s(&self, l: usize) -> f64 {
        l as f64 * self.dsigma
    }

    pub fn tau(&self, l: usize) -> f64 {
        let s = self.s(l);
        s / (1.0 + s * s).sqrt()
    }

    pub fn time(&self, l: usize) -> f64 {
        self.t0 + self.tau(l)
    }
}

/// Stepper of the dilated `u`-scheme inside one window.
pub struct AutoControl {
    cfg: SimConfig,
    clock: DilatedClock,
    kind: StepperKind,
    eval: NonlinearEvaluator,
    /// `ν |k_α|²` (Euler) or `ν̃ |k_α|²` (Trotter) per offset.
    base_rates: Vec<f64>,
}

impl AutoControl {
    pub fn new(cfg: &SimConfig, clock: DilatedClock, kind: StepperKind) -> Result<Self> {
        cfg.validate()?;
        if cfg.dilatation.variant == DilatationVariant::None {
            return Err(SimError::InvalidParameter(
                "dilated stepping needs a local or global variant".into(),
            ));
        }
        let geometry = ModeBox::new(cfg.n, cfg.cutoff);
        let nu = match kind {
            StepperKind::Euler => cfg.nu,
            StepperKind::Trotter => cfg.damped_nu.unwrap_or(cfg.nu),
        };
        let base_rates = geometry.iter().map(|a| nu * wavenumber_sq(&a, cfg.period)).collect();
        Ok(AutoControl {
            cfg: cfg.clone(),
            clock,
            kind,
            eval: NonlinearEvaluator::for_config(cfg),
            base_rates,
        })
    }

    pub fn clock(&self) -> &DilatedClock {
        &self.clock
    }

    pub fn coefficients(&self, l: usize) -> Result<DilatationCoeffs> {
        let d = &self.cfg.dilatation;
        dilatation_coefficients(self.clock.time(l), self.clock.t0, d.theta, d.variant)
    }

    pub fn pullback(&self, u: &ModeField, l: usize) -> Result<ModeField> {
        let d = &self.cfg.dilatation;
        pullback(
            u,
            self.clock.time(l),
            self.clock.t0,
            d.theta,
            self.cfg.lambda_prime,
            d.variant,
        )
    }

    pub fn pushforward(&self, v: &ModeField, l: usize) -> Result<ModeField> {
        let d = &self.cfg.dilatation;
        pushforward(
            v,
            self.clock.time(l),
            self.clock.t0,
            d.theta,
            self.cfg.lambda_prime,
            d.variant,
        )
    }

    /// Advances `u` from `s_l` to `s_{l+1}`.
    pub fn step(&mut self, u: &ModeField, l: usize) -> Result<ModeField> {
        self.step_indexed(u, l, l + 1)
    }

    pub(crate) fn step_indexed(&mut self, u: &ModeField, l: usize, step: usize) -> Result<ModeField> {
        let tau_next = self.clock.tau(l + 1);
        if tau_next > self.clock.window * (1.0 + 1e-12) {
            return Err(SimError::WindowExceeded {
                offset: tau_next,
                window: self.clock.window,
            });
        }
        let co = self.coefficients(l)?;
        let (visc, nonlin) = self.cfg.scaling.coefficients();
        let ds = self.clock.dsigma;
        let nl = nonlin * self.cfg.lambda_prime * co.mu1;
        let vm = visc * co.mu0;
        let rates: Vec<f64> = self.base_rates.iter().map(|r| vm * r).collect();
        let period = self.cfg.period;
        let out = match self.kind {
            StepperKind::Euler => {
                let e = self.eval.euler_terms(u, period);
                let mut out = u.clone();
                for i in 0..u.n_components() {
                    let ui = u.component(i);
                    for ((o, (z, e)), r) in out
                        .component_mut(i)
                        .iter_mut()
                        .zip(ui.iter().zip(e.component(i)))
                        .zip(&rates)
                    {
                        *o += (-z * *r + e * nl - z * co.mud) * ds;
                    }
                }
                out
            }
            StepperKind::Trotter => {
                let factors = viscosity_factors(&rates, ds, self.cfg.viscosity_factor);
                match self.cfg.split_order {
                    SplitOrder::NonlinearFirst => {
                        let w = self.transport_factor(u, nl, co.mud, ds);
                        apply_diagonal(w, &factors)
                    }
                    SplitOrder::ViscosityFirst => {
                        let w = apply_diagonal(u.clone(), &factors);
                        self.transport_factor(&w, nl, co.mud, ds)
                    }
                }
            }
        };
        if !out.is_finite() {
            return Err(SimError::OverflowDetected { step });
        }
        Ok(out)
    }

    /// `u (1 - μd δσ) + δσ λ′ μ1 nf (B + L)(u)`.
    fn transport_factor(&mut self, u: &ModeField, nl: f64, mud: f64, ds: f64) -> ModeField {
        let e = self.eval.euler_terms(u, self.cfg.period);
        let h = ds * nl;
        let mut out = if mud == 0.0 {
            u.clone()
        } else {
            u.scaled(1.0 - mud * ds)
        };
        for (o, e) in out.coefficients_mut().iter_mut().zip(e.coefficients()) {
            *o += e * h;
        }
        out
    }
}

/// One step of the dilated scheme from `s_l` to `s_{l+1}` in the window of
/// length `cfg.dilatation.window` anchored at `t₀`, using the Trotter split.
pub fn autocontrol_step(u: &ModeField, cfg: &SimConfig, t0: f64, l: usize) -> Result<ModeField> {
    let clock = DilatedClock::new(t0, cfg.dilatation.window, cfg.dt)?;
    AutoControl::new(cfg, clock, StepperKind::Trotter)?.step(u, l)
}
