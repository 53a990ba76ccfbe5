//! Time stepping: explicit Euler and the Trotter-factored step, plus the run
//! loop and the step-halving audit.

use serde::{Deserialize, Serialize};

use crate::bounds::{CertReport, DecayEnvelope, StepCertifier};
use crate::config::{DilatationVariant, SimConfig, SplitOrder, StepperKind, ViscosityFactor};
use crate::control::{self, ControlRecord, ControlState, DilatedClock};
use crate::error::{Result, SimError};
use crate::lattice::{
    decay_envelope_ratio, energy, max_divergence, sobolev_norm, wavenumber_sq, ModeBox, ModeField, MultiIndex,
};
use crate::nonlinear::{rhs_with, NonlinearEvaluator};

/// `exp(-ν̃ |k_α|² δt)` with `|k_α|² = Σ_j 4π² α_j² / l²`, for `0 ≤ ν̃ ≤ ν`.
pub fn damped_viscosity_factor(alpha: &MultiIndex, nu_tilde: f64, nu: f64, dt: f64, l: f64) -> Result<f64> {
    if !(0.0..=nu).contains(&nu_tilde) {
        return Err(SimError::InvalidParameter(format!(
            "damped viscosity {nu_tilde} outside [0, {nu}]"
        )));
    }
    Ok((-(nu_tilde * wavenumber_sq(alpha, l)) * dt).exp())
}

/// Reusable stepper bound to one configuration.
pub struct Stepper {
    cfg: SimConfig,
    kind: StepperKind,
    eval: NonlinearEvaluator,
    /// Viscosity factor per box offset.
    factors: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: &SimConfig, kind: StepperKind) -> Result<Self> {
        cfg.validate()?;
        cfg.check_step_size();
        let geometry = ModeBox::new(cfg.n, cfg.cutoff);
        let (visc, _) = cfg.scaling.coefficients();
        let nu_tilde = cfg.damped_nu.unwrap_or(cfg.nu);
        let damped_rates: Vec<f64> = geometry
            .iter()
            .map(|a| (visc * nu_tilde) * wavenumber_sq(&a, cfg.period))
            .collect();
        let factors = viscosity_factors(&damped_rates, cfg.dt, cfg.viscosity_factor);
        Ok(Stepper {
            cfg: cfg.clone(),
            kind,
            eval: NonlinearEvaluator::for_config(cfg),
            factors,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn kind(&self) -> StepperKind {
        self.kind
    }

    pub fn geometry(&self) -> ModeBox {
        ModeBox::new(self.cfg.n, self.cfg.cutoff)
    }

    /// Burgers plus Leray for every mode (no scaling multiplier).
    pub fn euler_terms(&mut self, f: &ModeField) -> ModeField {
        self.eval.euler_terms(f, self.cfg.period)
    }

    /// One step of the configured kind; `step` only labels errors.
    pub fn step_indexed(&mut self, f: &ModeField, step: usize) -> Result<ModeField> {
        self.check_shape(f)?;
        let out = match self.kind {
            StepperKind::Euler => {
                let rhs = rhs_with(&mut self.eval, f, &self.cfg);
                let dt = self.cfg.dt;
                let mut out = f.clone();
                for (o, r) in out.coefficients_mut().iter_mut().zip(rhs.coefficients()) {
                    *o += r * dt;
                }
                out
            }
            StepperKind::Trotter => match self.cfg.split_order {
                SplitOrder::NonlinearFirst => {
                    let w = self.nonlinear_factor(f);
                    apply_diagonal(w, &self.factors)
                }
                SplitOrder::ViscosityFirst => {
                    let w = apply_diagonal(f.clone(), &self.factors);
                    self.nonlinear_factor(&w)
                }
            },
        };
        if !out.is_finite() {
            return Err(SimError::OverflowDetected { step });
        }
        Ok(out)
    }

    pub fn step(&mut self, f: &ModeField) -> Result<ModeField> {
        self.step_indexed(f, 0)
    }

    /// `v + δt · nf · (B + L)(v)`.
    fn nonlinear_factor(&mut self, f: &ModeField) -> ModeField {
        let (_, nonlin) = self.cfg.scaling.coefficients();
        let e = self.eval.euler_terms(f, self.cfg.period);
        let h = self.cfg.dt * nonlin;
        let mut out = f.clone();
        for (o, e) in out.coefficients_mut().iter_mut().zip(e.coefficients()) {
            *o += e * h;
        }
        out
    }

    fn check_shape(&self, f: &ModeField) -> Result<()> {
        if f.dim() != self.cfg.n || f.cutoff() != self.cfg.cutoff {
            return Err(SimError::DimensionMismatch(format!(
                "field has n = {}, K = {}; configuration has n = {}, K = {}",
                f.dim(),
                f.cutoff(),
                self.cfg.n,
                self.cfg.cutoff
            )));
        }
        Ok(())
    }
}

pub(crate) fn viscosity_factors(rates: &[f64], dt: f64, kind: ViscosityFactor) -> Vec<f64> {
    rates
        .iter()
        .map(|r| match kind {
            ViscosityFactor::Exponential => (-(r * dt)).exp(),
            ViscosityFactor::Linear => 1.0 - r * dt,
        })
        .collect()
}

/// Multiplies every component by a per-mode factor.
pub(crate) fn apply_diagonal(mut f: ModeField, factors: &[f64]) -> ModeField {
    for i in 0..f.n_components() {
        for (z, d) in f.component_mut(i).iter_mut().zip(factors) {
            *z *= *d;
        }
    }
    f
}

/// One forward-Euler step `v + δt · rhs(v)`.
pub fn euler_step(f: &ModeField, cfg: &SimConfig) -> Result<ModeField> {
    Stepper::new(cfg, StepperKind::Euler)?.step(f)
}

/// One Trotter step: Euler-term factor, then the viscosity factor (order and
/// factor form follow `cfg.split_order` and `cfg.viscosity_factor`).
pub fn trotter_step(f: &ModeField, cfg: &SimConfig) -> Result<ModeField> {
    Stepper::new(cfg, StepperKind::Trotter)?.step(f)
}

/// Diagnostics of one reported step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub pre_ratio: f64,
    pub envelope_ratio: f64,
    pub max_change: f64,
    pub max_div: f64,
    pub energy: f64,
    pub h_m_norm: f64,
}

impl StepReport {
    /// Column order of the diagnostics CSV.
    pub const CSV_HEADER: [&'static str; 6] = ["step", "t", "envelope_ratio", "energy", "max_div", "h_m_norm"];
}

/// What a run records and enforces.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub kind: StepperKind,
    /// Report every `stride` steps (the last step is always reported).
    pub stride: usize,
    /// Reset zero modes after each step and keep the control ledger.
    pub controlled: bool,
    /// Envelope used for the `envelope_ratio` column.
    pub envelope: DecayEnvelope,
    /// Sobolev order of the `h_m_norm` column.
    pub sobolev_m: f64,
    /// Certificate checked after every step.
    pub certifier: Option<StepCertifier>,
    /// Abort on the first failed certificate.
    pub strict: bool,
}

impl RunOptions {
    pub fn new(n: usize) -> Self {
        RunOptions {
            kind: StepperKind::Trotter,
            stride: 1,
            controlled: true,
            envelope: DecayEnvelope::new(1.0, 1.5, n).expect("valid default envelope"),
            sobolev_m: 1.0,
            certifier: None,
            strict: false,
        }
    }
}

/// Aggregate of the per-step certificates of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CertSummary {
    pub steps_checked: usize,
    pub steps_passed: usize,
    pub all_pass: bool,
    pub worst_ratio: f64,
    pub worst_step: usize,
    pub first_failure: Option<(usize, CertReport)>,
    pub damping_dominated_steps: usize,
}

impl CertSummary {
    fn record(&mut self, step: usize, rep: &CertReport) {
        self.steps_checked += 1;
        if rep.pass {
            self.steps_passed += 1;
        } else if self.first_failure.is_none() {
            self.first_failure = Some((step, rep.clone()));
        }
        if rep.damping_dominated {
            self.damping_dominated_steps += 1;
        }
        let r = rep.worst_ratio.max(rep.before_ratio);
        if r > self.worst_ratio || self.steps_checked == 1 {
            self.worst_ratio = r;
            self.worst_step = step;
        }
        self.all_pass = self.steps_passed == self.steps_checked;
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub steps: usize,
    pub final_time: f64,
    pub reports: Vec<StepReport>,
    pub final_field: ModeField,
    pub control: ControlState,
    pub ledger: Vec<ControlRecord>,
    pub certificates: Option<CertSummary>,
}

/// Number of steps `N` with `N δt = T`, or an error if `T` is not a multiple.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon >= 0.0 && horizon.is_finite()) || !(dt > 0.0) {
        return Err(SimError::HorizonMismatch { horizon, dt });
    }
    let n = (horizon / dt).round();
    let tol = 4.0 * f64::EPSILON * n.max(1.0) * dt.max(horizon);
    if (n * dt - horizon).abs() > tol {
        return Err(SimError::HorizonMismatch { horizon, dt });
    }
    Ok(n as usize)
}

fn report(
    step: usize,
    t: f64,
    before: &ModeField,
    after: &ModeField,
    cfg: &SimConfig,
    opts: &RunOptions,
) -> StepReport {
    StepReport {
        step,
        t,
        pre_ratio: decay_envelope_ratio(before, &opts.envelope),
        envelope_ratio: decay_envelope_ratio(after, &opts.envelope),
        max_change: after.max_distance(before),
        max_div: max_divergence(after, cfg.period),
        energy: energy(after),
        h_m_norm: sobolev_norm(after, opts.sobolev_m),
    }
}

/// Advances `f0` over `horizon = N δt`.
///
/// With a dilatation variant set, the field is advanced through chained
/// windows of the dilated scheme and pulled back after every step.
pub fn run(f0: &ModeField, cfg: &SimConfig, horizon: f64, opts: &RunOptions) -> Result<RunOutput> {
    run_observed(f0, cfg, horizon, opts, |_, _, _| {})
}

/// [`run`] with a callback receiving `(step, t, field)` after every accepted step.
pub fn run_observed<F>(
    f0: &ModeField,
    cfg: &SimConfig,
    horizon: f64,
    opts: &RunOptions,
    mut observe: F,
) -> Result<RunOutput>
where
    F: FnMut(usize, f64, &ModeField),
{
    cfg.validate()?;
    let total = step_count(horizon, cfg.dt)?;
    let mut stepper = Stepper::new(cfg, opts.kind)?;
    stepper.check_shape(f0)?;
    let mut state = RunState::new(f0, cfg, opts);
    if cfg.dilatation.variant == DilatationVariant::None {
        let mut v = f0.clone();
        for step in 1..=total {
            let next = stepper.step_indexed(&v, step)?;
            let t = step as f64 * cfg.dt;
            v = state.finish_step(step, t, total, &v, next)?;
            observe(step, t, &v);
        }
        return Ok(state.into_output(v, total, total as f64 * cfg.dt));
    }

    let d = cfg.dilatation;
    let mut v = f0.clone();
    let mut step = 0usize;
    let mut t0 = 0.0f64;
    let mut remaining = total;
    let per_window = step_count(d.window, cfg.dt)
        .unwrap_or_else(|_| (d.window / cfg.dt).floor() as usize)
        .max(1);
    let mut t = 0.0;
    while remaining > 0 {
        let m = per_window.min(remaining);
        let clock = DilatedClock::new(t0, m as f64 * cfg.dt, cfg.dt)?;
        let mut window_cfg = cfg.clone();
        window_cfg.dilatation.t0 = t0;
        let mut auto = control::AutoControl::new(&window_cfg, clock, opts.kind)?;
        let mut u = auto.pushforward(&v, 0)?;
        for l in 0..m {
            step += 1;
            let u_next = auto.step_indexed(&u, l, step)?;
            t = clock.time(l + 1);
            let v_next = auto.pullback(&u_next, l + 1)?;
            v = state.finish_step(step, t, total, &v, v_next)?;
            observe(step, t, &v);
            u = if opts.controlled {
                auto.pushforward(&v, l + 1)?
            } else {
                u_next
            };
        }
        t0 = t;
        remaining -= m;
    }
    Ok(state.into_output(v, total, t))
}

struct RunState<'a> {
    cfg: &'a SimConfig,
    opts: &'a RunOptions,
    control: ControlState,
    ledger: Vec<ControlRecord>,
    reports: Vec<StepReport>,
    certs: Option<CertSummary>,
}

impl<'a> RunState<'a> {
    fn new(f0: &ModeField, cfg: &'a SimConfig, opts: &'a RunOptions) -> Self {
        RunState {
            cfg,
            opts,
            control: ControlState::new(f0.n_components()),
            ledger: Vec::new(),
            reports: Vec::new(),
            certs: opts.certifier.as_ref().map(|_| CertSummary {
                all_pass: true,
                ..CertSummary::default()
            }),
        }
    }

    fn finish_step(
        &mut self,
        step: usize,
        t: f64,
        total: usize,
        before: &ModeField,
        mut after: ModeField,
    ) -> Result<ModeField> {
        if self.opts.controlled {
            control::absorb_zero_modes(before, &mut after, &mut self.control);
            self.ledger.extend(self.control.records(step));
        }
        if let (Some(cert), Some(summary)) = (&self.opts.certifier, &mut self.certs) {
            let rep = cert.certify(before, &after);
            summary.record(step, &rep);
            if !rep.pass && self.opts.strict {
                let mode = MultiIndex::new(&rep.worst_mode);
                return Err(SimError::CertificateViolated {
                    step,
                    component: rep.worst_component,
                    mode,
                    ratio: rep.worst_ratio.max(rep.before_ratio),
                });
            }
        }
        let stride = self.opts.stride.max(1);
        if step % stride == 0 || step == total {
            self.reports.push(report(step, t, before, &after, self.cfg, self.opts));
        }
        Ok(after)
    }

    fn into_output(self, v: ModeField, steps: usize, final_time: f64) -> RunOutput {
        RunOutput {
            steps,
            final_time,
            reports: self.reports,
            final_field: v,
            control: self.control,
            ledger: self.ledger,
            certificates: self.certs,
        }
    }
}

/// Outcome of [`convergence_audit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dt: f64,
    /// `‖v_{δt} - v_{δt/2}‖₂` at the horizon.
    pub deviation: f64,
    /// `deviation / ‖v_{δt/2}‖₂`.
    pub relative_deviation: f64,
    /// `‖v_{δt/2} - v_{δt/4}‖₂`.
    pub fine_deviation: f64,
    /// `log2(deviation / fine_deviation)`.
    pub observed_order: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Re-runs at `δt/2` and `δt/4` and compares final fields.
pub fn convergence_audit(
    f0: &ModeField,
    cfg: &SimConfig,
    horizon: f64,
    opts: &RunOptions,
    tolerance: f64,
) -> Result<AuditReport> {
    let mut quiet = opts.clone();
    quiet.stride = usize::MAX;
    quiet.certifier = None;
    let finals: Vec<ModeField> = [1.0, 0.5, 0.25]
        .iter()
        .map(|h| run(f0, &cfg.clone().with_dt(cfg.dt * h), horizon, &quiet).map(|o| o.final_field))
        .collect::<Result<_>>()?;
    let deviation = finals[0].l2_distance(&finals[1]);
    let fine_deviation = finals[1].l2_distance(&finals[2]);
    let scale = finals[1].l2_norm();
    let relative_deviation = if scale > 0.0 { deviation / scale } else { deviation };
    let observed_order = if deviation > 0.0 && fine_deviation > 0.0 {
        (deviation / fine_deviation).log2()
    } else {
        f64::NAN
    };
    Ok(AuditReport {
        dt: cfg.dt,
        deviation,
        relative_deviation,
        fine_deviation,
        observed_order,
        tolerance,
        pass: relative_deviation <= tolerance,
    })
}
