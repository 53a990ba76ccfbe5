//! Fourier–Galerkin mode system of the incompressible Navier–Stokes
//! equations on the `n`-torus, `n ≤ 3`.
//!
//! A velocity field is stored as its modes `v_{iα}` over the box
//! `|α|∞ ≤ K` ([`ModeField`]). The crate evaluates the truncated quadratic
//! terms ([`nonlinear`]), advances fields with explicit Euler or Trotter
//! steps ([`integrators`]), keeps zero modes under control and runs the
//! time-dilated comparison scheme ([`control`]), applies the scaling
//! transform ([`scaling`]) and checks decay envelopes step by step
//! ([`bounds`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting parameter guards
#![allow(clippy::manual_is_multiple_of)] // usize::is_multiple_of is newer than the MSRV

pub mod bounds;
pub mod config;
pub mod control;
pub mod data;
pub mod error;
pub mod integrators;
pub mod lattice;
pub mod nonlinear;
pub mod scaling;
pub mod snapshot;
pub mod spectral;

pub use bounds::{
    certify_step, convolution_bound_check, convolution_exponents, convolution_lhs, elliptic_sum_constant,
    lattice_sum_constant, step_growth_budget, zero_mode_increment_bound, BudgetParams, CertReport, ConvolutionRow,
    ConvolutionTable, DecayEnvelope, ExponentVerdict, LatticeSum, StepCertifier, ZeroModeBound,
};
pub use config::{
    ConvolutionMethod, DilatationParams, DilatationVariant, SimConfig, SplitOrder, StepperKind, ViscosityFactor,
};
pub use control::{
    autocontrol_step, control_increment, controlled_step, dilatation_coefficients, pullback, pushforward, AutoControl,
    ControlRecord, ControlState, DilatationCoeffs, DilatedClock,
};
pub use data::{heat_pair, make_envelope_data, make_even_zero_data, make_taylor_green, EnvelopeMode};
pub use error::{Result, SimError};
pub use integrators::{
    convergence_audit, damped_viscosity_factor, euler_step, run, run_observed, step_count, trotter_step, AuditReport,
    CertSummary, RunOptions, RunOutput, StepReport, Stepper,
};
pub use lattice::{
    decay_envelope_ratio, divergence_mode, energy, hermitian_symmetrize, iter_lattice, max_divergence, sobolev_norm,
    ModeBox, ModeField, MultiIndex,
};
pub use nonlinear::{
    burgers_mode, euler_matrix_entry, leray_mode, nonlinear_parts, pressure_mode, rhs_field, rhs_mode,
    NonlinearEvaluator, NonlinearParts,
};
pub use num_complex::Complex64;
pub use scaling::{choose_r_mu, scaled_coefficients, time_scale_map, ScalingParams};
