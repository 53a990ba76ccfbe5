use thiserror::Error;

use crate::lattice::MultiIndex;

/// Errors raised by the simulation and certification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite coefficient after step {step} (blow-up or time step too large)")]
    OverflowDetected { step: usize },

    #[error("certificate violated at step {step}: component {component}, mode {mode}, ratio {ratio}")]
    CertificateViolated {
        step: usize,
        component: usize,
        mode: MultiIndex,
        ratio: f64,
    },

    #[error("dilatation window exceeded: t - t0 = {offset} (window {window})")]
    WindowExceeded { offset: f64, window: f64 },

    #[error("horizon {horizon} is not an integer multiple of dt = {dt}")]
    HorizonMismatch { horizon: f64, dt: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
