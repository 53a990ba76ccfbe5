//! Interpreted scenario: simulation parameters, data and outputs.

use std::path::{Path, PathBuf};

use nsmodes_core::snapshot::{self, SnapshotFormat};
use nsmodes_core::{
    choose_r_mu, elliptic_sum_constant, heat_pair, make_envelope_data, make_even_zero_data, make_taylor_green,
    step_count, Complex64, ConvolutionMethod, DecayEnvelope, DilatationParams, DilatationVariant, EnvelopeMode,
    ModeField, ScalingParams, SimConfig, SplitOrder, StepperKind, ViscosityFactor,
};
use serde::Serialize;

use crate::config::{ConfigError, RawConfig};

/// Initial-data recipe.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum DataSpec {
    Envelope {
        amplitude: f64,
        smoothness: f64,
        mode: EnvelopeMode,
        seed: u64,
    },
    EvenZero {
        amplitude: f64,
        power: Option<f64>,
    },
    TaylorGreen {
        amplitude: f64,
    },
    HeatPair {
        re: f64,
        im: f64,
    },
    Snapshot {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifySpec {
    pub enabled: bool,
    pub strict: bool,
    pub k_sum: usize,
    pub alpha_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub stride: usize,
    pub snapshot_stride: usize,
    pub final_snapshot: bool,
    #[serde(serialize_with = "format_name")]
    pub snapshot_format: SnapshotFormat,
}

fn format_name<S: serde::Serializer>(f: &SnapshotFormat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match f {
        SnapshotFormat::Binary => "binary",
        SnapshotFormat::Text => "text",
    })
}

impl OutputSpec {
    pub fn snapshot_extension(&self) -> &'static str {
        match self.snapshot_format {
            SnapshotFormat::Binary => "nsmf",
            SnapshotFormat::Text => "txt",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub sim: SimConfig,
    pub horizon: f64,
    pub steps: usize,
    pub stepper: StepperKind,
    pub controlled: bool,
    pub data: DataSpec,
    /// Envelope of the diagnostics column and the certificate.
    pub envelope: DecayEnvelope,
    pub sobolev_m: f64,
    pub certify: CertifySpec,
    pub output: OutputSpec,
    pub audit_tolerance: f64,
    /// `r^μ` picked by `scaling.auto_r_mu`, if any.
    pub auto_r_mu: Option<f64>,
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

impl Scenario {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let n: usize = raw.get("sim.n")?;
        if !(1..=3).contains(&n) {
            return Err(raw.reject("sim.n", "dimension must be 1, 2 or 3"));
        }
        let mut sim = SimConfig::new(
            n,
            raw.get("sim.period")?,
            raw.get("sim.nu")?,
            raw.get("sim.cutoff")?,
            raw.get("sim.dt")?,
        );
        sim.method = match raw.choice("sim.method", &["auto", "direct", "spectral"])? {
            "direct" => ConvolutionMethod::Direct,
            "spectral" => ConvolutionMethod::Spectral,
            _ => ConvolutionMethod::Auto,
        };
        sim.viscosity_factor = match raw.choice("sim.viscosity_factor", &["exponential", "linear"])? {
            "linear" => ViscosityFactor::Linear,
            _ => ViscosityFactor::Exponential,
        };
        sim.split_order = match raw.choice("sim.split_order", &["nonlinear-first", "viscosity-first"])? {
            "viscosity-first" => SplitOrder::ViscosityFirst,
            _ => SplitOrder::NonlinearFirst,
        };
        sim.damped_nu = raw.get_opt("sim.damped_nu")?;
        sim.lambda_prime = raw.get("sim.lambda_prime")?;
        sim.dilatation = DilatationParams {
            theta: raw.get("dilatation.theta")?,
            t0: raw.get("dilatation.t0")?,
            window: raw.get("dilatation.window")?,
            variant: match raw.choice("dilatation.variant", &["none", "local", "global"])? {
                "local" => DilatationVariant::Local,
                "global" => DilatationVariant::Global,
                _ => DilatationVariant::None,
            },
        };
        let stepper = match raw.choice("sim.stepper", &["trotter", "euler"])? {
            "euler" => StepperKind::Euler,
            _ => StepperKind::Trotter,
        };

        let data_amp: f64 = raw.get("data.amplitude")?;
        let data_s: f64 = raw.get("data.smoothness")?;
        let data = match raw.choice(
            "data.generator",
            &["envelope", "even_zero", "taylor_green", "heat_pair", "snapshot"],
        )? {
            "envelope" => DataSpec::Envelope {
                amplitude: data_amp,
                smoothness: data_s,
                mode: match raw.choice("data.mode", &["deterministic", "random-phase"])? {
                    "random-phase" => EnvelopeMode::RandomPhase,
                    _ => EnvelopeMode::Deterministic,
                },
                seed: raw.get("data.seed")?,
            },
            "even_zero" => DataSpec::EvenZero {
                amplitude: data_amp,
                power: raw.get_opt("data.power")?,
            },
            "taylor_green" => DataSpec::TaylorGreen { amplitude: data_amp },
            "heat_pair" => DataSpec::HeatPair {
                re: raw.get("data.coefficient_re")?,
                im: raw.get("data.coefficient_im")?,
            },
            _ => match raw.text("data.path") {
                Some(p) => DataSpec::Snapshot { path: PathBuf::from(p) },
                None => return Err(raw.reject("data.path", "the snapshot generator needs a path")),
            },
        };

        let env_amp = raw.get_opt("envelope.amplitude")?.unwrap_or(data_amp);
        let env_s = raw.get_opt("envelope.smoothness")?.unwrap_or(data_s);
        let envelope = DecayEnvelope::new(env_amp, env_s, n).map_err(invalid)?;

        let certify = CertifySpec {
            enabled: raw.get("certify.enabled")?,
            strict: raw.get("certify.strict")?,
            k_sum: raw.get("certify.k_sum")?,
            alpha_max: raw.get("certify.alpha_max")?,
        };

        let mut auto_r_mu = None;
        if raw.get("scaling.auto_r_mu")? {
            let c = elliptic_sum_constant(n, env_s, certify.k_sum).map_err(invalid)?.upper();
            let r_mu = choose_r_mu(sim.nu, env_amp.max(1.0), c, n)
                .map_err(|e| raw.reject("scaling.auto_r_mu", e.to_string()))?;
            sim.scaling = ScalingParams::spatial(r_mu).map_err(invalid)?;
            auto_r_mu = Some(r_mu);
        } else {
            sim.scaling = ScalingParams {
                r: raw.get("scaling.r")?,
                lambda: raw.get("scaling.lambda")?,
                rho: raw.get("scaling.rho")?,
                mu: raw.get("scaling.mu")?,
            };
        }
        sim.validate().map_err(invalid)?;

        let horizon: f64 = raw.get("sim.horizon")?;
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(raw.reject("sim.horizon", "must be finite and >= 0"));
        }
        let steps = step_count(horizon, sim.dt).map_err(|e| raw.reject("sim.horizon", e.to_string()))?;

        let stride: usize = raw.get("output.stride")?;
        if stride == 0 {
            return Err(raw.reject("output.stride", "must be >= 1"));
        }
        let output = OutputSpec {
            dir: PathBuf::from(raw.get::<String>("output.dir")?),
            stride,
            snapshot_stride: raw.get("output.snapshot_stride")?,
            final_snapshot: raw.get("output.final_snapshot")?,
            snapshot_format: match raw.choice("output.snapshot_format", &["binary", "text"])? {
                "text" => SnapshotFormat::Text,
                _ => SnapshotFormat::Binary,
            },
        };

        Ok(Scenario {
            name: raw.get("name")?,
            sim,
            horizon,
            steps,
            stepper,
            controlled: raw.get("sim.controlled")?,
            data,
            envelope,
            sobolev_m: raw.get("diag.sobolev_m")?,
            certify,
            output,
            audit_tolerance: raw.get("audit.tolerance")?,
            auto_r_mu,
        })
    }

    /// Builds the initial field. Relative snapshot paths resolve against `base`.
    pub fn initial_field(&self, base: &Path) -> Result<ModeField, ConfigError> {
        let n = self.sim.n;
        let k = self.sim.cutoff;
        let field = match &self.data {
            DataSpec::Envelope {
                amplitude,
                smoothness,
                mode,
                seed,
            } => {
                let env = DecayEnvelope::new(*amplitude, *smoothness, n).map_err(invalid)?;
                make_envelope_data(&env, *seed, k, *mode)
            }
            DataSpec::EvenZero { amplitude, power } => {
                make_even_zero_data(n, k, *amplitude, *power).map_err(invalid)?
            }
            DataSpec::TaylorGreen { amplitude } => make_taylor_green(n, k, *amplitude).map_err(invalid)?,
            DataSpec::HeatPair { re, im } => heat_pair(n, k, Complex64::new(*re, *im)).map_err(invalid)?,
            DataSpec::Snapshot { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let snap =
                    snapshot::load(&full).map_err(|e| ConfigError::Invalid(format!("{}: {e}", full.display())))?;
                if snap.field.dim() != n || snap.field.cutoff() != k {
                    return Err(ConfigError::Invalid(format!(
                        "snapshot has n = {}, K = {}; scenario expects n = {n}, K = {k}",
                        snap.field.dim(),
                        snap.field.cutoff()
                    )));
                }
                snap.field
            }
        };
        Ok(field)
    }
}
