//! Flat `key = value` configuration files with dotted keys.
//!
//! ```text
//! # heat oracle
//! name = heat
//! sim.nu = 1.0        # trailing comments are allowed
//! data.generator = heat_pair
//! ```
//!
//! Blank lines and `#` comments are ignored; each key may appear once.
//! Any key of [`SCHEMA`] can be overridden from the environment through
//! `NSMODES_` followed by the key in upper case with dots replaced by
//! underscores (`sim.nu` becomes `NSMODES_SIM_NU`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const ENV_PREFIX: &str = "NSMODES_";

/// Every accepted key with its default (empty: no default) and a summary.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("name", "scenario", "label copied into reports"),
    ("sim.n", "2", "spatial dimension, 1 to 3"),
    ("sim.period", "1", "period l of the torus"),
    ("sim.nu", "1", "viscosity"),
    ("sim.cutoff", "8", "mode cutoff K"),
    ("sim.dt", "1e-3", "time step"),
    ("sim.horizon", "0", "final time, an integer multiple of sim.dt"),
    ("sim.stepper", "trotter", "trotter | euler"),
    ("sim.controlled", "true", "reset zero modes and record the control"),
    ("sim.method", "auto", "auto | direct | spectral"),
    ("sim.viscosity_factor", "exponential", "exponential | linear"),
    (
        "sim.split_order",
        "nonlinear-first",
        "nonlinear-first | viscosity-first",
    ),
    ("sim.damped_nu", "", "attenuated viscosity in [0, nu]; default nu"),
    ("sim.lambda_prime", "1", "nonlinear prefactor of the dilated scheme"),
    ("scaling.r", "2", "scaling base r > 1"),
    ("scaling.lambda", "0", "amplitude exponent"),
    ("scaling.rho", "0", "time exponent"),
    ("scaling.mu", "0", "spatial exponent"),
    (
        "scaling.auto_r_mu",
        "false",
        "set r = choose_r_mu(...), mu = 1, lambda = rho = 0",
    ),
    ("dilatation.variant", "none", "none | local | global"),
    ("dilatation.theta", "1", "dilatation rate"),
    ("dilatation.t0", "0", "start of the first window"),
    ("dilatation.window", "0.5", "window length in (0, 1)"),
    (
        "data.generator",
        "envelope",
        "envelope | even_zero | taylor_green | heat_pair | snapshot",
    ),
    ("data.amplitude", "1", "envelope C, even-zero or Taylor-Green amplitude"),
    ("data.smoothness", "1.5", "envelope exponent s"),
    ("data.mode", "deterministic", "deterministic | random-phase"),
    ("data.seed", "0", "seed of random-phase data"),
    ("data.power", "", "decay power of even-zero data; default n/2 + 1.25"),
    ("data.coefficient_re", "1", "heat pair coefficient, real part"),
    ("data.coefficient_im", "0", "heat pair coefficient, imaginary part"),
    ("data.path", "", "snapshot file for the snapshot generator"),
    (
        "envelope.amplitude",
        "",
        "diagnostic/certificate envelope C; default data.amplitude",
    ),
    (
        "envelope.smoothness",
        "",
        "diagnostic/certificate envelope s; default data.smoothness",
    ),
    ("diag.sobolev_m", "1", "order m of the h_m_norm column"),
    ("certify.enabled", "false", "check the envelope certificate every step"),
    ("certify.strict", "false", "abort on the first failed certificate"),
    ("certify.k_sum", "32", "lattice-sum cutoff for the constants"),
    ("certify.alpha_max", "16", "largest |alpha| of the convolution table"),
    ("output.dir", "out", "artifact directory"),
    ("output.stride", "1", "diagnostics row stride"),
    ("output.snapshot_stride", "0", "snapshot stride, 0 for none"),
    ("output.final_snapshot", "true", "write the final field"),
    ("output.snapshot_format", "binary", "binary | text"),
    ("audit.tolerance", "1e-6", "relative deviation accepted by the audit"),
];

/// Where a value came from, for diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Env(String),
    Flag(&'static str),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Env(v) => write!(f, "environment {v}"),
            Origin::Flag(name) => write!(f, "flag --{name}"),
            Origin::Default => write!(f, "default"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{origin}: key '{key}' appears twice")]
    Duplicate { key: String, origin: Origin },
    #[error("{origin}: unknown key '{key}'")]
    UnknownKey { key: String, origin: Origin },
    #[error("{origin}: {key} = '{value}': {msg}")]
    BadValue {
        key: String,
        value: String,
        origin: Origin,
        msg: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config {path}: {msg}")]
    Read { path: String, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Parsed key-value pairs, before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn schema_default(key: &str) -> Option<&'static str> {
    SCHEMA.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d)
}

/// Environment variable overriding `key`.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected 'key = value', got '{content}'"),
                });
            };
            let key = key.trim();
            let valid = !key.is_empty()
                && key
                    .split('.')
                    .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
            if !valid {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("malformed key '{key}'"),
                });
            }
            let origin = Origin::Line(line);
            if cfg.entries.contains_key(key) {
                return Err(ConfigError::Duplicate {
                    key: key.to_string(),
                    origin,
                });
            }
            if schema_default(key).is_none() {
                return Err(ConfigError::UnknownKey {
                    key: key.to_string(),
                    origin,
                });
            }
            cfg.entries.insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    origin,
                },
            );
        }
        Ok(cfg)
    }

    /// Applies `NSMODES_*` overrides found through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for (key, _, _) in SCHEMA {
            let var = env_name(key);
            if let Some(value) = lookup(&var) {
                self.entries.insert(
                    key.to_string(),
                    Entry {
                        value: value.trim().to_string(),
                        origin: Origin::Env(var),
                    },
                );
            }
        }
    }

    /// Sets a value from a command-line flag.
    pub fn set_flag(&mut self, key: &str, flag: &'static str, value: impl ToString) {
        debug_assert!(schema_default(key).is_some(), "{key} not in schema");
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin: Origin::Flag(flag),
            },
        );
    }

    pub fn keys(&self) -> BTreeSet<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    fn lookup(&self, key: &str) -> (String, Origin) {
        match self.entries.get(key) {
            Some(e) => (e.value.clone(), e.origin.clone()),
            None => (schema_default(key).unwrap_or("").to_string(), Origin::Default),
        }
    }

    /// Raw text of `key`, `None` when unset and without default.
    pub fn text(&self, key: &str) -> Option<String> {
        let (v, _) = self.lookup(key);
        (!v.is_empty()).then_some(v)
    }

    /// Typed value of `key`, falling back to the schema default.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get_opt(key)? {
            Some(v) => Ok(v),
            None => Err(ConfigError::BadValue {
                key: key.to_string(),
                value: String::new(),
                origin: Origin::Default,
                msg: "a value is required".into(),
            }),
        }
    }

    /// Like [`Self::get`], with empty values read as `None`.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let (value, origin) = self.lookup(key);
        if value.is_empty() {
            return Ok(None);
        }
        value.parse().map(Some).map_err(|e: T::Err| ConfigError::BadValue {
            key: key.to_string(),
            value: value.clone(),
            origin,
            msg: e.to_string(),
        })
    }

    /// One of `choices`, case-insensitive.
    pub fn choice<'a>(&self, key: &str, choices: &[&'a str]) -> Result<&'a str, ConfigError> {
        let (value, origin) = self.lookup(key);
        let lower = value.to_ascii_lowercase();
        choices
            .iter()
            .copied()
            .find(|c| *c == lower)
            .ok_or_else(|| ConfigError::BadValue {
                key: key.to_string(),
                value,
                origin,
                msg: format!("expected one of {}", choices.join(", ")),
            })
    }

    /// Error for `key` carrying its origin.
    pub fn reject(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let (value, origin) = self.lookup(key);
        ConfigError::BadValue {
            key: key.to_string(),
            value,
            origin,
            msg: msg.into(),
        }
    }
}
