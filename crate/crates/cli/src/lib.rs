//! Scenario files, data generation and artifact output for `nsmodes`.

pub mod config;
pub mod runner;
pub mod scenario;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{ConfigError, RawConfig};
pub use runner::CliError;
pub use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(
    name = "nsmodes",
    version,
    about = "Truncated Navier-Stokes mode system: runs, certificates and bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write diagnostics.
    Run(Common),
    /// Run with the envelope certificate enabled and write the convolution table.
    Certify(Common),
    /// Lattice-sum constants and convolution inequality tables.
    Bounds(Common),
    /// Generate the initial field and its admissibility checks.
    Gen(Common),
    /// Step-halving consistency audit.
    Audit(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Run(c) | Command::Certify(c) | Command::Bounds(c) | Command::Gen(c) | Command::Audit(c) => c,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Scenario file; without one every key takes its default.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Artifact directory (overrides output.dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Data seed (overrides data.seed).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Diagnostics stride (overrides output.stride).
    #[arg(long, value_name = "N")]
    pub stride: Option<usize>,
    /// Abort at the first failed certificate (sets certify.strict).
    #[arg(long)]
    pub strict_certify: bool,
}

/// Reads the scenario: file, then `NSMODES_*` variables from `env`, then flags.
///
/// Also returns the directory relative snapshot paths resolve against.
pub fn load_scenario(common: &Common, env: impl Fn(&str) -> Option<String>) -> Result<(Scenario, PathBuf), CliError> {
    let (mut raw, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
                path: path.display().to_string(),
                msg: e.to_string(),
            })?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (RawConfig::parse(&text)?, base)
        }
        None => (RawConfig::default(), PathBuf::new()),
    };
    raw.apply_env(env);
    if let Some(dir) = &common.out {
        raw.set_flag("output.dir", "out", dir.display());
    }
    if let Some(seed) = common.seed {
        raw.set_flag("data.seed", "seed", seed);
    }
    if let Some(stride) = common.stride {
        raw.set_flag("output.stride", "stride", stride);
    }
    if common.strict_certify {
        raw.set_flag("certify.strict", "strict-certify", true);
        raw.set_flag("certify.enabled", "strict-certify", true);
    }
    Ok((Scenario::from_raw(&raw)?, base))
}

/// Executes one command, printing a short summary to `out`.
pub fn execute(cmd: &Command, env: impl Fn(&str) -> Option<String>, mut out: impl Write) -> Result<(), CliError> {
    let (sc, base) = load_scenario(cmd.common(), env)?;
    match cmd {
        Command::Run(_) | Command::Certify(_) => {
            let summary = runner::run_scenario(&sc, &base, matches!(cmd, Command::Certify(_)))?;
            runner::print_summary(&mut out, &sc, &summary)?;
        }
        Command::Bounds(_) => {
            let doc = runner::bounds(&sc)?;
            writeln!(
                out,
                "c (n/2+s) = {:.6}, c (n+s) = {:.6}",
                doc.constants.c_elliptic.upper(),
                doc.constants.c_data_decay.upper()
            )?;
            for v in &doc.convolution.verdicts {
                let verdict = if v.bounded { "bounded" } else { "grows" };
                writeln!(
                    out,
                    "exponent {}: sup ratio {:.4e}, slope {:.3} ({verdict})",
                    v.label, v.empirical_c, v.growth_slope
                )?;
            }
        }
        Command::Gen(_) => {
            let r = runner::generate(&sc, &base)?;
            writeln!(
                out,
                "envelope ratio {:.6}, max divergence {:e}, hermitian defect {:e}",
                r.envelope_ratio, r.max_divergence, r.hermitian_defect
            )?;
        }
        Command::Audit(_) => {
            let doc = runner::audit(&sc, &base)?;
            writeln!(
                out,
                "relative deviation {:e}, observed order {:.3}: pass",
                doc.report.relative_deviation, doc.report.observed_order
            )?;
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the exit status.
pub fn main_with<I, T>(args: I, env: impl Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command, env, std::io::stdout()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
