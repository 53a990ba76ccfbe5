//! Subcommand implementations and their artifacts.
//!
//! | file                    | written by          |
//! |-------------------------|---------------------|
//! | `diagnostics.csv`       | run, certify        |
//! | `control.csv`           | run, certify        |
//! | `certificate.json`      | run (if enabled), certify |
//! | `convolution_table.csv` | certify, bounds     |
//! | `bounds.json`           | bounds              |
//! | `initial.{nsmf,txt}`, `initial.json` | gen    |
//! | `audit.json`            | audit               |
//! | `snapshots/step_*.{nsmf,txt}`, `final.{nsmf,txt}` | run, certify |

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nsmodes_core::snapshot::{self, SnapshotError};
use nsmodes_core::{
    convergence_audit, convolution_bound_check, elliptic_sum_constant, lattice_sum_constant, max_divergence,
    run_observed, sobolev_norm, zero_mode_increment_bound, AuditReport, CertSummary, ConvolutionTable, ExponentVerdict,
    LatticeSum, ModeField, RunOptions, RunOutput, SimError, StepCertifier, StepReport, ZeroModeBound,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::ConfigError;
use crate::scenario::Scenario;

/// Version tag of the CSV column layouts and JSON documents.
pub const SCHEMA_VERSION: u32 = 1;

pub const CONTROL_HEADER: [&str; 6] = [
    "step",
    "component",
    "increment",
    "cumulative",
    "increment_im",
    "cumulative_im",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("simulation: {0}")]
    Sim(SimError),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("audit failed: relative deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    Audit { deviation: f64, tolerance: f64 },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::CertificateViolated { .. } => CliError::Certificate(e.to_string()),
            other => CliError::Sim(other),
        }
    }
}

impl CliError {
    /// Process exit status: 2 config, 3 overflow, 4 certificate, 5 audit, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sim(SimError::OverflowDetected { .. }) => 3,
            CliError::Sim(SimError::InvalidParameter(_) | SimError::HorizonMismatch { .. }) => 2,
            CliError::Certificate(_) => 4,
            CliError::Audit { .. } => 5,
            _ => 1,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_diagnostics(path: &Path, reports: &[StepReport]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(StepReport::CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.step.to_string(),
            format!("{:?}", r.t),
            format!("{:?}", r.envelope_ratio),
            format!("{:?}", r.energy),
            format!("{:?}", r.max_div),
            format!("{:?}", r.h_m_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_control(path: &Path, out: &RunOutput) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CONTROL_HEADER)?;
    for rec in &out.ledger {
        w.write_record([
            rec.step.to_string(),
            rec.component.to_string(),
            format!("{:?}", rec.increment.re),
            format!("{:?}", rec.cumulative.re),
            format!("{:?}", rec.increment.im),
            format!("{:?}", rec.cumulative.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convolution_table(path: &Path, table: &ConvolutionTable) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["alpha".to_string(), "radius".into(), "lhs".into()];
    for v in &table.verdicts {
        header.push(format!("ratio[{}]", v.label));
        header.push(format!("rhs[{}]", v.label));
    }
    w.write_record(&header)?;
    let c2 = table.amplitude * table.amplitude;
    for row in &table.rows {
        let alpha: Vec<String> = row.alpha.iter().map(i64::to_string).collect();
        let mut rec = vec![alpha.join(" "), format!("{:?}", row.radius), format!("{:?}", row.lhs)];
        for (ratio, v) in row.ratios.iter().zip(&table.verdicts) {
            let w = if row.radius == 0.0 {
                1.0
            } else {
                1.0 + row.radius.powf(v.exponent)
            };
            rec.push(format!("{ratio:?}"));
            rec.push(format!("{:?}", table.reference_c * c2 / w));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// The two lattice-sum constants of the scenario's envelope.
#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    /// Exponent `n/2 + s`; drives the certificate and `choose_r_mu`.
    pub c_elliptic: LatticeSum,
    /// Exponent `n + s`, matching the data decay.
    pub c_data_decay: LatticeSum,
    pub r_mu: f64,
    pub zero_mode_bound: Option<ZeroModeBound>,
}

impl Constants {
    pub fn compute(sc: &Scenario) -> Result<Self, CliError> {
        let n = sc.sim.n;
        let s = sc.envelope.smoothness();
        let c_elliptic = elliptic_sum_constant(n, s, sc.certify.k_sum)?;
        let c_data_decay = lattice_sum_constant(n, n as f64 + s, sc.certify.k_sum)?;
        let p = &sc.sim.scaling;
        let r_mu = if p.is_identity() { 1.0 } else { p.r.powf(p.mu) };
        let zero_mode_bound = if sc.sim.nu > 0.0 {
            Some(zero_mode_increment_bound(
                &sc.envelope,
                c_elliptic.upper(),
                r_mu,
                sc.sim.nu,
            )?)
        } else {
            None
        };
        Ok(Constants {
            c_elliptic,
            c_data_decay,
            r_mu,
            zero_mode_bound,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeDoc {
    pub amplitude: f64,
    pub smoothness: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroModeDoc {
    /// Largest `|v_{i0}|` of the final field.
    pub final_max_abs: f64,
    pub max_increment: f64,
    pub bound_respected: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvolutionDoc {
    pub k_sum: usize,
    pub alpha_max: usize,
    pub reference_c: f64,
    pub verdicts: Vec<ExponentVerdict>,
}

/// `certificate.json`.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateDoc {
    pub schema: String,
    pub scenario: String,
    pub envelope: EnvelopeDoc,
    pub constants: Constants,
    pub steps: usize,
    pub summary: Option<CertSummary>,
    /// Error message of a strict abort.
    pub aborted: Option<String>,
    pub zero_modes: Option<ZeroModeDoc>,
    pub convolution: Option<ConvolutionDoc>,
    pub pass: bool,
}

/// What a scenario run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub output: Option<RunOutput>,
    pub certificate: Option<CertificateDoc>,
    pub dir: PathBuf,
}

fn envelope_doc(sc: &Scenario) -> EnvelopeDoc {
    EnvelopeDoc {
        amplitude: sc.envelope.amplitude(),
        smoothness: sc.envelope.smoothness(),
        n: sc.sim.n,
    }
}

fn convolution_table(sc: &Scenario, constants: &Constants) -> ConvolutionTable {
    convolution_bound_check(
        &sc.envelope,
        sc.certify.k_sum,
        sc.certify.alpha_max,
        constants.c_elliptic.upper(),
    )
}

fn convolution_doc(table: &ConvolutionTable) -> ConvolutionDoc {
    ConvolutionDoc {
        k_sum: table.k_sum,
        alpha_max: table.alpha_max,
        reference_c: table.reference_c,
        verdicts: table.verdicts.clone(),
    }
}

fn run_options(sc: &Scenario, certifier: Option<StepCertifier>) -> RunOptions {
    let mut opts = RunOptions::new(sc.sim.n);
    opts.kind = sc.stepper;
    opts.stride = sc.output.stride;
    opts.controlled = sc.controlled;
    opts.envelope = sc.envelope;
    opts.sobolev_m = sc.sobolev_m;
    opts.strict = sc.certify.strict;
    opts.certifier = certifier;
    opts
}

/// Runs the scenario and writes its artifacts into `sc.output.dir`.
///
/// `with_table` adds the convolution table (the `certify` subcommand).
/// Returns an error carrying the exit status on overflow, certificate
/// failure or I/O trouble; artifacts written up to that point stay on disk.
pub fn run_scenario(sc: &Scenario, base: &Path, with_table: bool) -> Result<RunSummary, CliError> {
    let dir = sc.output.dir.clone();
    prepare_dir(&dir)?;
    let f0 = sc.initial_field(base)?;
    let certifying = sc.certify.enabled || with_table;
    let constants = if certifying {
        Some(Constants::compute(sc)?)
    } else {
        None
    };
    let certifier = constants
        .as_ref()
        .map(|c| StepCertifier::new(sc.envelope, c.c_elliptic.upper(), &sc.sim));
    let opts = run_options(sc, certifier);

    let snap_dir = dir.join("snapshots");
    let ext = sc.output.snapshot_extension();
    if sc.output.snapshot_stride > 0 {
        fs::create_dir_all(&snap_dir)?;
    }
    let mut snap_err: Option<SnapshotError> = None;
    let result = run_observed(&f0, &sc.sim, sc.horizon, &opts, |step, _, v| {
        if sc.output.snapshot_stride > 0 && step % sc.output.snapshot_stride == 0 && snap_err.is_none() {
            let p = snap_dir.join(format!("step_{step:08}.{ext}"));
            if let Err(e) = snapshot::save(&p, v, sc.sim.period, sc.output.snapshot_format) {
                snap_err = Some(e);
            }
        }
    });
    if let Some(e) = snap_err {
        return Err(e.into());
    }

    let table = if with_table {
        constants.as_ref().map(|c| convolution_table(sc, c))
    } else {
        None
    };
    if let Some(t) = &table {
        write_convolution_table(&dir.join("convolution_table.csv"), t)?;
    }

    let out = match result {
        Ok(out) => out,
        Err(e) => {
            if let (Some(constants), SimError::CertificateViolated { .. }) = (&constants, &e) {
                let doc = CertificateDoc {
                    schema: format!("nsmodes-certificate/{SCHEMA_VERSION}"),
                    scenario: sc.name.clone(),
                    envelope: envelope_doc(sc),
                    constants: constants.clone(),
                    steps: sc.steps,
                    summary: None,
                    aborted: Some(e.to_string()),
                    zero_modes: None,
                    convolution: table.as_ref().map(convolution_doc),
                    pass: false,
                };
                write_json(&dir.join("certificate.json"), &doc)?;
            }
            return Err(e.into());
        }
    };

    write_diagnostics(&dir.join("diagnostics.csv"), &out.reports)?;
    write_control(&dir.join("control.csv"), &out)?;
    if sc.output.final_snapshot {
        snapshot::save(
            &dir.join(format!("final.{ext}")),
            &out.final_field,
            sc.sim.period,
            sc.output.snapshot_format,
        )?;
    }

    let certificate = constants.map(|constants| {
        let max_increment = out.ledger.iter().map(|r| r.increment.norm()).fold(0.0, f64::max);
        let final_max_abs = out
            .final_field
            .zero_modes()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let bound_respected = constants.zero_mode_bound.map(|b| max_increment <= b.per_step);
        let all_pass = out.certificates.as_ref().is_none_or(|s| s.all_pass);
        let pass = all_pass && bound_respected.unwrap_or(true) && (!sc.controlled || final_max_abs == 0.0);
        CertificateDoc {
            schema: format!("nsmodes-certificate/{SCHEMA_VERSION}"),
            scenario: sc.name.clone(),
            envelope: envelope_doc(sc),
            constants,
            steps: out.steps,
            summary: out.certificates.clone(),
            aborted: None,
            zero_modes: Some(ZeroModeDoc {
                final_max_abs,
                max_increment,
                bound_respected,
            }),
            convolution: table.as_ref().map(convolution_doc),
            pass,
        }
    });
    if let Some(doc) = &certificate {
        write_json(&dir.join("certificate.json"), doc)?;
        if !doc.pass {
            let detail = match out.certificates.as_ref().and_then(|s| s.first_failure.as_ref()) {
                Some((step, rep)) => format!(
                    "first failure at step {step}, ratio {:e}",
                    rep.worst_ratio.max(rep.before_ratio)
                ),
                None => "zero-mode control out of bounds".to_string(),
            };
            return Err(CliError::Certificate(detail));
        }
    }
    Ok(RunSummary {
        output: Some(out),
        certificate,
        dir,
    })
}

/// `bounds.json`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsDoc {
    pub schema: String,
    pub scenario: String,
    pub envelope: EnvelopeDoc,
    pub constants: Constants,
    pub convolution: ConvolutionDoc,
}

/// Writes the lattice-sum constants and the convolution table.
pub fn bounds(sc: &Scenario) -> Result<BoundsDoc, CliError> {
    let dir = &sc.output.dir;
    prepare_dir(dir)?;
    let constants = Constants::compute(sc)?;
    let table = convolution_table(sc, &constants);
    write_convolution_table(&dir.join("convolution_table.csv"), &table)?;
    let doc = BoundsDoc {
        schema: format!("nsmodes-bounds/{SCHEMA_VERSION}"),
        scenario: sc.name.clone(),
        envelope: envelope_doc(sc),
        constants,
        convolution: convolution_doc(&table),
    };
    write_json(&dir.join("bounds.json"), &doc)?;
    Ok(doc)
}

/// `initial.json`: admissibility checks of generated data.
#[derive(Clone, Debug, Serialize)]
pub struct DataReport {
    pub schema: String,
    pub scenario: String,
    pub data: crate::scenario::DataSpec,
    pub n: usize,
    pub cutoff: usize,
    pub hermitian_defect: f64,
    pub max_divergence: f64,
    pub zero_mode_max_abs: f64,
    pub envelope_ratio: f64,
    pub energy: f64,
    /// `‖h‖_{h^m}` for `m = 1` and `m = n/2 + s`.
    pub h1_norm: f64,
    pub h_top_norm: f64,
}

pub fn data_report(sc: &Scenario, f: &ModeField) -> DataReport {
    let n = sc.sim.n;
    DataReport {
        schema: format!("nsmodes-data/{SCHEMA_VERSION}"),
        scenario: sc.name.clone(),
        data: sc.data.clone(),
        n,
        cutoff: sc.sim.cutoff,
        hermitian_defect: f.hermitian_defect(),
        max_divergence: max_divergence(f, sc.sim.period),
        zero_mode_max_abs: f.zero_modes().iter().map(|z| z.norm()).fold(0.0, f64::max),
        envelope_ratio: nsmodes_core::decay_envelope_ratio(f, &sc.envelope),
        energy: nsmodes_core::energy(f),
        h1_norm: sobolev_norm(f, 1.0),
        h_top_norm: sobolev_norm(f, n as f64 / 2.0 + sc.envelope.smoothness()),
    }
}

/// Writes the initial field and its checks.
pub fn generate(sc: &Scenario, base: &Path) -> Result<DataReport, CliError> {
    let dir = &sc.output.dir;
    prepare_dir(dir)?;
    let f = sc.initial_field(base)?;
    let ext = sc.output.snapshot_extension();
    snapshot::save(
        &dir.join(format!("initial.{ext}")),
        &f,
        sc.sim.period,
        sc.output.snapshot_format,
    )?;
    let report = data_report(sc, &f);
    write_json(&dir.join("initial.json"), &report)?;
    Ok(report)
}

/// `audit.json`.
#[derive(Clone, Debug, Serialize)]
pub struct AuditDoc {
    pub schema: String,
    pub scenario: String,
    pub horizon: f64,
    pub report: AuditReport,
}

/// Step-halving audit; fails with exit status 5 above tolerance.
pub fn audit(sc: &Scenario, base: &Path) -> Result<AuditDoc, CliError> {
    let dir = &sc.output.dir;
    prepare_dir(dir)?;
    let f0 = sc.initial_field(base)?;
    let opts = run_options(sc, None);
    let report = convergence_audit(&f0, &sc.sim, sc.horizon, &opts, sc.audit_tolerance)?;
    let doc = AuditDoc {
        schema: format!("nsmodes-audit/{SCHEMA_VERSION}"),
        scenario: sc.name.clone(),
        horizon: sc.horizon,
        report,
    };
    write_json(&dir.join("audit.json"), &doc)?;
    if !doc.report.pass {
        return Err(CliError::Audit {
            deviation: doc.report.relative_deviation,
            tolerance: doc.report.tolerance,
        });
    }
    Ok(doc)
}

/// Prints a one-line summary of a finished run.
pub fn print_summary(mut w: impl Write, sc: &Scenario, summary: &RunSummary) -> io::Result<()> {
    if let Some(out) = &summary.output {
        writeln!(
            w,
            "{}: {} steps to t = {}, {} report rows in {}",
            sc.name,
            out.steps,
            out.final_time,
            out.reports.len(),
            summary.dir.display()
        )?;
    }
    if let Some(doc) = &summary.certificate {
        writeln!(w, "certificate: {}", if doc.pass { "pass" } else { "FAIL" })?;
    }
    Ok(())
}
