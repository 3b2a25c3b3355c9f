//! Manifest-driven pipeline runs with a hashed provenance record.
//!
//! Steps exchange data only through files in the working directory. Every
//! file a step reads or writes is digested; an input produced by an earlier
//! step must still carry the digest recorded when it was written.

mod manifest;

pub use manifest::{validate_manifest, PipelineManifest, Step, ValidationReport, Violation};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{self, Component, ErrorClass, ExecOptions};
use crate::digest;
use manifest::resolve;

pub const RUN_RECORD_FILE: &str = "run_record.json";
pub const RUN_RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("manifest is invalid: {} violation(s)", .0.violations.len())]
    ValidationFailed(ValidationReport),
    #[error("step {step} failed: {cause}")]
    StepFailed { step: usize, cause: String, class: ErrorClass, record: Box<RunRecord> },
    #[error("working directory {0} is not writable: {1}")]
    WorkdirNotWritable(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Completed,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub component: String,
    pub component_version: String,
    /// Logical clock ticks, not wall-clock time, so records are reproducible.
    pub start_marker: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_marker: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<FileDigest>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub engine_version: String,
    pub component_versions: BTreeMap<String, String>,
    pub digest_algorithm: String,
    pub prng: String,
    pub odba_form: String,
    pub mo2_form: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_override: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub manifest_name: String,
    pub manifest_sha256: String,
    pub environment: Environment,
    pub steps: Vec<StepRecord>,
    pub status: Status,
}

impl RunRecord {
    pub fn output_digests(&self) -> BTreeMap<String, String> {
        self.steps.iter().flat_map(|s| s.outputs.iter().map(|f| (f.path.clone(), f.sha256.clone()))).collect()
    }
}

/// How each step is executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    InProcess,
    /// Run the CLI binary at this path with the component's subcommand.
    Subprocess(PathBuf),
}

pub type StepHook<'a> = &'a dyn Fn(usize, &Path);

#[derive(Clone, Default)]
pub struct RunOptions<'a> {
    pub mode: Option<Mode>,
    pub exec: ExecOptions,
    /// Called after each completed step with its 1-based index and the
    /// working directory; lets tests tamper with intermediate files.
    pub after_step: Option<StepHook<'a>>,
}

pub fn environment(mode: &Mode, seed: Option<u64>) -> Environment {
    Environment {
        engine_version: crate::VERSION.to_string(),
        component_versions: Component::ALL.iter().map(|c| (c.id().to_string(), c.version())).collect(),
        digest_algorithm: digest::DIGEST_ALGORITHM.to_string(),
        prng: crate::rng::PRNG_ID.to_string(),
        odba_form: crate::sensors::ODBA_FORM.to_string(),
        mo2_form: crate::sensors::MO2_FORM.to_string(),
        mode: match mode {
            Mode::InProcess => "in_process".into(),
            Mode::Subprocess(_) => "subprocess".into(),
        },
        seed_override: seed,
    }
}

fn digest_of(workdir: &Path, raw: &str) -> Result<FileDigest, String> {
    let p = resolve(workdir, raw);
    digest::file_digest(&p).map(|sha256| FileDigest { path: raw.to_string(), sha256 }).map_err(|e| format!("{raw}: {e}"))
}

fn save_record(workdir: &Path, rec: &RunRecord) -> Result<(), RunError> {
    let path = workdir.join(RUN_RECORD_FILE);
    digest::write_atomic(&path, &components::to_json_bytes(rec))
        .map_err(|e| RunError::WorkdirNotWritable(workdir.display().to_string(), e.to_string()))
}

type StepFailure = (String, ErrorClass);

fn run_step(
    mode: &Mode,
    c: Component,
    params: Option<&Path>,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    exec: ExecOptions,
) -> Result<(), StepFailure> {
    match mode {
        Mode::InProcess => components::execute(c, params, inputs, outputs, exec).map_err(|e| (e.to_string(), e.class())),
        Mode::Subprocess(program) => {
            let out = Command::new(program)
                .args(components::cli_args(c, params, inputs, outputs, exec))
                .output()
                .map_err(|e| (format!("cannot start {}: {e}", program.display()), ErrorClass::Io))?;
            if out.status.success() {
                Ok(())
            } else {
                let stderr = String::from_utf8_lossy(&out.stderr);
                let first = stderr.lines().find(|l| !l.trim().is_empty()).unwrap_or("").to_string();
                let code = out.status.code().unwrap_or(-1);
                let class = match code {
                    2 => ErrorClass::Io,
                    1 => ErrorClass::User,
                    _ => ErrorClass::Internal,
                };
                Err((format!("subprocess exited with {code}: {first}"), class))
            }
        }
    }
}

/// Validates, then runs every step in order. The record is rewritten after
/// each step; on failure later steps do not run.
pub fn run_pipeline(m: &PipelineManifest, workdir: &Path, opts: &RunOptions<'_>) -> Result<RunRecord, RunError> {
    let report = validate_manifest(m, workdir);
    if !report.is_valid() {
        return Err(RunError::ValidationFailed(report));
    }
    let mode = opts.mode.clone().unwrap_or(Mode::InProcess);
    std::fs::create_dir_all(workdir).map_err(|e| RunError::WorkdirNotWritable(workdir.display().to_string(), e.to_string()))?;
    let mut rec = RunRecord {
        schema_version: RUN_RECORD_SCHEMA_VERSION,
        manifest_name: m.name.clone(),
        manifest_sha256: digest::sha256_hex(&m.to_json()),
        environment: environment(&mode, opts.exec.seed),
        steps: Vec::new(),
        status: Status::Running,
    };
    save_record(workdir, &rec)?;
    // digests of files written by earlier steps
    let mut produced: BTreeMap<PathBuf, String> = BTreeMap::new();
    let mut clock = 0u64;
    for (i, s) in m.steps.iter().enumerate() {
        let index = i + 1;
        let c = Component::parse(&s.component).expect("validated");
        clock += 1;
        let mut sr = StepRecord {
            index,
            component: c.id().to_string(),
            component_version: c.version(),
            start_marker: clock,
            end_marker: None,
            params: None,
            inputs: vec![],
            outputs: vec![],
            status: Status::Running,
            error: None,
        };
        if s.skip {
            sr.status = Status::Skipped;
            sr.end_marker = Some(clock);
            rec.steps.push(sr);
            save_record(workdir, &rec)?;
            continue;
        }
        let io = |e: String| (e, ErrorClass::Io);
        let outcome = (|| -> Result<(), StepFailure> {
            if let Some(p) = &s.params {
                sr.params = Some(digest_of(workdir, p).map_err(io)?);
            }
            for raw in &s.inputs {
                let d = digest_of(workdir, raw).map_err(io)?;
                if let Some(expected) = produced.get(&resolve(workdir, raw)) {
                    if *expected != d.sha256 {
                        sr.inputs.push(d);
                        let msg = format!(
                            "digest mismatch on `{raw}`: written as {expected}, now {}",
                            sr.inputs.last().unwrap().sha256
                        );
                        return Err((msg, ErrorClass::User));
                    }
                }
                sr.inputs.push(d);
            }
            let params = s.params.as_ref().map(|p| resolve(workdir, p));
            let inputs: Vec<PathBuf> = s.inputs.iter().map(|p| resolve(workdir, p)).collect();
            let outputs: Vec<PathBuf> = s.outputs.iter().map(|p| resolve(workdir, p)).collect();
            run_step(&mode, c, params.as_deref(), &inputs, &outputs, opts.exec)?;
            for raw in &s.outputs {
                let d = digest_of(workdir, raw).map_err(io)?;
                produced.insert(resolve(workdir, raw), d.sha256.clone());
                sr.outputs.push(d);
            }
            Ok(())
        })();
        clock += 1;
        sr.end_marker = Some(clock);
        match outcome {
            Ok(()) => {
                sr.status = Status::Completed;
                rec.steps.push(sr);
                save_record(workdir, &rec)?;
                if let Some(hook) = opts.after_step {
                    hook(index, workdir);
                }
            }
            Err((cause, class)) => {
                sr.status = Status::Failed;
                sr.error = Some(cause.clone());
                rec.steps.push(sr);
                rec.status = Status::Failed;
                save_record(workdir, &rec)?;
                return Err(RunError::StepFailed { step: index, cause, class, record: Box::new(rec) });
            }
        }
    }
    rec.status = Status::Completed;
    save_record(workdir, &rec)?;
    Ok(rec)
}

pub fn load_manifest(path: &Path) -> Result<PipelineManifest, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    PipelineManifest::from_json(&bytes).map_err(|e| format!("{}: unparseable manifest: {e}", path.display()))
}
