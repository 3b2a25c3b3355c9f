//! `twinflow` command-line entry point: one subcommand per pipeline
//! component, plus `run` and `validate` for whole manifests.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;
use twinflow::components::{self, Component, ComponentError, ErrorClass, ExecOptions};
use twinflow::ingest::MergeSpec;
use twinflow::runner::{self, Mode, RunError, RunOptions};
use twinflow::synth::{self, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "twinflow", about = "Sensor-fusion and modelling pipeline for animal digital twins")]
#[command(disable_version_flag = true, arg_required_else_help = true)]
struct Cli {
    /// Print the engine and component versions.
    #[arg(long, global = true)]
    version: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct Seed {
    /// Override the seed of random splits, forests and generators.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Merge sensor sources onto a common grid.
    Merge {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to merge_report.json next to --out.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Source files; defaults to those named in the merge spec.
        #[arg(long)]
        source: Vec<PathBuf>,
        #[command(flatten)]
        seed: Seed,
    },
    /// Quality-check a merged table.
    Qc {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to quality_report.json next to --out.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        seed: Seed,
    },
    /// Split a table into train and test sets.
    Split {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        seed: Seed,
    },
    /// Fit a model and save its artifact.
    Train {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: Seed,
    },
    /// Apply a saved model to a table.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: Seed,
    },
    /// Compute rmse, mae and r2 from a predictions file.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: Seed,
    },
    /// Write the markdown and JSON report.
    Report {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to --out with a .json extension.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write the reapplication manifest here.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        seed: Seed,
    },
    /// Execute a pipeline manifest and write run_record.json.
    Run {
        manifest: PathBuf,
        /// Directory paths resolve against; defaults to the manifest's directory.
        #[arg(long)]
        workdir: Option<PathBuf>,
        /// Run each step as a separate process of this binary.
        #[arg(long)]
        subprocess: bool,
        #[command(flatten)]
        seed: Seed,
    },
    /// Check a manifest and print every violation.
    Validate {
        manifest: PathBuf,
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
    /// Generate a synthetic scenario.
    Generate {
        #[arg(long, conflicts_with = "config")]
        kind: Option<ScenarioKind>,
        /// Scenario config JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory receiving every generated file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Individual generated files to write, matched by file name.
        #[arg(long, conflicts_with = "out")]
        output: Vec<PathBuf>,
        #[command(flatten)]
        seed: Seed,
    },
}

struct Failure {
    code: String,
    class: ErrorClass,
    message: String,
    details: Option<serde_json::Value>,
}

impl Failure {
    fn user(code: &str, message: impl Into<String>) -> Self {
        Failure { code: code.into(), class: ErrorClass::User, message: message.into(), details: None }
    }

    fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::User => 1,
            ErrorClass::Io => 2,
            ErrorClass::Internal => 3,
        }
    }
}

impl From<ComponentError> for Failure {
    fn from(e: ComponentError) -> Self {
        Failure { code: e.code(), class: e.class(), message: e.to_string(), details: None }
    }
}

fn sibling(of: &Path, name: &str) -> PathBuf {
    of.parent().unwrap_or(Path::new("")).join(name)
}

fn exec(c: Component, params: Option<PathBuf>, inputs: Vec<PathBuf>, outputs: Vec<PathBuf>, seed: &Seed) -> Result<(), Failure> {
    components::execute(c, params.as_deref(), &inputs, &outputs, ExecOptions { seed: seed.seed })?;
    for o in &outputs {
        log::info!("wrote {}", o.display());
    }
    Ok(())
}

fn versions() -> String {
    let mut s = format!("twinflow {}\n", twinflow::VERSION);
    for c in Component::ALL {
        s += &format!("  {}\n", c.version());
    }
    s
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Merge { spec, out, report, source, seed } => {
            let report = report.unwrap_or_else(|| sibling(&out, "merge_report.json"));
            let sources = if source.is_empty() {
                let s: MergeSpec = components::load_params(&spec)?;
                s.source_paths(spec.parent().unwrap_or(Path::new("")))
            } else {
                source
            };
            exec(Component::Merge, Some(spec), sources, vec![out, report], &seed)
        }
        Command::Qc { spec, input, out, report, seed } => {
            let report = report.unwrap_or_else(|| sibling(&out, "quality_report.json"));
            exec(Component::Quality, Some(spec), vec![input], vec![out, report], &seed)
        }
        Command::Split { spec, input, train, test, seed } => exec(Component::Split, Some(spec), vec![input], vec![train, test], &seed),
        Command::Train { spec, input, out, seed } => exec(Component::Train, Some(spec), vec![input], vec![out], &seed),
        Command::Predict { model, input, out, seed } => exec(Component::Predict, None, vec![model, input], vec![out], &seed),
        Command::Evaluate { input, out, seed } => exec(Component::Evaluate, None, vec![input], vec![out], &seed),
        Command::Report { spec, metrics, model, predictions, out, json, manifest, seed } => {
            let json = json.unwrap_or_else(|| out.with_extension("json"));
            let mut outputs = vec![out, json];
            outputs.extend(manifest);
            exec(Component::Report, spec, vec![metrics, model, predictions], outputs, &seed)
        }
        Command::Run { manifest, workdir, subprocess, seed } => {
            let m = runner::load_manifest(&manifest).map_err(|e| Failure::user("UnparseableManifest", e))?;
            let workdir = workdir.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
            let mode = if subprocess {
                let exe = std::env::current_exe()
                    .map_err(|e| Failure { code: "Io".into(), class: ErrorClass::Io, message: e.to_string(), details: None })?;
                Mode::Subprocess(exe)
            } else {
                Mode::InProcess
            };
            let opts = RunOptions { mode: Some(mode), exec: ExecOptions { seed: seed.seed }, after_step: None };
            match runner::run_pipeline(&m, &workdir, &opts) {
                Ok(rec) => {
                    log::info!("{} steps completed", rec.steps.len());
                    println!("{}", workdir.join(runner::RUN_RECORD_FILE).display());
                    Ok(())
                }
                Err(e) => Err(run_failure(e)),
            }
        }
        Command::Validate { manifest, workdir } => {
            let m = runner::load_manifest(&manifest).map_err(|e| Failure::user("UnparseableManifest", e))?;
            let workdir = workdir.unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
            let report = runner::validate_manifest(&m, &workdir);
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if report.is_valid() {
                Ok(())
            } else {
                Err(Failure::user("ValidationFailed", format!("{} violation(s)", report.violations.len())))
            }
        }
        Command::Generate { kind, config, out, output, seed } => {
            if let Some(cfg_path) = config.clone().filter(|_| out.is_none()) {
                if output.is_empty() {
                    return Err(Failure::user("Usage", "generate --config needs --out <dir> or --output files"));
                }
                return exec(Component::Generate, Some(cfg_path), vec![], output, &seed);
            }
            let mut cfg = match (kind, config) {
                (Some(k), None) => ScenarioConfig::new(k, 0),
                (None, Some(p)) => components::load_params(&p)?,
                _ => return Err(Failure::user("Usage", "generate needs --kind or --config")),
            };
            if let Some(s) = seed.seed {
                cfg.seed = s;
            }
            let out = out.ok_or_else(|| Failure::user("Usage", "generate --kind needs --out <dir>"))?;
            let files = synth::generate(&cfg).map_err(ComponentError::from)?;
            synth::write_files(&files, &out).map_err(|e| Failure {
                code: "Io".into(),
                class: ErrorClass::Io,
                message: format!("{}: {e}", out.display()),
                details: None,
            })?;
            log::info!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
    }
}

fn run_failure(e: RunError) -> Failure {
    match e {
        RunError::ValidationFailed(report) => Failure {
            details: serde_json::to_value(&report).ok(),
            ..Failure::user("ValidationFailed", format!("manifest is invalid: {} violation(s)", report.violations.len()))
        },
        RunError::StepFailed { step, cause, class, .. } => Failure {
            code: "StepFailed".into(),
            class,
            message: format!("step {step} failed: {cause}"),
            details: Some(json!({ "step": step })),
        },
        e @ RunError::WorkdirNotWritable(..) => {
            Failure { code: "WorkdirNotWritable".into(), class: ErrorClass::Io, message: e.to_string(), details: None }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .init();
    if cli.version {
        print!("{}", versions());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("no subcommand given; see --help");
        return ExitCode::from(1);
    };
    match dispatch(cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut err = json!({ "code": f.code, "class": f.class, "message": f.message });
            if let Some(d) = &f.details {
                err["details"] = d.clone();
            }
            eprintln!("{}", json!({ "error": err }));
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit_code())
        }
    }
}
