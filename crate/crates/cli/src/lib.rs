//! Batch front end: JSON experiment configs in, CSV/JSON artifacts and a
//! machine-readable report out.
//!
//! Exit codes: 0 when every check passes, 2 when a residual check fails or
//! the computation stops early, 1 for usage and config errors (nothing is
//! written in that case).

pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;

use crate::commands::Outcome;
use crate::config::{validate, ConfigError, Experiment};
use crate::report::{inputs_digest, Report};

#[derive(Debug, Parser)]
#[command(name = "loopsol", version, about = "Run a loopsol experiment from a JSON config")]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplies every residual tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RESIDUAL: i32 = 2;

fn prepare(args: &Args) -> Result<(config::Validated, PathBuf), ConfigError> {
    if !(args.tolerance_scale.is_finite() && args.tolerance_scale > 0.0) {
        return Err(ConfigError("--tolerance-scale must be finite and positive".into()));
    }
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| ConfigError(format!("{}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let v = validate(&text, base)?;
    let out = args
        .out
        .clone()
        .or_else(|| v.config.output.clone())
        .ok_or_else(|| ConfigError("no output directory: pass --out or set `output`".into()))?;
    Ok((v, out))
}

/// Run one experiment and return the process exit code.
pub fn run(args: &Args) -> i32 {
    let start = Instant::now();
    let (v, out_dir) = match prepare(args) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let tol = v.config.tolerances.scaled(args.tolerance_scale);
    let mut outcome = Outcome::default();
    if let Err(e) = commands::run(&v.ctx, &v.experiment, &tol, args.seed, &mut outcome) {
        outcome.fail(e);
    }
    let inputs: &[Vec<u8>] = match &v.experiment {
        Experiment::VerifyEquation { input_bytes, .. } => input_bytes,
        _ => &[],
    };
    let mut written = Vec::new();
    for (name, bytes) in &outcome.artifacts {
        if let Err(e) = std::fs::write(out_dir.join(name), bytes) {
            outcome.notes.push(format!("could not write {name}: {e}"));
            outcome.partial = true;
            outcome.pass.insert("completed".into(), false);
        } else {
            written.push(name.clone());
        }
    }
    let passed = outcome.passed();
    let report = Report {
        command: v.config.command.name().into(),
        context: v.config.context.clone(),
        inputs_digest: inputs_digest(&v.canonical, args.seed, args.tolerance_scale, inputs),
        seed: args.seed,
        tolerance_scale: args.tolerance_scale,
        tolerances: tol,
        residuals: outcome.residuals,
        pass: outcome.pass,
        passed,
        partial: outcome.partial,
        notes: outcome.notes,
        artifacts: written,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = loopsol::io::to_json_string(&report).expect("report serializes") + "\n";
    if let Err(e) = std::fs::write(out_dir.join("report.json"), text) {
        eprintln!("error: report.json: {e}");
        return EXIT_RESIDUAL;
    }
    for (name, ok) in &report.pass {
        let value = report.residuals.get(name).map(|r| loopsol::io::fmt_f64(*r)).unwrap_or_default();
        println!("{} {name} {value}", if *ok { "PASS" } else { "FAIL" });
    }
    if passed {
        EXIT_PASS
    } else {
        EXIT_RESIDUAL
    }
}

pub fn main_from_env() -> i32 {
    match Args::try_parse() {
        Ok(args) => run(&args),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            code
        }
    }
}
