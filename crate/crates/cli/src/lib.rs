//! Batch front end: reads a problem from JSON, runs one solver or verification
//! suite and produces a deterministic JSON report with pass/fail verdicts.

mod commands;
mod report;
mod sweep;

use std::path::PathBuf;

use serde::Serialize;
use signet_core::{Error, ErrorClass};

pub use report::{format_csv_float, Envelope, ErrorRecord, Outcome, Verdict};

/// Default cap on every input dimension, overridable through `SIGNET_MAX_DIM`.
pub const DEFAULT_MAX_DIM: usize = 64;
/// Sample grid for sampled strip certificates (real × imaginary).
pub const STRIP_SAMPLES: (usize, usize) = (21, 81);
pub const DEFAULT_KS: [usize; 4] = [16, 32, 64, 128];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveSylvester,
    SolveGeneralized,
    SolveLyapunov,
    Sqrt,
    Geomean,
    Care,
    Certify,
    VerifySign,
    Sweep,
    Conditioning,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
    pub eps: f64,
    pub mode: String,
    pub regime: String,
    pub seed: u64,
    pub angles: usize,
    pub safety: f64,
    /// `K` values for `verify-sign`.
    pub ks: Vec<usize>,
    /// Skip oracle comparisons.
    pub no_verify: bool,
    pub max_dim: usize,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input_path: None,
            output_path: None,
            csv_path: None,
            eps: 1e-6,
            mode: "rebalanced".into(),
            regime: "fov".into(),
            seed: 0,
            angles: signet_core::certificates::DEFAULT_ANGLES,
            safety: signet_core::certificates::SAMPLED_SAFETY,
            ks: DEFAULT_KS.to_vec(),
            no_verify: false,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

/// Process exit status for an error class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Parse => 2,
        ErrorClass::Hypothesis => 3,
        ErrorClass::Numerical => 4,
    }
}

/// Runs one command. Never panics on bad input; failures end up in the envelope.
pub fn run(config: &RunConfig) -> (Envelope, i32) {
    let input = match read_input(config) {
        Ok(v) => v,
        Err(e) => return failure(config, serde_json::Value::Null, e),
    };
    match commands::dispatch(config, &input) {
        Ok(outcome) => {
            let pass = outcome.verdicts.iter().all(|v| v.pass);
            let env = Envelope::success(config, input, outcome);
            (env, if pass { 0 } else { 1 })
        }
        Err(e) => failure(config, input, e),
    }
}

fn failure(config: &RunConfig, input: serde_json::Value, e: Error) -> (Envelope, i32) {
    let code = exit_code(e.class());
    (Envelope::failure(config, input, &e), code)
}

fn read_input(config: &RunConfig) -> signet_core::Result<serde_json::Value> {
    match &config.input_path {
        None => Ok(serde_json::Value::Object(Default::default())),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
    }
}
