use serde::Serialize;
use serde_json::Value;
use signet_core::{Error, ErrorClass};

use crate::RunConfig;

/// One checked inequality `value <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn le(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }

    /// `|value - expected| <= rel_tol · max(1, |expected|)`.
    pub fn close(name: &str, value: f64, expected: f64, rel_tol: f64) -> Self {
        let gap = (value - expected).abs();
        Self { name: name.into(), value, bound: expected, pass: gap <= rel_tol * expected.abs().max(1.0) }
    }

    pub fn holds(name: &str, pass: bool) -> Self {
        Self { name: name.into(), value: if pass { 1.0 } else { 0.0 }, bound: 1.0, pass }
    }
}

/// Command result before it is wrapped in an [`Envelope`].
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub report: Value,
    pub oracle: Option<Value>,
    pub verdicts: Vec<Verdict>,
    pub csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub class: &'static str,
    pub message: String,
}

/// Top-level report written by every command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub config: RunConfig,
    pub input: Value,
    pub report: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<Value>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
    #[serde(skip)]
    pub csv: Option<String>,
}

impl Envelope {
    pub fn success(config: &RunConfig, input: Value, outcome: Outcome) -> Self {
        let pass = outcome.verdicts.iter().all(|v| v.pass);
        Self {
            config: config.clone(),
            input,
            report: outcome.report,
            oracle: outcome.oracle,
            verdicts: outcome.verdicts,
            pass,
            error: None,
            csv: outcome.csv,
        }
    }

    pub fn failure(config: &RunConfig, input: Value, e: &Error) -> Self {
        let class = match e.class() {
            ErrorClass::Parse => "parse",
            ErrorClass::Hypothesis => "hypothesis",
            ErrorClass::Numerical => "numerical",
        };
        Self {
            config: config.clone(),
            input,
            report: Value::Null,
            oracle: None,
            verdicts: vec![],
            pass: false,
            error: Some(ErrorRecord { class, message: e.to_string() }),
            csv: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// 17 significant digits in scientific notation, '.' decimal separator.
pub fn format_csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
