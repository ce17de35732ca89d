//! Deterministic command reports in text and JSON.
//!
//! JSON output is byte-stable for fixed inputs: field order is fixed by the
//! struct, map keys are sorted, and wall-clock timing stays out of the
//! payload (it is printed to stderr).

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Pass,
    Fail,
    Value,
    Error,
}

impl Status {
    fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Value => "value",
            Status::Error => "error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Pass | Status::Value => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

#[derive(Serialize, Debug)]
pub struct Report {
    pub command: String,
    pub status: &'static str,
    pub witnesses: Vec<String>,
    pub diagnostics: Vec<String>,
    pub data: Value,
    #[serde(skip)]
    pub status_kind: Status,
}

impl Report {
    pub fn new(command: impl Into<String>, status: Status) -> Self {
        Report {
            command: command.into(),
            status: status.as_str(),
            witnesses: Vec::new(),
            diagnostics: Vec::new(),
            data: Value::Object(Map::new()),
            status_kind: status,
        }
    }

    /// Change the outcome, keeping the serialized field in sync.
    pub fn set_status(&mut self, status: Status) {
        self.status = status.as_str();
        self.status_kind = status;
    }

    pub fn witness(&mut self, w: impl Into<String>) -> &mut Self {
        self.witnesses.push(w.into());
        self
    }

    pub fn diagnostic(&mut self, d: impl Into<String>) -> &mut Self {
        self.diagnostics.push(d.into());
        self
    }

    pub fn set(&mut self, key: &str, value: Value) -> &mut Self {
        if let Value::Object(map) = &mut self.data {
            map.insert(key.to_string(), value);
        }
        self
    }

    pub fn set_str(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.set(key, Value::String(value.into()))
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            // Keys inside `data` come from serde_json's sorted map.
            serde_json::to_string_pretty(self).expect("report serialization")
        } else {
            let mut out = String::new();
            out.push_str(&format!("command: {}\n", self.command));
            out.push_str(&format!("status: {}\n", self.status));
            for w in &self.witnesses {
                out.push_str(&format!("witness: {w}\n"));
            }
            for d in &self.diagnostics {
                out.push_str(&format!("note: {d}\n"));
            }
            if let Value::Object(map) = &self.data {
                for (k, v) in map {
                    match v {
                        Value::String(s) => out.push_str(&format!("{k}: {s}\n")),
                        other => out.push_str(&format!("{k}: {other}\n")),
                    }
                }
            }
            out
        }
    }
}

/// Fold a core verification report into a command report.
pub fn absorb_verification(
    report: &mut Report,
    verification: &dqw_core::VerificationReport,
) {
    for (label, outcome) in &verification.items {
        match outcome {
            dqw_core::CheckOutcome::Pass => {
                report.diagnostic(format!("{label}: pass"));
            }
            dqw_core::CheckOutcome::Fail { order, witnesses, residual } => {
                report.diagnostic(format!("{label}: fail at order {order}"));
                for w in witnesses {
                    report.witness(w.to_string());
                }
                report.diagnostic(format!("residual: {residual}"));
            }
        }
    }
    for note in &verification.notes {
        report.diagnostic(note.clone());
    }
}
