//! Identity-check reports as JSON or CSV.
//!
//! Rationals are written as `"num/den"` and floats in shortest round-trip
//! form, so identical inputs give identical bytes.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// Schema every report array must satisfy.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub params: BTreeMap<String, Value>,
    pub residual: String,
    pub bound: String,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn new(check: &str, residual: impl ToString, bound: impl ToString, pass: bool) -> Self {
        CheckReport {
            check: check.to_string(),
            params: BTreeMap::new(),
            residual: residual.to_string(),
            bound: bound.to_string(),
            verdict: Verdict::from_bool(pass),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable parameter"));
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// One run's output: the command, its full configuration, check verdicts
/// and data rows.
#[derive(Clone, Debug, Serialize)]
pub struct Document {
    pub command: String,
    pub config: Value,
    pub reports: Vec<CheckReport>,
    pub rows: Vec<Value>,
    pub summary: BTreeMap<String, Value>,
}

impl Document {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        Document {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("serializable config"),
            reports: Vec::new(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn row(&mut self, row: impl Serialize) {
        self.rows.push(serde_json::to_value(row).expect("serializable row"));
    }

    pub fn summarize(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable summary"));
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(CheckReport::passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }
}

pub fn to_json(reports: &[CheckReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

/// `check,params,residual,bound,verdict`, params as compact JSON.
pub fn to_csv(reports: &[CheckReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["check", "params", "residual", "bound", "verdict"]).expect("in-memory write");
    for r in reports {
        let params = serde_json::to_string(&r.params).expect("params serialize");
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        w.write_record([r.check.as_str(), &params, &r.residual, &r.bound, verdict])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Validates `value` against a JSON Schema, reporting the first violation
/// with its instance path.
pub fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    let validator = jsonschema::validator_for(schema).map_err(|e| format!("bad schema: {e}"))?;
    let first = validator.iter_errors(value).next().map(|e| format!("{}: {e}", e.instance_path));
    first.map_or(Ok(()), Err)
}

pub fn schema() -> Value {
    serde_json::from_str(REPORT_SCHEMA).expect("shipped schema parses")
}
