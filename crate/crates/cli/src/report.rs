use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Threshold the value is compared against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    pub detail: String,
}

impl Verdict {
    pub fn numeric(name: &str, value: f64, cmp: Comparison, tolerance: f64, detail: impl Into<String>) -> Self {
        let pass = match cmp {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
        };
        Self { name: name.into(), pass, value: Some(value), tolerance: Some(tolerance), comparison: Some(cmp), detail: detail.into() }
    }

    pub fn flag(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, value: None, tolerance: None, comparison: None, detail: detail.into() }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub seed: u64,
    pub timings_ms: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
    pub details: BTreeMap<String, Value>,
}

impl RunReport {
    pub fn new(command: Vec<String>, seed: u64) -> Self {
        Self { command, seed, timings_ms: BTreeMap::new(), verdicts: Vec::new(), artifacts: Vec::new(), details: BTreeMap::new() }
    }

    /// Runs `f`, recording its wall time under `name`.
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.record(name, start);
        out
    }

    pub fn record(&mut self, name: &str, start: Instant) {
        self.timings_ms.insert(name.into(), start.elapsed().as_secs_f64() * 1e3);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn detail(&mut self, key: &str, value: Value) {
        self.details.insert(key.into(), value);
    }

    pub fn artifact(&mut self, path: &std::path::Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let status = if v.pass { "PASS" } else { "FAIL" };
            match (v.value, v.tolerance, v.comparison) {
                (Some(x), Some(t), Some(c)) => {
                    let op = if c == Comparison::AtMost { "<=" } else { ">=" };
                    out.push_str(&format!("{status} {}: {x:.6e} ({op} {t:e}) {}\n", v.name, v.detail));
                }
                _ => out.push_str(&format!("{status} {}: {}\n", v.name, v.detail)),
            }
        }
        for a in &self.artifacts {
            out.push_str(&format!("wrote {a}\n"));
        }
        out
    }
}
