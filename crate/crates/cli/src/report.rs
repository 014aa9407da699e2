//! Machine-readable JSON reports and their plain-text summaries.
//!
//! Object keys are sorted and floats are printed by the shortest
//! round-trip rule, so a report is byte-identical across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use rayzero::linalg::Matrix;
use rayzero::scalar::{format_rational, Rational, Scalar};

/// JSON form of a scalar: `"p/q"` strings for exact values, numbers for floats.
pub trait Emit {
    fn emit(&self) -> Value;
}

impl Emit for Rational {
    fn emit(&self) -> Value {
        Value::String(format_rational(self))
    }
}

impl Emit for f64 {
    fn emit(&self) -> Value {
        Value::from(*self)
    }
}

pub fn emit_vec<S: Emit>(xs: &[S]) -> Value {
    Value::Array(xs.iter().map(Emit::emit).collect())
}

pub fn emit_matrix<S: Scalar + Emit>(m: &Matrix<S>) -> Value {
    Value::Array((0..m.rows()).map(|i| Value::Array((0..m.cols()).map(|j| m[(i, j)].emit()).collect())).collect())
}

/// One named pass/fail line of the verification ledger.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), self.name.clone().into());
        m.insert("passed".into(), self.passed.into());
        m.insert("detail".into(), self.detail.clone().into());
        Value::Object(m)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub fields: Map<String, Value>,
    pub checks: Vec<Check>,
    /// Free-form lines appended to the text summary.
    pub lines: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct IoError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

impl Report {
    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.fields.insert(key.to_string(), value.into());
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.lines.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> Value {
        let mut m = self.fields.clone();
        m.insert("checks".into(), Value::Array(self.checks.iter().map(Check::to_json).collect()));
        m.insert("passed".into(), self.passed().into());
        Value::Object(m)
    }

    pub fn json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let _ = writeln!(out, "{line}");
        }
        if !self.checks.is_empty() {
            let passed = self.checks.iter().filter(|c| c.passed).count();
            let _ = writeln!(out, "checks: {passed}/{} passed", self.checks.len());
            for c in &self.checks {
                let mark = if c.passed { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    let _ = writeln!(out, "  {mark} {}", c.name);
                } else {
                    let _ = writeln!(out, "  {mark} {}: {}", c.name, c.detail);
                }
            }
        }
        out
    }

    /// Writes the JSON report and the text summary, creating parent directories.
    pub fn emit(&self, report: Option<&Path>, summary: Option<&Path>) -> Result<(), IoError> {
        let write = |path: &Path, text: String| {
            let wrap = |source| IoError { path: path.display().to_string(), source };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(wrap)?;
            }
            fs::write(path, text).map_err(wrap)
        };
        if let Some(p) = report {
            write(p, self.json_string())?;
        }
        if let Some(p) = summary {
            write(p, self.summary())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayzero::scalar::rat;

    #[test]
    fn rationals_are_fraction_strings() {
        assert_eq!(rat(-3, 6).emit(), Value::String("-1/2".into()));
        assert_eq!(emit_vec(&[rat(4, 2)]), serde_json::json!(["2"]));
        assert_eq!(f64::NAN.emit(), Value::Null);
    }

    #[test]
    fn json_is_key_sorted_and_stable() {
        let mut r = Report::default();
        r.set("zeta", 1);
        r.set("alpha", "x");
        r.check("c", true, "");
        let s = r.json_string();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert_eq!(s, r.json_string());
        assert!(r.passed());
    }

    #[test]
    fn emit_writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::default();
        r.line("hello");
        r.check("fails", false, "because");
        let (a, b) = (dir.path().join("sub/report.json"), dir.path().join("summary.txt"));
        r.emit(Some(&a), Some(&b)).unwrap();
        assert!(fs::read_to_string(&a).unwrap().contains("\"passed\": false"));
        assert!(fs::read_to_string(&b).unwrap().contains("FAIL fails: because"));
    }
}
