//! Verdict reports and their canonical JSON form.

use crate::error::Result;
use crate::scalar::{rel_err, Backend, Scalar, C64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::io::{self, Write};
use std::path::Path;

/// One comparison between two evaluation paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub label: String,
    pub inputs: Value,
    pub lhs: Value,
    pub rhs: Value,
    pub abs_err: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_err: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactPair>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactPair {
    pub lhs: String,
    pub rhs: String,
}

pub fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

impl CaseRecord {
    /// Exact backends must agree exactly; floats within `rel_tol`.
    pub fn compare<S: Scalar>(label: impl Into<String>, inputs: Value, lhs: &S, rhs: &S, rel_tol: f64) -> Self {
        let (a, b) = (lhs.to_c64(), rhs.to_c64());
        let exact = match (lhs.exact_repr(), rhs.exact_repr()) {
            (Some(l), Some(r)) => Some(ExactPair { lhs: l, rhs: r }),
            _ => None,
        };
        let rel = rel_err(a, b);
        let pass = if S::EXACT { lhs == rhs } else { rel <= rel_tol };
        CaseRecord {
            label: label.into(),
            inputs,
            lhs: complex_json(a),
            rhs: complex_json(b),
            abs_err: (a - b).norm(),
            rel_err: Some(rel),
            sigma_distance: None,
            tolerance: if S::EXACT { None } else { Some(rel_tol) },
            exact,
            pass,
            detail: None,
        }
    }

    /// Pass when `|lhs - rhs| <= abs_tol`.
    pub fn compare_abs(label: impl Into<String>, inputs: Value, lhs: C64, rhs: C64, abs_tol: f64) -> Self {
        let abs = (lhs - rhs).norm();
        CaseRecord {
            label: label.into(),
            inputs,
            lhs: complex_json(lhs),
            rhs: complex_json(rhs),
            abs_err: abs,
            rel_err: Some(rel_err(lhs, rhs)),
            sigma_distance: None,
            tolerance: Some(abs_tol),
            exact: None,
            pass: abs <= abs_tol,
            detail: None,
        }
    }

    /// Statistical comparison: pass when the distance in units of `sigma` is at most `max_sigma`.
    pub fn compare_sigma(
        label: impl Into<String>,
        inputs: Value,
        lhs: Value,
        rhs: Value,
        diff: f64,
        sigma: f64,
        max_sigma: f64,
    ) -> Self {
        let dist = if sigma > 0.0 {
            diff / sigma
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        CaseRecord {
            label: label.into(),
            inputs,
            lhs,
            rhs,
            abs_err: diff,
            rel_err: None,
            sigma_distance: Some(dist),
            tolerance: Some(max_sigma),
            exact: None,
            pass: dist <= max_sigma,
            detail: None,
        }
    }

    /// A yes/no check with no numeric pair.
    pub fn check(label: impl Into<String>, inputs: Value, pass: bool, detail: impl Into<String>) -> Self {
        CaseRecord {
            label: label.into(),
            inputs,
            lhs: Value::Bool(pass),
            rhs: Value::Bool(true),
            abs_err: if pass { 0.0 } else { 1.0 },
            rel_err: None,
            sigma_distance: None,
            tolerance: None,
            exact: None,
            pass,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Outcome of one suite run. `pass` is the conjunction of the case passes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub suite: String,
    pub anchors: Vec<String>,
    pub backend: Backend,
    pub cases: Vec<CaseRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl VerdictReport {
    pub fn new(suite: impl Into<String>, anchors: &[&str], backend: Backend) -> Self {
        VerdictReport {
            suite: suite.into(),
            anchors: anchors.iter().map(|s| s.to_string()).collect(),
            backend,
            cases: Vec::new(),
            notes: Vec::new(),
            pass: true,
            wall_time_s: None,
        }
    }

    pub fn push(&mut self, case: CaseRecord) {
        self.pass &= case.pass;
        self.cases.push(case);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn extend(&mut self, other: VerdictReport) {
        for c in other.cases {
            self.push(c);
        }
        self.notes.extend(other.notes);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(|c| !c.pass)
    }

    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        canonical_json(&value)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::EquivError::Input(e.to_string()))
    }
}

/// Floats in shortest round-trip scientific notation, keys sorted, no whitespace.
struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:e}")
    }
}

/// Canonical text of a JSON value. Object keys come out sorted because the map is ordered.
pub fn canonical_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    value.serialize(&mut ser).expect("in-memory write");
    let mut s = String::from_utf8(buf).expect("utf8");
    s.push('\n');
    s
}

pub fn emit_report(report: &VerdictReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_canonical_json())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::CQ;

    fn sample() -> VerdictReport {
        let mut r = VerdictReport::new("demo", &["anchor-b", "anchor-a"], Backend::Float);
        r.push(CaseRecord::compare("x", json!({"sigma": [1, 0]}), &C64::new(1.0, 0.5), &C64::new(1.0, 0.5), 1e-12));
        r.push(CaseRecord::compare("y", json!({"n": 2}), &CQ::from_frac(1, 3), &CQ::from_frac(1, 3), 0.0));
        r.note("a note");
        r
    }

    #[test]
    fn round_trip_and_sorted_keys() {
        let r = sample();
        let text = r.to_canonical_json();
        let back = VerdictReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert!(text.find("\"anchors\"").unwrap() < text.find("\"backend\"").unwrap());
        assert!(text.find("\"backend\"").unwrap() < text.find("\"cases\"").unwrap());
        assert_eq!(text, sample().to_canonical_json());
    }

    #[test]
    fn failing_case_flips_overall_verdict() {
        let mut r = sample();
        assert!(r.pass);
        r.push(CaseRecord::compare("z", json!({"mu": [1, 0]}), &C64::new(1.0, 0.0), &C64::new(1.1, 0.0), 1e-9));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
        assert!(r.to_canonical_json().contains("\"mu\":[1,0]"));
    }

    #[test]
    fn exact_cases_carry_their_text() {
        let r = sample();
        assert_eq!(r.cases[1].exact.as_ref().unwrap().lhs, "1/3");
    }
}
