//! Verification reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Outcome of one instance of a check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub violation: f64,
    /// Named quantities behind the violation, for inspection.
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InstanceRecord {
    pub fn new(index: usize) -> Self {
        Self {
            index,
            violation: 0.0,
            values: BTreeMap::new(),
            note: None,
        }
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    pub fn violation(mut self, v: f64) -> Self {
        self.violation = v;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// A failed instance: infinite violation with the reason attached.
    pub fn failure(index: usize, reason: impl Into<String>) -> Self {
        Self::new(index).violation(f64::INFINITY).note(reason)
    }
}

/// Aggregate of a check over many instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub instances: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub details: Vec<InstanceRecord>,
}

impl VerificationReport {
    /// Builds the report; a NaN violation counts as a failure.
    pub fn from_records(name: &str, tolerance: f64, details: Vec<InstanceRecord>) -> Self {
        let max_violation = details.iter().fold(0.0f64, |m, r| {
            if r.violation.is_nan() {
                f64::INFINITY
            } else {
                m.max(r.violation)
            }
        });
        Self {
            name: name.to_string(),
            instances: details.len(),
            max_violation,
            tolerance,
            passed: max_violation <= tolerance,
            details,
        }
    }

    /// `NAME PASS|FAIL max_violation tolerance`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} {:e} {:e}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.max_violation,
            self.tolerance
        )
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_iff_within_tolerance() {
        let ok = VerificationReport::from_records("a", 1e-3, vec![InstanceRecord::new(0).violation(1e-3)]);
        assert!(ok.passed);
        let bad = VerificationReport::from_records("b", 1e-3, vec![InstanceRecord::new(0).violation(f64::NAN)]);
        assert!(!bad.passed);
        assert_eq!(bad.max_violation, f64::INFINITY);
        assert_eq!(ok.summary_line(), "a PASS 1e-3 1e-3");
    }
}
