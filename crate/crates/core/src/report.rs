//! Verification reports shared by the linear and nonlinear checkers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }

    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }
}

/// Tolerance applied to strict matrix inequalities.
///
/// `Relative(s)` scales by the spectral norm of the metric in the condition,
/// so a margin passes when `λ_max < s·‖P‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum Slack {
    Absolute(f64),
    Relative(f64),
}

impl Slack {
    pub fn threshold(self, scale: f64) -> f64 {
        match self {
            Slack::Absolute(s) => s,
            Slack::Relative(s) => s * scale,
        }
    }
}

impl From<f64> for Slack {
    fn from(s: f64) -> Self {
        Slack::Absolute(s)
    }
}

/// One checked condition. `margin` is `λ_max` for matrix inequalities, the
/// left-hand value for scalar ones, and `0`/`1` for structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub anchor: String,
    pub margin: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub conditions: Vec<Condition>,
    pub diagnostics: Vec<String>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self {
            verdict: Verdict::Accept,
            conditions: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, anchor: impl Into<String>, margin: f64, threshold: f64, holds: bool) {
        self.conditions.push(Condition {
            label: label.into(),
            anchor: anchor.into(),
            margin,
            threshold,
            holds,
        });
        if !holds {
            self.verdict = Verdict::Reject;
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.diagnostics.push(msg.into());
    }

    pub fn accepted(&self) -> bool {
        self.verdict.is_accept()
    }

    pub fn condition(&self, label: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.label == label)
    }

    /// Worst (largest) margin among conditions whose label starts with `prefix`.
    pub fn worst(&self, prefix: &str) -> Option<&Condition> {
        self.conditions
            .iter()
            .filter(|c| c.label.starts_with(prefix))
            .max_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

impl Default for VerificationReport {
    fn default() -> Self {
        Self::new()
    }
}
