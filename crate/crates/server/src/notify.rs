//! Operator notifications carried on `notif/...` topics.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Alarm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub severity: Severity,
    /// Machine-readable category, e.g. `command`, `gmd_onset`, `violation`.
    pub kind: String,
    pub text: String,
    pub sim_time: f64,
    pub origin: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub detail: serde_json::Value,
}

impl Notification {
    pub fn new(severity: Severity, kind: &str, text: impl Into<String>, sim_time: f64, origin: &str) -> Self {
        Notification { severity, kind: kind.into(), text: text.into(), sim_time, origin: origin.into(), detail: serde_json::Value::Null }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = detail;
        self
    }
}
