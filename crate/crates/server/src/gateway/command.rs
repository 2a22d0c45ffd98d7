//! Command intake: parsing, authorization and expansion into engine actions.
//! Everything here is a pure function of the case, the role table and the
//! command, so a record replays to the same verdicts.

use std::sync::Arc;

use gridops_core::clock::{format_clock, parse_clock};
use gridops_core::grid::{CaseIndex, NetworkCase};
use gridops_core::powerflow::{check_bounds, CommandKind, ControlAction};
use serde::{Deserialize, Deserializer, Serialize};

use super::roles::RoleTable;
use crate::notify::{Notification, Severity};

pub const STOP_TOPIC: &str = "command/session/stop";
pub const REPORT_TOPIC: &str = "command/report/fetch";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRequest {
    pub kind: CommandKind,
    pub target: u32,
    pub value: f64,
    pub activate_at: Option<f64>,
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Request {
    Control(ControlRequest),
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyCode {
    /// The role lacks the grant; always flagged suspicious.
    NotGranted,
    Schema,
    Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Verdict {
    Allow,
    Deny { code: DenyCode, reason: String, suspicious: bool },
}

impl Verdict {
    fn deny(code: DenyCode, reason: impl Into<String>) -> Verdict {
        Verdict::Deny { code, reason: reason.into(), suspicious: code == DenyCode::NotGranted }
    }

    pub fn is_allow(&self) -> bool {
        matches!(self, Verdict::Allow)
    }

    pub fn suspicious(&self) -> bool {
        matches!(self, Verdict::Deny { suspicious: true, .. })
    }
}

/// One command exactly as it arrived, with the verdict it received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    /// Arrival order across all clients.
    pub seq: u64,
    /// Simulated time of the last completed step when it arrived.
    pub arrived_at: f64,
    pub issuer: String,
    pub role: String,
    pub topic: String,
    pub payload: serde_json::Value,
    #[serde(flatten)]
    pub verdict: Verdict,
}

fn opt_clock<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Seconds(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Seconds(s)) => Ok(Some(s)),
        Some(Raw::Text(t)) => parse_clock(&t).map(Some).ok_or_else(|| serde::de::Error::custom(format!("invalid clock time `{t}`"))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ValueField {
    Number(f64),
    Flag(bool),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Payload {
    #[serde(default)]
    #[allow(dead_code)]
    id: Option<serde_json::Value>,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    target: Option<u32>,
    #[serde(default)]
    value: Option<ValueField>,
    #[serde(default, deserialize_with = "opt_clock")]
    activate_at: Option<f64>,
    #[serde(default)]
    duration: Option<f64>,
}

/// Engine actions produced by one accepted control command.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub actions: Vec<ControlAction>,
    pub apply_at: f64,
    pub revert_at: Option<f64>,
    /// Set when a duration was rounded to whole steps.
    pub note: Option<String>,
}

pub struct CommandDesk {
    case: Arc<NetworkCase>,
    index: CaseIndex,
    roles: RoleTable,
}

impl CommandDesk {
    pub fn new(case: Arc<NetworkCase>, roles: RoleTable) -> Self {
        let index = case.index();
        CommandDesk { case, index, roles }
    }

    pub fn roles(&self) -> &RoleTable {
        &self.roles
    }

    pub fn evaluate(&self, role: &str, topic: &str, payload: &serde_json::Value) -> (Option<Request>, Verdict) {
        let Some(role_def) = self.roles.get(role) else {
            return (None, Verdict::deny(DenyCode::NotGranted, format!("unknown role `{role}`")));
        };
        if topic == STOP_TOPIC {
            return if role_def.session_control {
                (Some(Request::Stop), Verdict::Allow)
            } else {
                (None, Verdict::deny(DenyCode::NotGranted, format!("role {role} may not stop the session")))
            };
        }
        let Some(kind) = topic.strip_prefix("command/").and_then(CommandKind::from_name) else {
            return (None, Verdict::deny(DenyCode::Schema, format!("unknown command topic `{topic}`")));
        };
        if !role_def.grants(kind) {
            return (None, Verdict::deny(DenyCode::NotGranted, format!("role {role} is not granted {kind}")));
        }
        let p: Payload = match serde_json::from_value(payload.clone()) {
            Ok(p) => p,
            Err(e) => return (None, Verdict::deny(DenyCode::Schema, e.to_string())),
        };
        if p.kind.as_deref().is_some_and(|k| k != kind.name()) {
            return (None, Verdict::deny(DenyCode::Schema, "payload kind disagrees with topic"));
        }
        let Some(target) = p.target else {
            return (None, Verdict::deny(DenyCode::Schema, "missing field `target`"));
        };
        let value = match p.value {
            Some(ValueField::Number(v)) => v,
            Some(ValueField::Flag(b)) => f64::from(u8::from(b)),
            None if kind.takes_value() => return (None, Verdict::deny(DenyCode::Schema, format!("{kind} needs a value"))),
            None => 0.0,
        };
        if p.activate_at.is_some_and(|t| !t.is_finite()) {
            return (None, Verdict::deny(DenyCode::Schema, "activate_at must be finite"));
        }
        if let Err(e) = check_bounds(&self.case, &self.index, kind, target, value, p.duration) {
            return (None, Verdict::deny(DenyCode::Bounds, e.to_string()));
        }
        let req = ControlRequest { kind, target, value, activate_at: p.activate_at, duration: p.duration };
        (Some(Request::Control(req)), Verdict::Allow)
    }
}

/// First step time on the grid `step_time + k·dt` at or after `t`.
fn step_at_or_after(t: f64, step_time: f64, dt: f64) -> f64 {
    let k = ((t - step_time) / dt - 1e-9).ceil().max(0.0);
    step_time + k * dt
}

/// Turns an accepted request into actions when it is handed to the step at
/// `step_time`. A missing or past activation time means this step; a
/// duration adds the inverse action `max(duration, dt)` later.
pub fn expand(req: &ControlRequest, seq: u64, step_time: f64, dt: f64) -> Expansion {
    let apply_at = req.activate_at.map_or(step_time, |t| t.max(step_time));
    let mut actions = vec![ControlAction { seq, activate_at: apply_at, kind: req.kind, target: req.target, value: req.value }];
    let (mut revert_at, mut note) = (None, None);
    if let (Some(d), Some(inv)) = (req.duration, req.kind.inverse()) {
        let at = apply_at + d.max(dt);
        actions.push(ControlAction { seq, activate_at: at, kind: inv, target: req.target, value: 0.0 });
        let held = step_at_or_after(at, step_time, dt) - step_at_or_after(apply_at, step_time, dt);
        if (held - d).abs() > 1e-9 {
            note = Some(format!("duration {d} s rounded to {held} s (step {dt} s)"));
        }
        revert_at = Some(at);
    }
    Expansion { actions, apply_at, revert_at, note }
}

/// The single `notif/command` message for a command. `next_step` is the
/// step the command will be handed to.
pub fn acknowledge(rec: &CommandRecord, req: Option<&Request>, next_step: f64, dt: f64) -> Notification {
    let (kind, target) = match req {
        Some(Request::Control(c)) => (c.kind.name().to_string(), Some(c.target)),
        Some(Request::Stop) => ("session/stop".to_string(), None),
        None => (rec.topic.strip_prefix("command/").unwrap_or(&rec.topic).to_string(), rec.payload.get("target").and_then(|t| t.as_u64()).map(|t| t as u32)),
    };
    let on = target.map(|t| format!(" on {t}")).unwrap_or_default();
    let mut detail = serde_json::json!({
        "command": rec.seq,
        "issuer": rec.issuer,
        "role": rec.role,
        "kind": kind,
        "target": target,
    });
    let (severity, text) = match &rec.verdict {
        Verdict::Allow => {
            detail["outcome"] = "allow".into();
            let mut text = format!("{} ({}) {kind}{on}: accepted", rec.issuer, rec.role);
            if let Some(Request::Control(c)) = req {
                let x = expand(c, rec.seq, next_step, dt);
                detail["apply_at"] = x.apply_at.into();
                text += &format!(", applies at {}", format_clock(x.apply_at));
                if let Some(r) = x.revert_at {
                    detail["revert_at"] = r.into();
                    text += &format!(", reverts at {}", format_clock(r));
                }
                if let Some(n) = x.note {
                    text += &format!(" ({n})");
                    detail["note"] = n.into();
                }
            }
            (Severity::Info, text)
        }
        Verdict::Deny { code, reason, suspicious } => {
            detail["outcome"] = "deny".into();
            detail["code"] = serde_json::to_value(code).unwrap();
            detail["reason"] = reason.clone().into();
            detail["suspicious"] = (*suspicious).into();
            let severity = if *suspicious { Severity::Alarm } else { Severity::Warning };
            let flag = if *suspicious { " [suspicious]" } else { "" };
            (severity, format!("{} ({}) {kind}{on}: denied, {reason}{flag}", rec.issuer, rec.role))
        }
    };
    Notification::new(severity, "command", text, rec.arrived_at, "gateway").with_detail(detail)
}
