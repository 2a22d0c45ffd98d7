//! End-of-session report, built step by step from measurements and the
//! command log so that a replay rebuilds it byte for byte.

use std::collections::BTreeMap;

use gridops_core::clock::format_clock;
use gridops_core::powerflow::violations::VoltageBound;
use gridops_core::powerflow::{ControlAction, Measurements};
use serde::{Deserialize, Serialize};

use crate::gateway::{CommandRecord, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "element", content = "id", rename_all = "snake_case")]
pub enum ViolationKey {
    UnderVoltage(u32),
    OverVoltage(u32),
    Overload(u32),
}

impl ViolationKey {
    pub fn describe(&self) -> String {
        match self {
            ViolationKey::UnderVoltage(b) => format!("bus {b} under-voltage"),
            ViolationKey::OverVoltage(b) => format!("bus {b} over-voltage"),
            ViolationKey::Overload(k) => format!("branch {k} overload"),
        }
    }
}

/// Violations present in a snapshot with their severity (pu or %).
pub fn violation_keys(m: &Measurements) -> BTreeMap<ViolationKey, f64> {
    let mut out = BTreeMap::new();
    for v in &m.violations.bus_voltage {
        let key = match v.bound {
            VoltageBound::Under => ViolationKey::UnderVoltage(v.bus),
            VoltageBound::Over => ViolationKey::OverVoltage(v.bus),
        };
        out.insert(key, v.v);
    }
    for b in &m.violations.branch_overload {
        out.insert(ViolationKey::Overload(b.branch), b.loading_pct);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEntry {
    #[serde(flatten)]
    pub key: ViolationKey,
    pub onset: f64,
    pub clear: Option<f64>,
    /// Lowest voltage, highest voltage or highest loading while active.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub seq: u64,
    /// Step the command was handed to.
    pub sim_time: f64,
    pub issuer: String,
    pub role: String,
    pub topic: String,
    pub payload: serde_json::Value,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// A point on the score chart where an engine action took effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMarker {
    pub sim_time: f64,
    pub seq: u64,
    pub kind: String,
    pub target: u32,
    pub value: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Series {
    pub t: Vec<f64>,
    pub score: Vec<f64>,
    pub cost: Vec<f64>,
    /// One series per area, in `Report::areas` order.
    pub ace: Vec<Vec<f64>>,
    pub delta_f: Vec<f64>,
    pub load_mw: Vec<f64>,
    pub utilization_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopInfo {
    pub sim_time: f64,
    pub issuer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub scenario_digest: String,
    pub sim_start: String,
    pub sim_end: String,
    pub steps: u64,
    pub stopped: Option<StopInfo>,
    pub final_score: f64,
    /// Dollars, rounded to the cent.
    pub total_cost: f64,
    pub blackout_steps: u64,
    pub summary: String,
    pub areas: Vec<u32>,
    pub series: Series,
    pub violations: Vec<ViolationEntry>,
    pub actions: Vec<ActionEntry>,
    pub markers: Vec<ActionMarker>,
}

impl Report {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Default)]
pub struct StepChanges {
    pub onsets: Vec<(ViolationKey, f64)>,
    pub clears: Vec<ViolationKey>,
}

pub struct ReportBuilder {
    scenario: String,
    digest: String,
    sim_start: f64,
    last_time: f64,
    steps: u64,
    stopped: Option<StopInfo>,
    score: f64,
    cost: f64,
    blackout_steps: u64,
    areas: Vec<u32>,
    series: Series,
    log: Vec<ViolationEntry>,
    /// Open log entries by key.
    active: BTreeMap<ViolationKey, usize>,
    actions: Vec<ActionEntry>,
    markers: Vec<ActionMarker>,
}

impl ReportBuilder {
    pub fn new(scenario: &str, digest: &str, initial: &Measurements) -> (ReportBuilder, StepChanges) {
        let areas: Vec<u32> = initial.areas.iter().map(|a| a.id).collect();
        let mut b = ReportBuilder {
            scenario: scenario.into(),
            digest: digest.into(),
            sim_start: initial.sim_time,
            last_time: initial.sim_time,
            steps: 0,
            stopped: None,
            score: initial.score,
            cost: initial.cost_accrued,
            blackout_steps: 0,
            series: Series { ace: vec![Vec::new(); areas.len()], ..Series::default() },
            areas,
            log: Vec::new(),
            active: BTreeMap::new(),
            actions: Vec::new(),
            markers: Vec::new(),
        };
        let changes = b.observe(initial, &[]);
        (b, changes)
    }

    pub fn command(&mut self, sim_time: f64, c: &CommandRecord) {
        self.actions.push(ActionEntry {
            seq: c.seq,
            sim_time,
            issuer: c.issuer.clone(),
            role: c.role.clone(),
            topic: c.topic.clone(),
            payload: c.payload.clone(),
            verdict: c.verdict.clone(),
        });
    }

    pub fn stop(&mut self, sim_time: f64, issuer: &str) {
        self.stopped = Some(StopInfo { sim_time, issuer: issuer.into() });
    }

    /// Folds one snapshot in and reports which violations began or ended.
    pub fn observe(&mut self, m: &Measurements, applied: &[ControlAction]) -> StepChanges {
        if m.step_index > 0 {
            self.steps = m.step_index;
        }
        self.last_time = m.sim_time;
        self.score = m.score;
        self.cost = m.cost_accrued;
        if m.blackout {
            self.blackout_steps += 1;
        }
        let s = &mut self.series;
        s.t.push(m.sim_time);
        s.score.push(m.score);
        s.cost.push(m.cost_accrued);
        for (series, a) in s.ace.iter_mut().zip(&m.areas) {
            series.push(a.ace);
        }
        s.delta_f.push(m.delta_f);
        s.load_mw.push(m.areas.iter().map(|a| a.load).sum());
        s.utilization_pct.push(m.capacity.utilization_pct);
        for a in applied {
            self.markers.push(ActionMarker { sim_time: m.sim_time, seq: a.seq, kind: a.kind.name().into(), target: a.target, value: a.value, score: m.score });
        }

        let now = violation_keys(m);
        let mut changes = StepChanges::default();
        let ended: Vec<ViolationKey> = self.active.keys().filter(|k| !now.contains_key(k)).copied().collect();
        for key in ended {
            let idx = self.active.remove(&key).unwrap();
            self.log[idx].clear = Some(m.sim_time);
            changes.clears.push(key);
        }
        for (&key, &value) in &now {
            match self.active.get(&key) {
                Some(&idx) => {
                    let e = &mut self.log[idx];
                    e.worst = match key {
                        ViolationKey::UnderVoltage(_) => e.worst.min(value),
                        _ => e.worst.max(value),
                    };
                }
                None => {
                    self.active.insert(key, self.log.len());
                    self.log.push(ViolationEntry { key, onset: m.sim_time, clear: None, worst: value });
                    changes.onsets.push((key, value));
                }
            }
        }
        changes
    }

    pub fn build(&self) -> Report {
        let denied = self.actions.iter().filter(|a| !a.verdict.is_allow()).count();
        let suspicious = self.actions.iter().filter(|a| a.verdict.suspicious()).count();
        let total_cost = (self.cost * 100.0).round() / 100.0;
        let mut summary = format!(
            "{} {}-{}: final score {:.2}, total cost ${:.2}, {} violations, {} commands ({} denied, {} suspicious)",
            self.scenario,
            format_clock(self.sim_start),
            format_clock(self.last_time),
            self.score,
            total_cost,
            self.log.len(),
            self.actions.len(),
            denied,
            suspicious,
        );
        if self.blackout_steps > 0 {
            summary += &format!(", blackout for {} steps", self.blackout_steps);
        }
        if let Some(s) = &self.stopped {
            summary += &format!(", stopped by {} at {}", s.issuer, format_clock(s.sim_time));
        }
        Report {
            scenario: self.scenario.clone(),
            scenario_digest: self.digest.clone(),
            sim_start: format_clock(self.sim_start),
            sim_end: format_clock(self.last_time),
            steps: self.steps,
            stopped: self.stopped.clone(),
            final_score: self.score,
            total_cost,
            blackout_steps: self.blackout_steps,
            summary,
            areas: self.areas.clone(),
            series: self.series.clone(),
            violations: self.log.clone(),
            actions: self.actions.clone(),
            markers: self.markers.clone(),
        }
    }
}
