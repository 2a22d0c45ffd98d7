//! Scenario sessions: the deterministic stepper shared by live runs and
//! replays, the record format and the report.

pub mod record;
pub mod report;
mod run;
pub mod scenario;

use std::sync::Arc;

use gridops_core::grid::NetworkCase;
use gridops_core::powerflow::{ControlAction, Engine, EngineEvent, Measurements, SimulationState};
use sha2::{Digest, Sha256};

pub use record::{Event, Header, Record, RecordError, RecordWriter};
pub use report::{Report, ReportBuilder};
pub use run::{replay, run_live, LiveOptions, ReplayError, StepSink};
pub use scenario::{load_scenario, scenario_digest, Scenario, ScenarioError};

use crate::gateway::{expand, CommandDesk, CommandRecord, Request, Verdict};
use crate::notify::{Notification, Severity};
use report::{StepChanges, ViolationKey};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("command {seq} re-evaluates to {got:?}, record says {want:?}")]
    VerdictMismatch { seq: u64, got: Verdict, want: Verdict },
    #[error("session already finished")]
    Finished,
}

/// What one call to [`Session::step`] produced.
pub struct StepOutput {
    /// `None` when an accepted stop ended the session before this step.
    pub measurements: Option<Measurements>,
    pub actions: Vec<ControlAction>,
    pub digest: Option<String>,
    pub notifications: Vec<Notification>,
    /// Record events, in order.
    pub events: Vec<Event>,
}

/// SHA-256 of a snapshot's canonical JSON.
pub fn measurement_digest(m: &Measurements) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(m).expect("measurements serialize")))
}

pub struct Session {
    scenario: Scenario,
    digest: String,
    engine: Engine,
    state: SimulationState,
    desk: Arc<CommandDesk>,
    pending: Vec<ControlAction>,
    report: ReportBuilder,
    initial: Measurements,
    initial_notes: Vec<Notification>,
    was_blackout: bool,
    done: bool,
}

impl Session {
    pub fn new(scenario: Scenario, case: NetworkCase) -> Session {
        let digest = scenario_digest(&scenario, &case);
        let case = Arc::new(case);
        let desk = Arc::new(CommandDesk::new(case.clone(), scenario.role_table()));
        let engine = Engine::new((*case).clone(), scenario.engine_config());
        let (state, initial) = engine.initialize(scenario.sim_start);
        let (report, changes) = ReportBuilder::new(&scenario.name, &digest, &initial);
        let initial_notes = notifications(&initial, &changes, false);
        let was_blackout = initial.blackout;
        Session { scenario, digest, engine, state, desk, pending: Vec::new(), report, initial, initial_notes, was_blackout, done: false }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn desk(&self) -> &Arc<CommandDesk> {
        &self.desk
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn initial(&self) -> &Measurements {
        &self.initial
    }

    /// Alarms raised by the initial operating point.
    pub fn initial_notifications(&self) -> &[Notification] {
        &self.initial_notes
    }

    pub fn steps_done(&self) -> u64 {
        self.state.step_index
    }

    pub fn is_finished(&self) -> bool {
        self.done || self.state.step_index >= self.scenario.steps()
    }

    pub fn next_time(&self) -> f64 {
        self.state.sim_time + self.scenario.dt
    }

    /// Hands `commands` (in arrival order) to the next step and runs it.
    /// Verdicts are re-derived and must match the ones recorded.
    pub fn step(&mut self, commands: Vec<CommandRecord>) -> Result<StepOutput, SessionError> {
        if self.is_finished() {
            return Err(SessionError::Finished);
        }
        let dt = self.scenario.dt;
        let t = self.next_time();
        let mut events = Vec::with_capacity(commands.len() + 4);
        let mut stop = None;
        for c in commands {
            let (req, verdict) = self.desk.evaluate(&c.role, &c.topic, &c.payload);
            if verdict != c.verdict {
                return Err(SessionError::VerdictMismatch { seq: c.seq, got: verdict, want: c.verdict });
            }
            match req {
                Some(Request::Control(r)) => self.pending.extend(expand(&r, c.seq, t, dt).actions),
                Some(Request::Stop) => stop = stop.or(Some(c.issuer.clone())),
                None => {}
            }
            self.report.command(t, &c);
            events.push(Event::Command { sim_time: t, command: c });
        }
        if let Some(issuer) = stop {
            self.report.stop(t, &issuer);
            events.push(Event::Stop { sim_time: t, issuer });
            self.done = true;
            return Ok(StepOutput { measurements: None, actions: Vec::new(), digest: None, notifications: Vec::new(), events });
        }

        let (mut due, rest): (Vec<_>, Vec<_>) = self.pending.drain(..).partition(|a| a.activate_at <= t + 1e-9);
        self.pending = rest;
        due.sort_by(|a, b| a.activate_at.total_cmp(&b.activate_at).then(a.seq.cmp(&b.seq)));
        let m = self.engine.step(&mut self.state, &due, dt);
        let digest = measurement_digest(&m);
        let changes = self.report.observe(&m, &due);
        let notes = notifications(&m, &changes, self.was_blackout);
        self.was_blackout = m.blackout;
        events.push(Event::Step { sim_time: m.sim_time, step: m.step_index, actions: due.clone(), digest: digest.clone() });
        for n in &notes {
            events.push(Event::Notification { sim_time: m.sim_time, notification: n.clone() });
        }
        Ok(StepOutput { measurements: Some(m), actions: due, digest: Some(digest), notifications: notes, events })
    }

    /// Report over what has run so far.
    pub fn report(&self) -> Report {
        self.report.build()
    }
}

/// Alarms for one snapshot: engine events plus edge-triggered violations.
/// Per-element violation messages are left out while the system is (or
/// just was) blacked out; the collapse alarm covers them.
fn notifications(m: &Measurements, changes: &StepChanges, was_blackout: bool) -> Vec<Notification> {
    let t = m.sim_time;
    let mut out = Vec::new();
    for e in &m.events {
        let n = match e {
            EngineEvent::GmdOnset { onset } => Notification::new(Severity::Alarm, "gmd_onset", "Geomagnetic disturbance in progress", *onset, "engine"),
            EngineEvent::Collapsed { reason } => {
                Notification::new(Severity::Alarm, "convergence_failure", format!("Power flow failed to converge, system blacked out: {reason}"), t, "engine")
            }
            EngineEvent::Restored => Notification::new(Severity::Info, "restored", "System restored", t, "engine"),
            EngineEvent::QLimitWarning { buses } => {
                Notification::new(Severity::Warning, "q_limit", format!("Reactive limits could not all be enforced at buses {buses:?}"), t, "engine")
            }
            EngineEvent::GmdNetworkError { message } => {
                Notification::new(Severity::Warning, "gmd_network", format!("GIC not computed this step: {message}"), t, "engine")
            }
        };
        out.push(n.with_detail(serde_json::to_value(e).unwrap()));
    }
    if !(m.blackout || was_blackout) {
        for (key, value) in &changes.onsets {
            let unit = if matches!(key, ViolationKey::Overload(_)) { format!("{value:.1} %") } else { format!("{value:.3} pu") };
            out.push(
                Notification::new(Severity::Alarm, "violation", format!("{} ({unit})", key.describe()), t, "engine")
                    .with_detail(serde_json::json!({ "key": key, "value": value })),
            );
        }
        for key in &changes.clears {
            out.push(
                Notification::new(Severity::Info, "violation_clear", format!("{} cleared", key.describe()), t, "engine")
                    .with_detail(serde_json::json!({ "key": key })),
            );
        }
    }
    out
}
