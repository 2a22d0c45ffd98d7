use std::io::Write;
use std::time::{Duration, Instant};

use super::record::{Event, Record, RecordError, RecordWriter};
use super::report::Report;
use super::{Session, SessionError, StepOutput};
use crate::gateway::Gateway;
use crate::notify::{Notification, Severity};

/// Called after every step with what it produced.
pub type StepSink<'a> = &'a mut dyn FnMut(&StepOutput);

#[derive(Debug, Clone, Copy)]
pub struct LiveOptions {
    /// Multiplier on the scenario pace.
    pub speed: f64,
    /// Hold each step to its wall-clock slot; off runs as fast as possible.
    pub paced: bool,
}

impl Default for LiveOptions {
    fn default() -> Self {
        LiveOptions { speed: 1.0, paced: true }
    }
}

fn sleep_until(deadline: Instant) {
    let now = Instant::now();
    if deadline > now {
        std::thread::sleep(deadline - now);
    }
}

/// Runs a session to completion through `gateway`, recording as it goes.
///
/// Step `k` starts at `t0 + k·Δt/timescale`. A step that overruns its slot
/// makes the following ones start late, back to back, until the schedule
/// is caught up; simulated time always advances by exactly Δt per step.
pub fn run_live<W: Write>(
    mut session: Session,
    gateway: &Gateway,
    mut writer: RecordWriter<W>,
    opts: LiveOptions,
    sink: StepSink,
) -> Result<(Report, W), RecordError> {
    let start = session.scenario().sim_start;
    for n in session.initial_notifications() {
        writer.append(&Event::Notification { sim_time: start, notification: n.clone() })?;
    }
    gateway.publish_measurements(session.initial());
    for n in session.initial_notifications() {
        gateway.notify("notif/alarm", start, n);
    }

    let period = Duration::from_secs_f64(session.scenario().wall_period(opts.speed));
    let t0 = Instant::now();
    let mut k: u32 = 0;
    while !session.is_finished() {
        k += 1;
        if opts.paced {
            sleep_until(t0 + period * k);
        }
        let out = match session.step(gateway.drain()) {
            Ok(out) => out,
            // Live verdicts come from the same desk; a mismatch is a bug.
            Err(e @ SessionError::VerdictMismatch { .. }) => panic!("{e}"),
            Err(SessionError::Finished) => break,
        };
        for e in &out.events {
            writer.append(e)?;
        }
        if let Some(m) = &out.measurements {
            gateway.publish_measurements(m);
            for n in &out.notifications {
                gateway.notify("notif/alarm", m.sim_time, n);
            }
        }
        let waiting = gateway.take_report_requests();
        if !waiting.is_empty() {
            let snapshot = session.report();
            for c in waiting {
                let _ = gateway.send_report(c, gateway.sim_time(), &snapshot);
            }
        }
        sink(&out);
    }

    let report = session.report();
    let out = writer.finish(Some(&report.to_bytes()))?;
    gateway.set_final_report(&report);
    let end = gateway.sim_time();
    let n = Notification::new(Severity::Info, "session_report", report.summary.clone(), end, "session")
        .with_detail(serde_json::to_value(&report).expect("report serializes"));
    gateway.notify("notif/alarm", end, &n);
    Ok((report, out))
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("replay diverged at step {step}: {reason}")]
    Divergence { step: u64, reason: String },
    #[error("regenerated report differs from the recorded one")]
    ReportMismatch,
}

/// Re-runs a record against its embedded scenario and case, checking every
/// step's actions and measurement digest, and rebuilds the report.
pub fn replay(record: &Record, sink: StepSink) -> Result<Report, ReplayError> {
    record.header.verify()?;
    let mut session = Session::new(record.header.scenario.clone(), record.header.case.clone());
    let mut buffered = Vec::new();
    let diverged = |step: u64, reason: String| ReplayError::Divergence { step, reason };
    for event in &record.events {
        let step = session.steps_done() + 1;
        match event {
            Event::Command { sim_time, command } => {
                if *sim_time != session.next_time() {
                    return Err(diverged(step, format!("command {} recorded for {sim_time}, next step is {}", command.seq, session.next_time())));
                }
                buffered.push(command.clone());
            }
            Event::Notification { .. } => {}
            Event::Step { sim_time, step: recorded_step, actions, digest } => {
                let out = session.step(std::mem::take(&mut buffered)).map_err(|e| diverged(step, e.to_string()))?;
                let Some(m) = &out.measurements else {
                    return Err(diverged(step, "record continues after a stop".into()));
                };
                if m.step_index != *recorded_step || m.sim_time != *sim_time {
                    return Err(diverged(step, format!("recorded step {recorded_step} at {sim_time}, replayed {} at {}", m.step_index, m.sim_time)));
                }
                if &out.actions != actions {
                    return Err(diverged(step, "applied actions differ".into()));
                }
                if out.digest.as_deref() != Some(digest.as_str()) {
                    return Err(diverged(step, format!("measurement digest {} != recorded {digest}", out.digest.unwrap_or_default())));
                }
                sink(&out);
            }
            Event::Stop { .. } => {
                let out = session.step(std::mem::take(&mut buffered)).map_err(|e| diverged(step, e.to_string()))?;
                if out.measurements.is_some() {
                    return Err(diverged(step, "recorded stop was not reproduced".into()));
                }
                sink(&out);
            }
        }
    }
    if !buffered.is_empty() {
        return Err(diverged(session.steps_done() + 1, "record ends with commands that never reached a step".into()));
    }
    let report = session.report();
    if let Some(bytes) = &record.report {
        if *bytes != report.to_bytes() {
            return Err(ReplayError::ReportMismatch);
        }
    }
    Ok(report)
}
