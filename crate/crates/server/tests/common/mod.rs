#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use gridops_core::grid::synthetic::two_bus_case;
use gridops_core::grid::{NetworkCase, ShuntStatus, SwitchedShunt};
use gridops_server::bus::{Broker, Subscriber};
use gridops_server::gateway::Gateway;
use gridops_server::session::{run_live, Header, LiveOptions, Record, RecordWriter, Report, Scenario, Session, StepOutput};
use serde_json::{json, Value};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub const TOKENS: [(&str, &str); 4] = [("ov", "overview"), ("gen", "generation"), ("vs", "voltage_support"), ("inst", "instructor")];

/// A flat-load scenario over `span` simulated seconds from 12:00.
pub fn scenario(name: &str, span: f64, extra: Value) -> Scenario {
    let mut doc = json!({
        "name": name,
        "sim_start": "12:00",
        "sim_span": span,
        "dt": 2,
        "tokens": TOKENS.iter().map(|(t, r)| (t.to_string(), json!(r))).collect::<serde_json::Map<_, _>>(),
        "rng_seed": 42,
    });
    for (k, v) in extra.as_object().into_iter().flatten() {
        doc[k] = v.clone();
    }
    Scenario::parse(&doc.to_string()).expect("test scenario is valid")
}

/// The two-bus fixture plus a switched-off 100 Mvar capacitor at bus 2
/// that lifts the bus over 1.05 pu when switched on.
pub fn two_bus_with_capacitor() -> NetworkCase {
    let mut case = two_bus_case();
    case.shunts.push(SwitchedShunt { id: 1, bus: 2, q_nominal: 100.0, status: ShuntStatus::Off });
    case
}

/// One scripted command, submitted after step `after_step` completes
/// (0 means before the first step).
#[derive(Clone)]
pub struct Scripted {
    pub after_step: u64,
    pub role: &'static str,
    pub topic: String,
    pub payload: Value,
}

pub fn cmd(after_step: u64, role: &'static str, kind: &str, payload: Value) -> Scripted {
    Scripted { after_step, role, topic: format!("command/{kind}"), payload }
}

pub struct Run {
    pub report: Report,
    pub record: Vec<u8>,
    pub outputs: Vec<StepOutput>,
    /// Everything an instructor-level listener on `#` saw.
    pub seen: Vec<Arc<gridops_server::bus::Envelope>>,
}

/// Runs a session unpaced through a gateway, submitting `script` between
/// steps, and records it in memory.
pub fn run_scripted(scenario: Scenario, case: NetworkCase, script: &[Scripted]) -> Run {
    let header = Header::new(scenario.clone(), case.clone());
    let session = Session::new(scenario.clone(), case);
    let gateway = Gateway::new(Broker::new(), session.desk().clone(), scenario.tokens.clone(), scenario.sim_start, scenario.dt);
    let listener: Subscriber = gateway.broker().connect("listener", None);
    listener.subscribe("#").unwrap();
    let submit = |k: u64| {
        for s in script.iter().filter(|s| s.after_step == k) {
            gateway.submit(&format!("{}-user", s.role), s.role, &s.topic, s.payload.clone());
        }
    };
    submit(0);
    let mut outputs = Vec::new();
    let mut seen = Vec::new();
    let writer = RecordWriter::new(Vec::new(), &header).unwrap();
    let mut step = 0;
    let (report, record) = run_live(session, &gateway, writer, LiveOptions { speed: 1.0, paced: false }, &mut |out| {
        step += 1;
        seen.extend(listener.drain());
        submit(step);
        outputs.push(StepOutput {
            measurements: out.measurements.clone(),
            actions: out.actions.clone(),
            digest: out.digest.clone(),
            notifications: out.notifications.clone(),
            events: out.events.clone(),
        });
    })
    .unwrap();
    seen.extend(listener.drain());
    Run { report, record, outputs, seen }
}

impl Run {
    pub fn parsed(&self) -> Record {
        Record::from_bytes(&self.record).unwrap()
    }

    pub fn digests(&self) -> Vec<String> {
        self.outputs.iter().filter_map(|o| o.digest.clone()).collect()
    }

    pub fn on_topic(&self, topic: &str) -> Vec<Value> {
        self.seen.iter().filter(|e| e.topic == topic).map(|e| e.payload_value()).collect()
    }
}
