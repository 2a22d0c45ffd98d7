//! Role-based gateway between clients and the engine: authenticates
//! tokens, authorizes and queues commands, and publishes measurements as
//! topic envelopes.

pub mod command;
mod publish;
pub mod roles;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::value::RawValue;

pub use command::{acknowledge, expand, CommandDesk, CommandRecord, ControlRequest, DenyCode, Expansion, Request, Verdict, REPORT_TOPIC, STOP_TOPIC};
pub use publish::topic_payloads;
pub use roles::{builtin_roles, Role, RoleTable};

use crate::bus::{to_raw, Broker, BusError, ClientId, Filter, Publisher, Subscriber};
use crate::notify::Notification;

struct Inner {
    next_seq: u64,
    pending: Vec<CommandRecord>,
    /// Time of the last completed step.
    sim_time: f64,
    gmd_live: bool,
    report_requests: Vec<ClientId>,
    final_report: Option<Arc<Box<RawValue>>>,
}

pub struct Gateway {
    broker: Arc<Broker>,
    desk: Arc<CommandDesk>,
    tokens: BTreeMap<String, String>,
    dt: f64,
    data: Publisher,
    notif: Publisher,
    inner: Mutex<Inner>,
}

impl Gateway {
    pub fn new(broker: Arc<Broker>, desk: Arc<CommandDesk>, tokens: BTreeMap<String, String>, sim_start: f64, dt: f64) -> Self {
        Gateway {
            broker,
            desk,
            tokens,
            dt,
            data: Publisher::new("engine"),
            notif: Publisher::new("gateway"),
            inner: Mutex::new(Inner {
                next_seq: 1,
                pending: Vec::new(),
                sim_time: sim_start,
                gmd_live: false,
                report_requests: Vec::new(),
                final_report: None,
            }),
        }
    }

    pub fn broker(&self) -> &Arc<Broker> {
        &self.broker
    }

    pub fn desk(&self) -> &Arc<CommandDesk> {
        &self.desk
    }

    /// Role bound to a token, if any.
    pub fn authenticate(&self, token: &str) -> Option<&str> {
        self.tokens.get(token).map(String::as_str)
    }

    /// A bus client restricted to what `role` may receive.
    pub fn connect(&self, name: &str, role: &str) -> Subscriber {
        let grants = self.desk.roles().get(role).and_then(|r| r.data_filters().ok()).unwrap_or_default();
        self.broker.connect(name, Some(grants))
    }

    pub fn sim_time(&self) -> f64 {
        self.inner.lock().unwrap().sim_time
    }

    /// Accepts one command frame. The verdict is final; the command is
    /// echoed on its topic (instructors see it), acknowledged with exactly
    /// one `notif/command` message, and queued for the next step.
    pub fn submit(&self, issuer: &str, role: &str, topic: &str, payload: serde_json::Value) -> CommandRecord {
        let mut inner = self.inner.lock().unwrap();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        let (req, verdict) = self.desk.evaluate(role, topic, &payload);
        let rec = CommandRecord { seq, arrived_at: inner.sim_time, issuer: issuer.into(), role: role.into(), topic: topic.into(), payload, verdict };
        let ack = acknowledge(&rec, req.as_ref(), inner.sim_time + self.dt, self.dt);
        if crate::bus::validate_topic(topic).is_ok() {
            let _ = self.broker.publish(&self.notif, topic, inner.sim_time, false, &rec);
        }
        let _ = self.broker.publish(&self.notif, "notif/command", inner.sim_time, false, &ack);
        inner.pending.push(rec.clone());
        rec
    }

    /// Commands received since the last drain, in arrival order.
    pub fn drain(&self) -> Vec<CommandRecord> {
        std::mem::take(&mut self.inner.lock().unwrap().pending)
    }

    /// Publishes a step's measurements and moves the gateway clock.
    pub fn publish_measurements(&self, m: &gridops_core::powerflow::Measurements) {
        let mut inner = self.inner.lock().unwrap();
        inner.sim_time = m.sim_time;
        for (topic, payload) in topic_payloads(m) {
            let _ = self.broker.publish_raw(&self.data, &topic, m.sim_time, true, payload);
        }
        if m.gmd.is_some() {
            inner.gmd_live = true;
        } else if inner.gmd_live {
            // The event is over: late joiners should not see stale GIC data.
            inner.gmd_live = false;
            self.broker.clear_retained(&Filter::parse("data/gmd/#").unwrap());
        }
    }

    pub fn notify(&self, topic: &str, sim_ts: f64, n: &Notification) {
        let _ = self.broker.publish(&self.notif, topic, sim_ts, false, n);
    }

    pub fn request_report(&self, client: ClientId) {
        let mut inner = self.inner.lock().unwrap();
        match inner.final_report.clone() {
            Some(report) => {
                let sim = inner.sim_time;
                drop(inner);
                let _ = self.send_report(client, sim, &**report);
            }
            None => inner.report_requests.push(client),
        }
    }

    /// Clients waiting for a report snapshot.
    pub fn take_report_requests(&self) -> Vec<ClientId> {
        std::mem::take(&mut self.inner.lock().unwrap().report_requests)
    }

    pub fn send_report<T: Serialize + ?Sized>(&self, client: ClientId, sim_ts: f64, report: &T) -> Result<(), BusError> {
        self.broker.send_to(client, &self.notif, "notif/report", sim_ts, report)
    }

    /// Stores the final report for later fetches and answers anyone waiting.
    pub fn set_final_report<T: Serialize>(&self, report: &T) {
        let raw = Arc::new(to_raw(report));
        let waiting = {
            let mut inner = self.inner.lock().unwrap();
            inner.final_report = Some(raw.clone());
            std::mem::take(&mut inner.report_requests)
        };
        let sim = self.sim_time();
        for c in waiting {
            let _ = self.send_report(c, sim, &**raw);
        }
    }
}
