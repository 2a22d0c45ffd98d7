//! In-process publish/subscribe broker with a retained last-value store.
//!
//! Every connected client owns one bounded queue. Each of its subscriptions
//! that matches a publish contributes one copy, so overlapping filters
//! deliver duplicates on purpose. Publishing never blocks: a client whose
//! queue is full is disconnected and an alarm goes out on `notif/alarm`.

mod topic;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender, TrySendError};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

pub use topic::{topic_matches, validate_topic, Filter, TopicError};

use crate::notify::{Notification, Severity};

pub const DEFAULT_QUEUE_BOUND: usize = 1024;

pub type ClientId = u64;

/// One published message as it travels to subscribers and onto the wire.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: String,
    pub seq: u64,
    /// Wall clock at publish, seconds since the Unix epoch.
    pub wall_ts: f64,
    pub sim_ts: f64,
    pub retain: bool,
    pub payload: Box<RawValue>,
    #[serde(skip)]
    wire: OnceLock<Arc<str>>,
}

impl Envelope {
    pub fn new(topic: impl Into<String>, seq: u64, wall_ts: f64, sim_ts: f64, retain: bool, payload: Box<RawValue>) -> Self {
        Envelope { topic: topic.into(), seq, wall_ts, sim_ts, retain, payload, wire: OnceLock::new() }
    }

    /// The JSON frame, serialized once and shared by every subscriber.
    pub fn wire(&self) -> Arc<str> {
        self.wire.get_or_init(|| serde_json::to_string(self).expect("envelope serializes").into()).clone()
    }

    pub fn payload_value(&self) -> serde_json::Value {
        serde_json::from_str(self.payload.get()).expect("payload is valid JSON")
    }
}

pub fn wall_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn to_raw<T: Serialize + ?Sized>(value: &T) -> Box<RawValue> {
    serde_json::value::to_raw_value(value).expect("payload serializes")
}

/// A named source of envelopes with its own sequence counter.
#[derive(Debug)]
pub struct Publisher {
    name: String,
    seq: AtomicU64,
}

impl Publisher {
    pub fn new(name: &str) -> Self {
        Publisher { name: name.into(), seq: AtomicU64::new(0) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error("client {0} is not connected")]
    NotConnected(ClientId),
}

struct Slot {
    name: String,
    tx: Sender<Arc<Envelope>>,
    /// Topics this client may receive at all; `None` means everything.
    grants: Option<Vec<Filter>>,
    subs: Vec<Filter>,
    dropped: Arc<Mutex<Option<String>>>,
}

impl Slot {
    fn granted(&self, topic: &str) -> bool {
        self.grants.as_ref().is_none_or(|g| g.iter().any(|f| f.matches(topic)))
    }

    fn copies(&self, topic: &str) -> usize {
        if !self.granted(topic) {
            return 0;
        }
        self.subs.iter().filter(|f| f.matches(topic)).count()
    }
}

#[derive(Default)]
struct State {
    clients: BTreeMap<ClientId, Slot>,
    retained: BTreeMap<String, Arc<Envelope>>,
    last_sim_ts: f64,
}

pub struct Broker {
    state: Mutex<State>,
    bound: usize,
    next_client: AtomicU64,
    system: Publisher,
}

impl Broker {
    pub fn new() -> Arc<Broker> {
        Broker::with_bound(DEFAULT_QUEUE_BOUND)
    }

    pub fn with_bound(bound: usize) -> Arc<Broker> {
        Arc::new(Broker { state: Mutex::default(), bound, next_client: AtomicU64::new(1), system: Publisher::new("bus") })
    }

    pub fn queue_bound(&self) -> usize {
        self.bound
    }

    /// Registers a client. `grants` restricts what it can ever receive,
    /// regardless of what it subscribes to.
    pub fn connect(self: &Arc<Self>, name: &str, grants: Option<Vec<Filter>>) -> Subscriber {
        let id = self.next_client.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = crossbeam_channel::bounded(self.bound);
        let dropped = Arc::new(Mutex::new(None));
        let slot = Slot { name: name.into(), tx, grants, subs: Vec::new(), dropped: dropped.clone() };
        self.state.lock().unwrap().clients.insert(id, slot);
        Subscriber { id, rx, broker: self.clone(), dropped }
    }

    /// Adds a subscription and, atomically with respect to publishers,
    /// queues the retained snapshot of every matching topic.
    pub fn subscribe(&self, client: ClientId, filter: &str) -> Result<(), BusError> {
        let filter = Filter::parse(filter)?;
        let mut overflow = Vec::new();
        {
            let mut st = self.state.lock().unwrap();
            let State { clients, retained, .. } = &mut *st;
            let slot = clients.get_mut(&client).ok_or(BusError::NotConnected(client))?;
            for env in retained.values().filter(|e| filter.matches(&e.topic) && slot.granted(&e.topic)) {
                if slot.tx.try_send(env.clone()).is_err() {
                    overflow.push(client);
                    break;
                }
            }
            slot.subs.push(filter);
            self.evict(&mut st, &overflow);
        }
        self.announce(overflow);
        Ok(())
    }

    /// Removes one subscription with this exact filter text. Removing a
    /// subscription that does not exist is not an error.
    pub fn unsubscribe(&self, client: ClientId, filter: &str) {
        let mut st = self.state.lock().unwrap();
        if let Some(slot) = st.clients.get_mut(&client) {
            if let Some(k) = slot.subs.iter().position(|f| f.as_str() == filter) {
                slot.subs.remove(k);
            }
        }
    }

    pub fn disconnect(&self, client: ClientId) {
        self.state.lock().unwrap().clients.remove(&client);
    }

    pub fn publish<T: Serialize + ?Sized>(&self, publisher: &Publisher, topic: &str, sim_ts: f64, retain: bool, payload: &T) -> Result<u64, BusError> {
        self.publish_raw(publisher, topic, sim_ts, retain, to_raw(payload))
    }

    pub fn publish_raw(&self, publisher: &Publisher, topic: &str, sim_ts: f64, retain: bool, payload: Box<RawValue>) -> Result<u64, BusError> {
        validate_topic(topic)?;
        let mut overflow = Vec::new();
        let seq;
        {
            let mut st = self.state.lock().unwrap();
            // Sequence numbers are taken under the lock so delivery order
            // and sequence order agree.
            seq = publisher.seq.fetch_add(1, Ordering::Relaxed) + 1;
            let env = Arc::new(Envelope::new(topic, seq, wall_now(), sim_ts, retain, payload));
            st.last_sim_ts = sim_ts;
            for (&id, slot) in &st.clients {
                for _ in 0..slot.copies(topic) {
                    if let Err(TrySendError::Full(_) | TrySendError::Disconnected(_)) = slot.tx.try_send(env.clone()) {
                        overflow.push(id);
                        break;
                    }
                }
            }
            if retain {
                st.retained.insert(topic.to_string(), env);
            }
            self.evict(&mut st, &overflow);
        }
        self.announce(overflow);
        Ok(seq)
    }

    /// Queues one envelope for a single client only, bypassing
    /// subscriptions but not grants.
    pub fn send_to<T: Serialize + ?Sized>(&self, client: ClientId, publisher: &Publisher, topic: &str, sim_ts: f64, payload: &T) -> Result<(), BusError> {
        validate_topic(topic)?;
        let mut overflow = Vec::new();
        {
            let mut st = self.state.lock().unwrap();
            let seq = publisher.seq.fetch_add(1, Ordering::Relaxed) + 1;
            let slot = st.clients.get(&client).ok_or(BusError::NotConnected(client))?;
            let env = Arc::new(Envelope::new(topic, seq, wall_now(), sim_ts, false, to_raw(payload)));
            if slot.granted(topic) && slot.tx.try_send(env).is_err() {
                overflow.push(client);
            }
            self.evict(&mut st, &overflow);
        }
        self.announce(overflow);
        Ok(())
    }

    /// Forgets retained values under `filter` without publishing anything.
    pub fn clear_retained(&self, filter: &Filter) {
        self.state.lock().unwrap().retained.retain(|t, _| !filter.matches(t));
    }

    pub fn retained(&self, topic: &str) -> Option<Arc<Envelope>> {
        self.state.lock().unwrap().retained.get(topic).cloned()
    }

    /// Current queue depth of every connected client.
    pub fn queue_depths(&self) -> Vec<(ClientId, String, usize)> {
        let st = self.state.lock().unwrap();
        st.clients.iter().map(|(&id, s)| (id, s.name.clone(), s.tx.len())).collect()
    }

    pub fn client_count(&self) -> usize {
        self.state.lock().unwrap().clients.len()
    }

    fn evict(&self, st: &mut State, ids: &[ClientId]) {
        for id in ids {
            if let Some(slot) = st.clients.remove(id) {
                *slot.dropped.lock().unwrap() = Some(format!("queue overflow ({} messages)", self.bound));
            }
        }
    }

    fn announce(&self, ids: Vec<ClientId>) {
        for id in ids {
            let sim = self.state.lock().unwrap().last_sim_ts;
            let n = Notification::new(Severity::Alarm, "subscriber_disconnect", format!("subscriber {id} disconnected: queue overflow"), sim, "bus")
                .with_detail(serde_json::json!({ "client": id }));
            let _ = self.publish(&self.system, "notif/alarm", sim, false, &n);
        }
    }
}

/// Receiving end of a connected client. Dropping it disconnects.
pub struct Subscriber {
    id: ClientId,
    rx: Receiver<Arc<Envelope>>,
    broker: Arc<Broker>,
    dropped: Arc<Mutex<Option<String>>>,
}

impl Subscriber {
    pub fn id(&self) -> ClientId {
        self.id
    }

    pub fn subscribe(&self, filter: &str) -> Result<(), BusError> {
        self.broker.subscribe(self.id, filter)
    }

    pub fn unsubscribe(&self, filter: &str) {
        self.broker.unsubscribe(self.id, filter)
    }

    pub fn try_recv(&self) -> Option<Arc<Envelope>> {
        self.rx.try_recv().ok()
    }

    /// Waits for the next envelope. `Err` carries the disconnect reason once
    /// the queue is drained after an eviction.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Arc<Envelope>>, String> {
        match self.rx.recv_timeout(timeout) {
            Ok(env) => Ok(Some(env)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(self.disconnect_reason().unwrap_or_else(|| "disconnected".into())),
        }
    }

    pub fn drain(&self) -> Vec<Arc<Envelope>> {
        self.rx.try_iter().collect()
    }

    pub fn receiver(&self) -> &Receiver<Arc<Envelope>> {
        &self.rx
    }

    pub fn disconnect_reason(&self) -> Option<String> {
        self.dropped.lock().unwrap().clone()
    }

    pub fn queue_len(&self) -> usize {
        self.rx.len()
    }
}

impl Drop for Subscriber {
    fn drop(&mut self) {
        self.broker.disconnect(self.id);
    }
}
