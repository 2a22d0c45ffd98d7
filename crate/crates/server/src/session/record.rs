//! Session record file.
//!
//! Layout: the 8-byte magic `GRIDREC\n`, a big-endian u16 format version,
//! then frames of `tag: u8, len: u32 BE, JSON bytes`. Tag `H` is the header
//! (scenario digest, scenario, case) and comes first, `E` frames are events
//! in (sim_time, seq) order, and an optional final `R` frame is the report.

use std::io::{Read, Write};

use gridops_core::grid::NetworkCase;
use gridops_core::powerflow::ControlAction;
use serde::{Deserialize, Serialize};

use super::scenario::{scenario_digest, Scenario};
use crate::gateway::CommandRecord;
use crate::notify::Notification;

pub const MAGIC: &[u8; 8] = b"GRIDREC\n";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("not a session record (bad magic)")]
    BadMagic,
    #[error("unsupported record version {0}")]
    Version(u16),
    #[error("record is truncated")]
    Truncated,
    #[error("unknown frame tag {0:#04x}")]
    BadTag(u8),
    #[error("record frame {index} is malformed: {message}")]
    Malformed { index: usize, message: String },
    #[error("record has no header")]
    NoHeader,
    #[error("internal error: event at {at} appended after {last}")]
    OutOfOrder { at: f64, last: f64 },
    #[error("scenario digest mismatch: record {recorded}, scenario {computed}")]
    DigestMismatch { recorded: String, computed: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub scenario_digest: String,
    pub scenario: Scenario,
    pub case: NetworkCase,
}

impl Header {
    pub fn new(scenario: Scenario, case: NetworkCase) -> Header {
        Header { scenario_digest: scenario_digest(&scenario, &case), scenario, case }
    }

    /// Recomputes the digest over the embedded scenario and case.
    pub fn verify(&self) -> Result<(), RecordError> {
        let computed = scenario_digest(&self.scenario, &self.case);
        if computed != self.scenario_digest {
            return Err(RecordError::DigestMismatch { recorded: self.scenario_digest.clone(), computed });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    /// A command handed to the engine; `sim_time` is the step it fed.
    Command {
        sim_time: f64,
        command: CommandRecord,
    },
    Step {
        sim_time: f64,
        step: u64,
        actions: Vec<ControlAction>,
        digest: String,
    },
    Notification {
        sim_time: f64,
        notification: Notification,
    },
    Stop {
        sim_time: f64,
        issuer: String,
    },
}

impl Event {
    pub fn sim_time(&self) -> f64 {
        match self {
            Event::Command { sim_time, .. } | Event::Step { sim_time, .. } | Event::Notification { sim_time, .. } | Event::Stop { sim_time, .. } => *sim_time,
        }
    }
}

/// Streams a record as it is produced.
pub struct RecordWriter<W: Write> {
    out: W,
    last: f64,
    events: u64,
}

fn write_frame<W: Write>(out: &mut W, tag: u8, body: &[u8]) -> std::io::Result<()> {
    let len = u32::try_from(body.len()).map_err(|_| std::io::Error::other("record frame over 4 GiB"))?;
    out.write_all(&[tag])?;
    out.write_all(&len.to_be_bytes())?;
    out.write_all(body)
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, header: &Header) -> Result<Self, RecordError> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_be_bytes())?;
        write_frame(&mut out, b'H', &serde_json::to_vec(header).expect("header serializes"))?;
        Ok(RecordWriter { out, last: f64::NEG_INFINITY, events: 0 })
    }

    /// Appends one event. Events must arrive in simulated-time order.
    pub fn append(&mut self, event: &Event) -> Result<(), RecordError> {
        let at = event.sim_time();
        if at < self.last {
            return Err(RecordError::OutOfOrder { at, last: self.last });
        }
        self.last = at;
        self.events += 1;
        write_frame(&mut self.out, b'E', &serde_json::to_vec(event).expect("event serializes"))?;
        Ok(())
    }

    pub fn finish(mut self, report: Option<&[u8]>) -> Result<W, RecordError> {
        if let Some(r) = report {
            write_frame(&mut self.out, b'R', r)?;
        }
        self.out.flush()?;
        Ok(self.out)
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub header: Header,
    pub events: Vec<Event>,
    /// Report bytes exactly as written.
    pub report: Option<Vec<u8>>,
}

impl Record {
    pub fn read_from<R: Read>(mut input: R) -> Result<Record, RecordError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Record::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Record, RecordError> {
        if bytes.len() < 10 || &bytes[..8] != MAGIC {
            return Err(RecordError::BadMagic);
        }
        let version = u16::from_be_bytes([bytes[8], bytes[9]]);
        if version != VERSION {
            return Err(RecordError::Version(version));
        }
        let mut pos = 10;
        let (mut header, mut events, mut report) = (None, Vec::new(), None);
        let mut index = 0;
        while pos < bytes.len() {
            if bytes.len() - pos < 5 {
                return Err(RecordError::Truncated);
            }
            let tag = bytes[pos];
            let len = u32::from_be_bytes(bytes[pos + 1..pos + 5].try_into().unwrap()) as usize;
            pos += 5;
            let body = bytes.get(pos..pos + len).ok_or(RecordError::Truncated)?;
            pos += len;
            let bad = |e: serde_json::Error| RecordError::Malformed { index, message: e.to_string() };
            match tag {
                b'H' if index == 0 => header = Some(serde_json::from_slice::<Header>(body).map_err(bad)?),
                b'E' if header.is_some() && report.is_none() => events.push(serde_json::from_slice::<Event>(body).map_err(bad)?),
                b'R' if header.is_some() && report.is_none() => report = Some(body.to_vec()),
                b'H' | b'E' | b'R' => return Err(RecordError::Malformed { index, message: "frame out of place".into() }),
                t => return Err(RecordError::BadTag(t)),
            }
            index += 1;
        }
        let header = header.ok_or(RecordError::NoHeader)?;
        Ok(Record { header, events, report })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = RecordWriter::new(Vec::new(), &self.header).expect("writing to memory");
        for e in &self.events {
            w.append(e).expect("stored events are ordered");
        }
        w.finish(self.report.as_deref()).expect("writing to memory")
    }
}
