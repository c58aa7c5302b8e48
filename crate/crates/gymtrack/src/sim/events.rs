//! Event log: the byte-reproducible record of everything a run did, as
//! line-delimited JSON. `report` recomputes metrics from this file alone,
//! so it carries the ground-truth set windows and the gateway timing
//! parameters alongside the raw events.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayPhase, PatchBody};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    /// First record of every log.
    Meta {
        t: f64,
        seed: u64,
        gateways: usize,
        scan_duration: f64,
        upload_duration: f64,
        /// How far past a set's last repetition PATCHes and wearable
        /// records are still attributed to it.
        attribution_slack: f64,
    },
    /// Ground truth for one scripted set, logged at its start.
    SetWindow {
        t: f64,
        user: String,
        equipment: String,
        truth: u16,
        start_t: f64,
        /// Time of the final repetition.
        end_t: f64,
    },
    Interrupt {
        t: f64,
        equipment: String,
        instance: u16,
    },
    CounterOverflow {
        t: f64,
        equipment: String,
        instance: u16,
    },
    Emission {
        t: f64,
        equipment: String,
        instance: u16,
        minor: u16,
        copy: u8,
    },
    Reception {
        t: f64,
        receiver: String,
        equipment: String,
        instance: u16,
        minor: u16,
        rssi: f64,
    },
    BeaconReset {
        t: f64,
        equipment: String,
        instance: u16,
    },
    GatewayPhase {
        t: f64,
        gateway: usize,
        phase: GatewayPhase,
    },
    Patch {
        t: f64,
        gateway: usize,
        method: String,
        path: String,
        body: PatchBody,
    },
    /// A PATCH the store refused (duplicate event timestamp); kept in the
    /// log because the live service would refuse it too.
    PatchRejected {
        t: f64,
        gateway: usize,
        machine: String,
        reason: String,
    },
    ScanToggle {
        t: f64,
        user: String,
        scanning: bool,
    },
    Association {
        t: f64,
        user: String,
        equipment: String,
    },
    WearableSet {
        t: f64,
        user: String,
        equipment: String,
        reps: u16,
        start_t: f64,
        end_t: f64,
    },
}

impl LogRecord {
    pub fn t(&self) -> f64 {
        match self {
            LogRecord::Meta { t, .. }
            | LogRecord::SetWindow { t, .. }
            | LogRecord::Interrupt { t, .. }
            | LogRecord::CounterOverflow { t, .. }
            | LogRecord::Emission { t, .. }
            | LogRecord::Reception { t, .. }
            | LogRecord::BeaconReset { t, .. }
            | LogRecord::GatewayPhase { t, .. }
            | LogRecord::Patch { t, .. }
            | LogRecord::PatchRejected { t, .. }
            | LogRecord::ScanToggle { t, .. }
            | LogRecord::Association { t, .. }
            | LogRecord::WearableSet { t, .. } => *t,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    pub records: Vec<LogRecord>,
}

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
    #[error("event log is empty")]
    Empty,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl EventLog {
    pub fn push(&mut self, record: LogRecord) {
        debug_assert!(
            self.records
                .last()
                .is_none_or(|last| last.t() <= record.t()),
            "log timestamps must be nondecreasing"
        );
        self.records.push(record);
    }

    /// Serialize as line-delimited JSON; byte-stable for a given log.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_ndjson(text: &str) -> Result<EventLog, EventLogError> {
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord =
                serde_json::from_str(line).map_err(|e| EventLogError::BadLine {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            records.push(record);
        }
        if records.is_empty() {
            return Err(EventLogError::Empty);
        }
        Ok(EventLog { records })
    }

    pub fn from_file(path: &std::path::Path) -> Result<EventLog, EventLogError> {
        Self::parse_ndjson(&std::fs::read_to_string(path)?)
    }

    /// FNV-1a over the ndjson bytes; convenient for determinism checks.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.to_ndjson().as_bytes())
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
