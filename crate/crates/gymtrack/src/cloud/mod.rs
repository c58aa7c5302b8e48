//! Mock Firebase-style backend: equipment state plus history behind a
//! REST-ish JSON surface, with line-delimited append-only persistence.
//!
//! Routes:
//! - `PATCH /equipment/<name>.json` — gateway update (see [`PatchBody`])
//! - `GET /equipment/<name>.json` — one record including history
//! - `GET /dashboard.json` — every registered machine's current state

pub mod client;
pub mod http;
pub mod server;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::EquipmentRegistry;
use crate::gateway::PatchBody;
use http::Response;

/// One (t, reps) point in a machine's history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: f64,
    pub reps: u16,
}

/// Cloud-side view of one machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquipmentRecord {
    pub machine: String,
    pub current_reps: u16,
    pub history: Vec<HistoryEntry>,
}

impl EquipmentRecord {
    fn new(machine: String) -> Self {
        EquipmentRecord {
            machine,
            current_reps: 0,
            history: Vec::new(),
        }
    }

    pub fn last_update_t(&self) -> Option<f64> {
        self.history.last().map(|h| h.t)
    }
}

/// One accepted update, which is also the persistence line format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredUpdate {
    pub t: f64,
    pub machine: String,
    pub reps: u16,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown machine {0:?}")]
    UnknownMachine(String),
    #[error("duplicate timestamp {t} for {machine:?}")]
    DuplicateTimestamp { machine: String, t: f64 },
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt persistence file at line {line}: {reason}")]
    CorruptFile { line: usize, reason: String },
}

/// In-memory equipment state for every registered machine.
#[derive(Clone, Debug, PartialEq)]
pub struct Store {
    records: BTreeMap<String, EquipmentRecord>,
}

impl Store {
    /// Fresh store: every registered machine present at zero reps.
    pub fn new(registry: &EquipmentRegistry) -> Self {
        let records = registry
            .entries()
            .iter()
            .map(|e| (e.name.clone(), EquipmentRecord::new(e.name.clone())))
            .collect();
        Store { records }
    }

    pub fn records(&self) -> impl Iterator<Item = &EquipmentRecord> {
        self.records.values()
    }

    pub fn get(&self, machine: &str) -> Option<&EquipmentRecord> {
        self.records.get(machine)
    }

    /// Apply one update. History is kept ordered by event time, so
    /// concurrent writers (e.g. two gateways whose PATCHes interleave on
    /// the wire) all land in the history and `current_reps` tracks the
    /// newest event regardless of arrival order. Only an exact duplicate
    /// timestamp is refused.
    pub fn apply(&mut self, update: &StoredUpdate) -> Result<&EquipmentRecord, StoreError> {
        let record = self
            .records
            .get_mut(&update.machine)
            .ok_or_else(|| StoreError::UnknownMachine(update.machine.clone()))?;
        let pos = record.history.partition_point(|h| h.t < update.t);
        if record.history.get(pos).is_some_and(|h| h.t == update.t) {
            return Err(StoreError::DuplicateTimestamp {
                machine: update.machine.clone(),
                t: update.t,
            });
        }
        record.history.insert(
            pos,
            HistoryEntry {
                t: update.t,
                reps: update.reps,
            },
        );
        record.current_reps = record.history.last().expect("just inserted").reps;
        Ok(record)
    }

    /// All accepted updates, oldest first (ties broken by machine name).
    pub fn updates(&self) -> Vec<StoredUpdate> {
        let mut all: Vec<StoredUpdate> = self
            .records
            .values()
            .flat_map(|r| {
                r.history.iter().map(|h| StoredUpdate {
                    t: h.t,
                    machine: r.machine.clone(),
                    reps: h.reps,
                })
            })
            .collect();
        all.sort_by(|a, b| a.t.total_cmp(&b.t).then_with(|| a.machine.cmp(&b.machine)));
        all
    }

    /// Dashboard view: one row per registered machine, name order.
    pub fn dashboard(&self) -> DashboardView {
        DashboardView {
            machines: self
                .records
                .values()
                .map(|r| DashboardRow {
                    machine: r.machine.clone(),
                    current_reps: r.current_reps,
                    last_update_t: r.last_update_t(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DashboardRow {
    pub machine: String,
    pub current_reps: u16,
    pub last_update_t: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DashboardView {
    pub machines: Vec<DashboardRow>,
}

/// Write the store as line-delimited JSON updates, oldest first.
pub fn persist(store: &Store, path: &Path) -> Result<(), StoreError> {
    let mut out = Vec::new();
    for update in store.updates() {
        serde_json::to_writer(&mut out, &update).expect("update serializes");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Rebuild a store by replaying a persistence file against the registry.
pub fn load(path: &Path, registry: &EquipmentRegistry) -> Result<Store, StoreError> {
    let text = fs::read_to_string(path)?;
    load_from_str(&text, registry)
}

/// Replay persistence text; any unparsable or unapplyable line is corrupt.
pub fn load_from_str(text: &str, registry: &EquipmentRegistry) -> Result<Store, StoreError> {
    let mut store = Store::new(registry);
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let update: StoredUpdate =
            serde_json::from_str(line).map_err(|e| StoreError::CorruptFile {
                line: line_no,
                reason: e.to_string(),
            })?;
        store.apply(&update).map_err(|e| StoreError::CorruptFile {
            line: line_no,
            reason: e.to_string(),
        })?;
    }
    Ok(store)
}

fn json_response(status: u16, value: &impl Serialize) -> Response {
    Response::json(
        status,
        serde_json::to_vec(value).expect("response serializes"),
    )
}

fn error_response(status: u16, message: impl AsRef<str>) -> Response {
    json_response(status, &serde_json::json!({ "error": message.as_ref() }))
}

/// `PATCH /equipment/<machine>.json`: validate the body, apply it, echo the
/// stored record. 400 on malformed bodies, 404 on unregistered machines.
pub fn handle_patch(store: &mut Store, path_machine: &str, body: &[u8]) -> Response {
    let parsed: PatchBody = match serde_json::from_slice(body) {
        Ok(b) => b,
        Err(e) => return error_response(400, format!("malformed body: {e}")),
    };
    if parsed.machine != path_machine {
        return error_response(
            400,
            format!(
                "body machine {:?} does not match path machine {path_machine:?}",
                parsed.machine
            ),
        );
    }
    if !parsed.t.is_finite() {
        return error_response(400, "malformed body: t must be finite");
    }
    let update = StoredUpdate {
        t: parsed.t,
        machine: parsed.machine,
        reps: parsed.reps,
    };
    match store.apply(&update) {
        Ok(record) => json_response(200, record),
        Err(StoreError::UnknownMachine(m)) => error_response(404, format!("unknown machine {m:?}")),
        Err(e @ StoreError::DuplicateTimestamp { .. }) => error_response(400, e.to_string()),
        Err(e) => error_response(500, e.to_string()),
    }
}

/// `GET /dashboard.json`
pub fn handle_get_dashboard(store: &Store) -> Response {
    json_response(200, &store.dashboard())
}

/// `GET /equipment/<machine>.json`
pub fn handle_get_equipment(store: &Store, machine: &str) -> Response {
    match store.get(machine) {
        Some(record) => json_response(200, record),
        None => error_response(404, format!("unknown machine {machine:?}")),
    }
}
