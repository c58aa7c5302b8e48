//! Duty-cycled gateway: whitelist filtering, the fixed-index repetition
//! vector, scan/upload alternation, and HTTP PATCH construction.
//!
//! The gateway listens for whitelisted advertisements during a scan window
//! (default 3 s). At the window's end, if any slot changed, it switches to
//! an upload phase (default 0.9 s) and sends one PATCH per changed machine;
//! while uploading it is deaf, which is the system's dominant loss mode.
//! Slot values are overwritten with the advertised absolute count, never
//! summed, so dropped packets leave no accumulated error.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Reception;
use crate::codec::{EquipmentRegistry, EquipmentUuid, RegistryError};

pub const DEFAULT_SCAN_SECS: f64 = 3.0;
pub const DEFAULT_UPLOAD_SECS: f64 = 0.9;

/// One whitelist slot: the beacon identity plus the machine name used in
/// PATCH paths and bodies. Slot order is fixed by configuration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WhitelistEntry {
    pub uuid: EquipmentUuid,
    pub major: u16,
    pub machine: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub whitelist: Vec<WhitelistEntry>,
    pub scan_duration: f64,
    pub upload_duration: f64,
    pub cloud_base_url: String,
}

impl GatewayConfig {
    pub fn new(whitelist: Vec<WhitelistEntry>, cloud_base_url: impl Into<String>) -> Self {
        GatewayConfig {
            whitelist,
            scan_duration: DEFAULT_SCAN_SECS,
            upload_duration: DEFAULT_UPLOAD_SECS,
            cloud_base_url: cloud_base_url.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.whitelist.is_empty() {
            return Err(GatewayError::BadConfig("whitelist must be nonempty"));
        }
        if !(self.scan_duration > 0.0) || !(self.upload_duration > 0.0) {
            return Err(GatewayError::BadConfig("durations must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("bad gateway config: {0}")]
    BadConfig(&'static str),
    #[error("machine index {index} out of range (whitelist has {len} slots)")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Latest known repetition count per whitelisted beacon, index fixed by
/// configuration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionVector {
    reps: Vec<u16>,
}

impl RepetitionVector {
    pub fn new(len: usize) -> Self {
        RepetitionVector { reps: vec![0; len] }
    }

    pub fn slots(&self) -> &[u16] {
        &self.reps
    }

    pub fn get(&self, index: usize) -> Option<u16> {
        self.reps.get(index).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayPhase {
    Scanning,
    Uploading,
}

/// An outgoing HTTP PATCH, ready for the wire or the in-process store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchRequest {
    pub method: String,
    /// Path under the cloud base url, e.g. `/equipment/leg_curl.json`.
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: PatchBody,
}

/// JSON body of a gateway PATCH: the machine it refers to, its latest
/// count, the full repetition vector, and the send time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchBody {
    pub machine: String,
    pub reps: u16,
    pub vector: Vec<u16>,
    pub t: f64,
}

/// The gateway state machine.
#[derive(Clone, Debug)]
pub struct Gateway {
    pub config: GatewayConfig,
    pub vector: RepetitionVector,
    pub phase: GatewayPhase,
    pub phase_end_t: f64,
    dirty: BTreeSet<usize>,
}

impl Gateway {
    /// Start scanning at `start_t`.
    pub fn new(config: GatewayConfig, start_t: f64) -> Result<Self, GatewayError> {
        config.validate()?;
        let slots = config.whitelist.len();
        Ok(Gateway {
            phase_end_t: start_t + config.scan_duration,
            config,
            vector: RepetitionVector::new(slots),
            phase: GatewayPhase::Scanning,
            dirty: BTreeSet::new(),
        })
    }

    /// True while in a scan phase at time `t`; the radio channel uses this
    /// as the listening gate.
    pub fn is_listening(&self, t: f64) -> bool {
        self.phase == GatewayPhase::Scanning && t < self.phase_end_t
    }

    pub fn dirty_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.dirty.iter().copied()
    }

    /// Absorb one delivered advertisement. Non-whitelisted frames are
    /// dropped silently; a whitelisted frame overwrites its slot with the
    /// advertised count and marks the slot dirty. Receiving the duplicate
    /// copy of a double advertisement is a no-op beyond that, so the state
    /// after one or two copies is identical.
    pub fn on_reception<I>(&mut self, reception: &Reception<I>) {
        let frame = &reception.frame;
        let Some(index) = self
            .config
            .whitelist
            .iter()
            .position(|w| w.uuid == frame.uuid && w.major == frame.major)
        else {
            return;
        };
        self.vector.reps[index] = frame.minor;
        self.dirty.insert(index);
    }

    /// Phase-boundary update at `now`. Returns the PATCH requests to send,
    /// in slot order. Before `phase_end_t` this is a no-op.
    pub fn tick(&mut self, now: f64) -> Vec<PatchRequest> {
        if now < self.phase_end_t {
            return Vec::new();
        }
        match self.phase {
            GatewayPhase::Scanning => {
                if self.dirty.is_empty() {
                    // Nothing to upload: chain straight into the next scan window.
                    self.phase_end_t = now + self.config.scan_duration;
                    Vec::new()
                } else {
                    let dirty: Vec<usize> = self.dirty.iter().copied().collect();
                    self.dirty.clear();
                    self.phase = GatewayPhase::Uploading;
                    self.phase_end_t = now + self.config.upload_duration;
                    dirty
                        .into_iter()
                        .map(|i| self.build_patch(i, now).expect("dirty index in range"))
                        .collect()
                }
            }
            GatewayPhase::Uploading => {
                self.phase = GatewayPhase::Scanning;
                self.phase_end_t = now + self.config.scan_duration;
                Vec::new()
            }
        }
    }

    /// Build the PATCH for one slot at time `t`.
    pub fn build_patch(&self, machine_index: usize, t: f64) -> Result<PatchRequest, GatewayError> {
        let entry =
            self.config
                .whitelist
                .get(machine_index)
                .ok_or(GatewayError::IndexOutOfRange {
                    index: machine_index,
                    len: self.config.whitelist.len(),
                })?;
        Ok(PatchRequest {
            method: "PATCH".to_string(),
            path: format!("/equipment/{}.json", entry.machine),
            headers: vec![("content-type".to_string(), "application/json".to_string())],
            body: PatchBody {
                machine: entry.machine.clone(),
                reps: self.vector.reps[machine_index],
                vector: self.vector.reps.clone(),
                t,
            },
        })
    }
}

/// Parse a gateway whitelist file: one `<uuid-hex> <major> <machine>` per
/// line in slot order; `#` comments and blank lines are skipped.
pub fn parse_whitelist(text: &str) -> Result<Vec<WhitelistEntry>, WhitelistParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < 3 {
            return Err(WhitelistParseError::BadLine(line_no));
        }
        let uuid = EquipmentUuid::from_hex(parts[0]).map_err(|e| WhitelistParseError::BadUuid {
            line: line_no,
            source: e,
        })?;
        let major: u16 = parts[1]
            .parse()
            .map_err(|_| WhitelistParseError::BadMajor(line_no))?;
        let machine = parts[2..].join(" ");
        out.push(WhitelistEntry {
            uuid,
            major,
            machine,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WhitelistParseError {
    #[error("line {0}: expected `<uuid-hex> <major> <machine>`")]
    BadLine(usize),
    #[error("line {line}: {source}")]
    BadUuid { line: usize, source: RegistryError },
    #[error("line {0}: major must be an unsigned 16-bit integer")]
    BadMajor(usize),
}

/// Whitelist covering every registry entry, slot order following the
/// registry, all beacons at instance (major) 0.
pub fn whitelist_from_registry(registry: &EquipmentRegistry) -> Vec<WhitelistEntry> {
    registry
        .entries()
        .iter()
        .map(|e| WhitelistEntry {
            uuid: e.uuid,
            major: 0,
            machine: e.name.clone(),
        })
        .collect()
}
