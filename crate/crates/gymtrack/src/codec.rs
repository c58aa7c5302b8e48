//! Advertisement codec and equipment registry.
//!
//! Every beacon broadcasts a fixed 30-byte manufacturer advertisement:
//!
//! ```text
//! Offset  Size  Field
//! ──────  ────  ─────────────────────────────────────────────
//!   0      3    flags structure            02 01 06
//!   3      6    manufacturer structure     1A FF 4C 00 02 15
//!   9     16    equipment UUID
//!  25      2    major — beacon instance index (big-endian)
//!  27      2    minor — current repetition count (big-endian)
//!  29      1    measured power at 1 m, dBm (two's complement)
//! ──────  ────
//! total   30
//! ```
//!
//! The minor field carries the beacon's absolute repetition count, so a
//! receiver that drops packets never accumulates counting error: the next
//! delivered packet restores the true value.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Encoded advertisement length in bytes.
pub const FRAME_LEN: usize = 30;

/// The 9 fixed header bytes preceding the UUID: BLE flags structure plus
/// the Apple manufacturer-specific structure introducing a proximity frame.
pub const FRAME_PREFIX: [u8; 9] = [0x02, 0x01, 0x06, 0x1A, 0xFF, 0x4C, 0x00, 0x02, 0x15];

/// Default calibrated power byte when a scenario does not override it.
pub const DEFAULT_MEASURED_POWER: i8 = -59;

/// 16-byte identifier pre-programmed into a beacon to name its equipment type.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EquipmentUuid(pub [u8; 16]);

impl EquipmentUuid {
    /// Parse from 32 hex digits (case-insensitive, no separators).
    pub fn from_hex(s: &str) -> Result<Self, RegistryError> {
        let s = s.trim();
        if s.len() != 32 || !s.is_ascii() {
            return Err(RegistryError::BadUuidHex(s.to_string()));
        }
        let mut bytes = [0u8; 16];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = hex_val(chunk[0]).ok_or_else(|| RegistryError::BadUuidHex(s.to_string()))?;
            let lo = hex_val(chunk[1]).ok_or_else(|| RegistryError::BadUuidHex(s.to_string()))?;
            bytes[i] = hi << 4 | lo;
        }
        Ok(EquipmentUuid(bytes))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn hex_val(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

impl fmt::Debug for EquipmentUuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EquipmentUuid({})", self.to_hex())
    }
}

impl fmt::Display for EquipmentUuid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl TryFrom<String> for EquipmentUuid {
    type Error = RegistryError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        EquipmentUuid::from_hex(&s)
    }
}

impl From<EquipmentUuid> for String {
    fn from(u: EquipmentUuid) -> String {
        u.to_hex()
    }
}

/// One registered piece of gym equipment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquipmentType {
    pub uuid: EquipmentUuid,
    pub name: String,
}

/// The advertisement payload carried by every beacon broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IBeaconFrame {
    pub uuid: EquipmentUuid,
    /// Beacon instance index; distinguishes two beacons mounted on
    /// identical machine types.
    pub major: u16,
    /// Current accumulated repetition count.
    pub minor: u16,
    /// Calibrated RSSI at 1 m, dBm.
    pub measured_power: i8,
}

/// Encode a frame into its 30-byte wire form.
pub fn encode_frame(frame: &IBeaconFrame) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[..9].copy_from_slice(&FRAME_PREFIX);
    out[9..25].copy_from_slice(&frame.uuid.0);
    out[25..27].copy_from_slice(&frame.major.to_be_bytes());
    out[27..29].copy_from_slice(&frame.minor.to_be_bytes());
    out[29] = frame.measured_power as u8;
    out
}

/// Decoding failures for [`decode_frame`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("wrong payload length: expected {FRAME_LEN} bytes, got {0}")]
    WrongLength(usize),
    #[error("bad header prefix at byte {index}: expected {expected:#04x}, got {got:#04x}")]
    BadPrefix { index: usize, expected: u8, got: u8 },
}

/// Decode a 30-byte advertisement payload back into a frame.
pub fn decode_frame(payload: &[u8]) -> Result<IBeaconFrame, DecodeError> {
    if payload.len() != FRAME_LEN {
        return Err(DecodeError::WrongLength(payload.len()));
    }
    for (index, (&got, &expected)) in payload.iter().zip(FRAME_PREFIX.iter()).enumerate() {
        if got != expected {
            return Err(DecodeError::BadPrefix {
                index,
                expected,
                got,
            });
        }
    }
    let mut uuid = [0u8; 16];
    uuid.copy_from_slice(&payload[9..25]);
    Ok(IBeaconFrame {
        uuid: EquipmentUuid(uuid),
        major: u16::from_be_bytes([payload[25], payload[26]]),
        minor: u16::from_be_bytes([payload[27], payload[28]]),
        measured_power: payload[29] as i8,
    })
}

/// Registry lookup and parse failures.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("unknown equipment uuid {0}")]
    UnknownUuid(String),
    #[error("invalid uuid hex {0:?} (want 32 hex digits)")]
    BadUuidHex(String),
    #[error("line {0}: empty machine name")]
    EmptyName(usize),
    #[error("line {line}: duplicate uuid {uuid}")]
    DuplicateUuid { line: usize, uuid: String },
    #[error("line {0}: expected `<uuid-hex> <name>`")]
    BadLine(usize),
}

/// Ordered set of equipment types known to gateways and wearables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquipmentRegistry {
    entries: Vec<EquipmentType>,
}

impl EquipmentRegistry {
    pub fn new(entries: Vec<EquipmentType>) -> Result<Self, RegistryError> {
        let mut reg = EquipmentRegistry::default();
        for e in entries {
            reg.push(e, 0)?;
        }
        Ok(reg)
    }

    fn push(&mut self, entry: EquipmentType, line: usize) -> Result<(), RegistryError> {
        if entry.name.trim().is_empty() {
            return Err(RegistryError::EmptyName(line));
        }
        if self.entries.iter().any(|e| e.uuid == entry.uuid) {
            return Err(RegistryError::DuplicateUuid {
                line,
                uuid: entry.uuid.to_hex(),
            });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[EquipmentType] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_name(&self, name: &str) -> Option<&EquipmentType> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Resolve a uuid against the registry.
pub fn lookup_equipment<'r>(
    registry: &'r EquipmentRegistry,
    uuid: &EquipmentUuid,
) -> Result<&'r EquipmentType, RegistryError> {
    registry
        .entries
        .iter()
        .find(|e| &e.uuid == uuid)
        .ok_or_else(|| RegistryError::UnknownUuid(uuid.to_hex()))
}

/// Parse a registry file: one `<uuid-hex> <name>` pair per line, `#` starts
/// a comment, blank lines are skipped.
pub fn parse_registry(text: &str) -> Result<EquipmentRegistry, RegistryError> {
    let mut reg = EquipmentRegistry::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.split('#').next() {
            Some(l) => l.trim(),
            None => "",
        };
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let uuid_hex = parts.next().ok_or(RegistryError::BadLine(line_no))?;
        let name: String = parts.collect::<Vec<_>>().join(" ");
        if name.is_empty() {
            return Err(RegistryError::EmptyName(line_no));
        }
        let uuid = EquipmentUuid::from_hex(uuid_hex)?;
        reg.push(EquipmentType { uuid, name }, line_no)?;
    }
    Ok(reg)
}
