//! Desk-scale model of a beacon-based gym exercise recording ecosystem.
//!
//! Equipment-mounted beacons count repetitions from accelerometer
//! interrupts and broadcast them as 30-byte advertisements (the count rides
//! in the minor field, so packet loss never accumulates into counting
//! error). A duty-cycled gateway forwards whitelisted counts to a mock
//! cloud backend for a manager dashboard; a wearable associates to the
//! nearest machine by RSSI and records the user's sets. A deterministic
//! discrete-event simulator drives all of it through a lossy radio channel
//! and scores detected vs. true repetitions per endpoint.
//!
//! - [`codec`] — advertisement wire format and the equipment registry
//! - [`beacon`] — interrupt detection, rep counting, battery model
//! - [`channel`] — log-distance path loss and random packet drop
//! - [`gateway`] — whitelist, repetition vector, scan/upload duty cycle
//! - [`wearable`] — scan toggling, RSSI association, session records
//! - [`cloud`] — mock HTTP backend with persistence
//! - [`sim`] — scenario schema, event log, engine, metrics

// validations use !(x > 0.0) so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beacon;
pub mod channel;
pub mod cloud;
pub mod codec;
pub mod gateway;
pub mod sim;
pub mod wearable;

pub use codec::{
    decode_frame, encode_frame, EquipmentRegistry, EquipmentType, EquipmentUuid, IBeaconFrame,
};

/// The three demo machines used by the built-in examples and the `serve`
/// default registry.
pub fn demo_registry() -> EquipmentRegistry {
    EquipmentRegistry::new(vec![
        EquipmentType {
            uuid: EquipmentUuid::from_hex("a1a1a1a1a1a1a1a1a1a1a1a1a1a1a1a1").unwrap(),
            name: "leg_curl".into(),
        },
        EquipmentType {
            uuid: EquipmentUuid::from_hex("b2b2b2b2b2b2b2b2b2b2b2b2b2b2b2b2").unwrap(),
            name: "leg_extension".into(),
        },
        EquipmentType {
            uuid: EquipmentUuid::from_hex("c3c3c3c3c3c3c3c3c3c3c3c3c3c3c3c3").unwrap(),
            name: "lat_pull".into(),
        },
    ])
    .expect("demo registry is well-formed")
}
