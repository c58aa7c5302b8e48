//! Smartwatch/phone listener: long-touch scan toggling, strongest-RSSI
//! equipment association, and per-set repetition recording.
//!
//! The wearable never goes deaf while scanning, so with a clean channel it
//! records every set exactly. It associates to whichever equipment showed
//! the strongest RSSI among the first receptions after scanning starts (or
//! after the previous set closed), then tracks only that equipment's
//! advertised count. The recorded figure is the maximum minor seen — an
//! absolute count, so dropped packets never skew it, only the loss of the
//! final packet can (record ≤ truth, equal when the final advert lands).

use serde::{Deserialize, Serialize};

use crate::channel::Reception;
use crate::codec::{EquipmentRegistry, EquipmentType};

/// How long after the first reception the association argmax stays open.
pub const DEFAULT_ASSOCIATION_WINDOW_SECS: f64 = 2.0;

/// Silence that closes an open set. Strictly longer than the beacon's 5 s
/// counter reset so a reset can never clip a live set.
pub const DEFAULT_SET_TIMEOUT_SECS: f64 = 10.0;

/// One recorded set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetRecord {
    pub equipment: String,
    pub reps: u16,
    pub start_t: f64,
    pub end_t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WearableConfig {
    pub association_window: f64,
    pub set_timeout: f64,
}

impl Default for WearableConfig {
    fn default() -> Self {
        WearableConfig {
            association_window: DEFAULT_ASSOCIATION_WINDOW_SECS,
            set_timeout: DEFAULT_SET_TIMEOUT_SECS,
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    equipment: EquipmentType,
    best_rssi: f64,
    max_minor: u16,
    first_t: f64,
    last_t: f64,
}

#[derive(Clone, Debug)]
enum SetPhase {
    /// Scanning (or not), no receptions since the last boundary.
    Empty,
    /// Collecting candidates until the association window closes.
    Associating {
        window_end: f64,
        candidates: Vec<Candidate>,
    },
    /// Argmax decided; only this equipment updates the open set.
    Locked {
        equipment: EquipmentType,
        max_minor: u16,
        start_t: f64,
        last_reception_t: f64,
    },
}

/// One wearable listener.
#[derive(Clone, Debug)]
pub struct Wearable {
    pub config: WearableConfig,
    pub scanning: bool,
    phase: SetPhase,
    session: Vec<SetRecord>,
}

impl Wearable {
    pub fn new(config: WearableConfig) -> Self {
        Wearable {
            config,
            scanning: false,
            phase: SetPhase::Empty,
            session: Vec::new(),
        }
    }

    pub fn session(&self) -> &[SetRecord] {
        &self.session
    }

    pub fn current_equipment(&self) -> Option<&EquipmentType> {
        match &self.phase {
            SetPhase::Locked { equipment, .. } => Some(equipment),
            _ => None,
        }
    }

    pub fn current_max_minor(&self) -> u16 {
        match &self.phase {
            SetPhase::Locked { max_minor, .. } => *max_minor,
            _ => 0,
        }
    }

    /// Long-touch toggles scanning. Entering scan clears any stale open
    /// set; leaving scan finalizes the open set if there is one.
    pub fn on_long_touch(&mut self, now: f64) -> Option<SetRecord> {
        if self.scanning {
            self.scanning = false;
            self.finalize(now)
        } else {
            self.scanning = true;
            self.phase = SetPhase::Empty;
            None
        }
    }

    /// Absorb one delivered advertisement; gated on scanning.
    pub fn on_reception<I>(&mut self, reception: &Reception<I>, registry: &EquipmentRegistry) {
        if !self.scanning {
            return;
        }
        let Ok(equipment) = crate::codec::lookup_equipment(registry, &reception.frame.uuid) else {
            return; // not gym equipment
        };
        let minor = reception.frame.minor;
        let t = reception.t;
        match &mut self.phase {
            SetPhase::Empty => {
                self.phase = SetPhase::Associating {
                    window_end: t + self.config.association_window,
                    candidates: vec![Candidate {
                        equipment: equipment.clone(),
                        best_rssi: reception.rssi,
                        max_minor: minor,
                        first_t: t,
                        last_t: t,
                    }],
                };
            }
            SetPhase::Associating {
                window_end,
                candidates,
            } => {
                if t >= *window_end {
                    self.lock_in();
                    self.on_reception(reception, registry);
                    return;
                }
                match candidates
                    .iter_mut()
                    .find(|c| c.equipment.uuid == equipment.uuid)
                {
                    Some(c) => {
                        c.best_rssi = c.best_rssi.max(reception.rssi);
                        c.max_minor = c.max_minor.max(minor);
                        c.last_t = t;
                    }
                    None => candidates.push(Candidate {
                        equipment: equipment.clone(),
                        best_rssi: reception.rssi,
                        max_minor: minor,
                        first_t: t,
                        last_t: t,
                    }),
                }
            }
            SetPhase::Locked {
                equipment: locked,
                max_minor,
                last_reception_t,
                ..
            } => {
                if locked.uuid == equipment.uuid {
                    *max_minor = (*max_minor).max(minor);
                    *last_reception_t = t;
                }
                // other equipment is ignored once associated
            }
        }
    }

    /// Time-driven update: closes the association window once it elapses
    /// and finalizes the open set after `set_timeout` of silence.
    pub fn tick(&mut self, now: f64) -> Option<SetRecord> {
        if !self.scanning {
            return None;
        }
        if let SetPhase::Associating { window_end, .. } = &self.phase {
            if now >= *window_end {
                self.lock_in();
            }
        }
        if let SetPhase::Locked {
            last_reception_t, ..
        } = &self.phase
        {
            if now - *last_reception_t > self.config.set_timeout {
                return self.finalize(now);
            }
        }
        None
    }

    /// Decide the argmax-RSSI candidate. Ties go to the earliest first
    /// reception, then to the smaller uuid, keeping the pick deterministic.
    fn lock_in(&mut self) {
        let SetPhase::Associating { candidates, .. } = &mut self.phase else {
            return;
        };
        let mut best = 0;
        for i in 1..candidates.len() {
            let (a, b) = (&candidates[i], &candidates[best]);
            let better = a.best_rssi > b.best_rssi
                || (a.best_rssi == b.best_rssi
                    && (a.first_t < b.first_t
                        || (a.first_t == b.first_t && a.equipment.uuid < b.equipment.uuid)));
            if better {
                best = i;
            }
        }
        let chosen = candidates.swap_remove(best);
        self.phase = SetPhase::Locked {
            equipment: chosen.equipment,
            max_minor: chosen.max_minor,
            start_t: chosen.first_t,
            last_reception_t: chosen.last_t,
        };
    }

    fn finalize(&mut self, now: f64) -> Option<SetRecord> {
        if matches!(self.phase, SetPhase::Associating { .. }) {
            self.lock_in();
        }
        let record = match &self.phase {
            SetPhase::Locked {
                equipment,
                max_minor,
                start_t,
                ..
            } if *max_minor > 0 => Some(SetRecord {
                equipment: equipment.name.clone(),
                reps: *max_minor,
                start_t: *start_t,
                end_t: now,
            }),
            _ => None,
        };
        self.phase = SetPhase::Empty;
        if let Some(r) = &record {
            self.session.push(r.clone());
        }
        record
    }
}

/// Session log as line-delimited JSON for downstream metrics.
pub fn session_to_ndjson(session: &[SetRecord]) -> String {
    let mut out = String::new();
    for record in session {
        out.push_str(&serde_json::to_string(record).expect("set record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{EquipmentType, EquipmentUuid, IBeaconFrame};

    fn registry() -> EquipmentRegistry {
        EquipmentRegistry::new(vec![
            EquipmentType {
                uuid: EquipmentUuid([1; 16]),
                name: "leg_curl".into(),
            },
            EquipmentType {
                uuid: EquipmentUuid([2; 16]),
                name: "leg_extension".into(),
            },
        ])
        .unwrap()
    }

    fn reception(uuid_byte: u8, minor: u16, rssi: f64, t: f64) -> Reception<&'static str> {
        Reception {
            receiver: "w",
            frame: IBeaconFrame {
                uuid: EquipmentUuid([uuid_byte; 16]),
                major: 0,
                minor,
                measured_power: -59,
            },
            rssi,
            t,
        }
    }

    fn scanning_wearable() -> Wearable {
        let mut w = Wearable::new(WearableConfig::default());
        w.on_long_touch(0.0);
        w
    }

    #[test]
    fn long_touch_toggles_and_clears() {
        let mut w = Wearable::new(WearableConfig::default());
        assert!(!w.scanning);
        assert!(w.on_long_touch(0.0).is_none());
        assert!(w.scanning);
        assert!(w.on_long_touch(1.0).is_none());
        assert!(!w.scanning);
    }

    #[test]
    fn strongest_rssi_wins_association() {
        let mut w = scanning_wearable();
        let reg = registry();
        // leg_curl at 1 m (-59), leg_extension at 5 m (≈ -73): A wins.
        w.on_reception(&reception(1, 1, -59.0, 1.0), &reg);
        w.on_reception(&reception(2, 1, -73.0, 1.1), &reg);
        w.tick(3.5);
        assert_eq!(w.current_equipment().unwrap().name, "leg_curl");
    }

    #[test]
    fn dropped_intermediate_minors_do_not_matter() {
        let mut w = scanning_wearable();
        let reg = registry();
        for (minor, t) in [(1u16, 1.0), (2, 6.0), (4, 16.0)] {
            // minor 3 lost
            w.on_reception(&reception(1, minor, -59.0, t), &reg);
        }
        assert_eq!(w.current_max_minor(), 4);
        let record = w.tick(26.1).unwrap();
        assert_eq!(record.reps, 4);
        assert_eq!(record.equipment, "leg_curl");
    }

    #[test]
    fn reception_while_not_scanning_is_ignored() {
        let mut w = Wearable::new(WearableConfig::default());
        let reg = registry();
        w.on_reception(&reception(1, 5, -59.0, 1.0), &reg);
        assert!(w.tick(20.0).is_none());
        assert!(w.session().is_empty());
    }

    #[test]
    fn unknown_uuid_is_ignored() {
        let mut w = scanning_wearable();
        let reg = registry();
        w.on_reception(&reception(9, 5, -40.0, 1.0), &reg);
        assert!(w.current_equipment().is_none());
        assert!(w.tick(20.0).is_none());
    }

    #[test]
    fn set_closes_after_timeout_silence() {
        let mut w = scanning_wearable();
        let reg = registry();
        w.on_reception(&reception(1, 10, -59.0, 5.0), &reg);
        assert!(
            w.tick(14.0).is_none(),
            "9 s of silence is below the timeout"
        );
        let record = w.tick(15.1).unwrap();
        assert_eq!(record.reps, 10);
        assert_eq!(record.start_t, 5.0);
        assert_eq!(record.end_t, 15.1);
        assert!(w.tick(30.0).is_none(), "no open set, nothing to emit");
    }

    #[test]
    fn other_equipment_ignored_once_locked() {
        let mut w = scanning_wearable();
        let reg = registry();
        w.on_reception(&reception(1, 1, -59.0, 1.0), &reg);
        w.tick(3.1); // lock to leg_curl
        w.on_reception(&reception(2, 50, -30.0, 4.0), &reg);
        w.on_reception(&reception(1, 2, -59.0, 5.0), &reg);
        let record = w.tick(16.0).unwrap();
        assert_eq!(record.equipment, "leg_curl");
        assert_eq!(record.reps, 2);
    }

    #[test]
    fn association_resets_between_sets() {
        let mut w = scanning_wearable();
        let reg = registry();
        w.on_reception(&reception(1, 3, -59.0, 1.0), &reg);
        let first = w.tick(12.0).unwrap();
        assert_eq!(first.equipment, "leg_curl");
        w.on_reception(&reception(2, 8, -60.0, 20.0), &reg);
        let second = w.tick(31.0).unwrap();
        assert_eq!(second.equipment, "leg_extension");
        assert_eq!(second.reps, 8);
        assert_eq!(w.session().len(), 2);
        assert!(w.session()[0].end_t <= w.session()[1].start_t);
    }

    #[test]
    fn touch_off_finalizes_open_set() {
        let mut w = scanning_wearable();
        let reg = registry();
        w.on_reception(&reception(1, 6, -59.0, 2.0), &reg);
        let record = w.on_long_touch(4.0).unwrap();
        assert_eq!(record.reps, 6);
        assert_eq!(record.end_t, 4.0);
        assert!(!w.scanning);
    }

    #[test]
    fn minors_arriving_during_association_window_count() {
        let mut w = scanning_wearable();
        let reg = registry();
        // two quick receptions inside the 2 s window, then the lock
        w.on_reception(&reception(1, 1, -59.0, 1.0), &reg);
        w.on_reception(&reception(1, 2, -59.0, 1.1), &reg);
        w.on_reception(&reception(1, 3, -59.0, 6.0), &reg); // closes window, locked
        let record = w.tick(17.0).unwrap();
        assert_eq!(record.reps, 3);
        assert_eq!(record.start_t, 1.0);
    }

    #[test]
    fn association_is_argmax_shift_invariant() {
        let run = |offset: f64| {
            let mut w = scanning_wearable();
            let reg = registry();
            w.on_reception(&reception(1, 1, -59.0 + offset, 1.0), &reg);
            w.on_reception(&reception(2, 1, -73.0 + offset, 1.2), &reg);
            w.tick(3.5);
            w.current_equipment().unwrap().name.clone()
        };
        assert_eq!(run(0.0), run(17.0));
        assert_eq!(run(0.0), run(-31.0));
    }

    #[test]
    fn association_ties_break_on_first_heard_then_uuid() {
        // equal best RSSI: the earlier first reception wins
        let mut w = scanning_wearable();
        let reg = registry();
        w.on_reception(&reception(2, 1, -60.0, 1.0), &reg);
        w.on_reception(&reception(1, 1, -60.0, 1.2), &reg);
        w.tick(3.5);
        assert_eq!(w.current_equipment().unwrap().name, "leg_extension");

        // equal RSSI and equal first time: the smaller uuid wins
        let mut w = scanning_wearable();
        w.on_reception(&reception(2, 1, -60.0, 1.0), &reg);
        w.on_reception(&reception(1, 1, -60.0, 1.0), &reg);
        w.tick(3.5);
        assert_eq!(w.current_equipment().unwrap().name, "leg_curl");
    }

    #[test]
    fn session_ndjson_one_line_per_record() {
        let session = vec![
            SetRecord {
                equipment: "leg_curl".into(),
                reps: 10,
                start_t: 1.0,
                end_t: 20.0,
            },
            SetRecord {
                equipment: "lat_pull".into(),
                reps: 5,
                start_t: 60.0,
                end_t: 80.0,
            },
        ];
        let text = session_to_ndjson(&session);
        assert_eq!(text.lines().count(), 2);
        let parsed: SetRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(parsed, session[0]);
    }
}
