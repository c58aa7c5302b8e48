//! Scenario schema: the JSON description of one scripted studio session —
//! machines, beacons, gateway(s), wearables, the workout ground truth,
//! channel parameters, and fault injections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beacon::{AccelSample, Axis, Direction, InterruptConfig, PowerProfile};
use crate::channel::{ChannelParams, Placement};
use crate::codec::{EquipmentRegistry, EquipmentType, EquipmentUuid};
use crate::gateway::{DEFAULT_SCAN_SECS, DEFAULT_UPLOAD_SECS};
use crate::wearable::{DEFAULT_ASSOCIATION_WINDOW_SECS, DEFAULT_SET_TIMEOUT_SECS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub uuid: EquipmentUuid,
    pub name: String,
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeaconSpec {
    /// Registry name of the machine this beacon is mounted on.
    pub equipment: String,
    /// Advertised as major; defaults to 0.
    #[serde(default)]
    pub instance: u16,
    #[serde(default = "default_measured_power")]
    pub measured_power: i8,
    pub interrupt: InterruptConfig,
    #[serde(default = "default_advert_gap")]
    pub advert_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerProfile>,
    /// Recorded accelerometer trace (CSV, columns t,ax,ay,az) driving this
    /// beacon instead of pulses synthesized from the workout script.
    /// Relative paths resolve against the scenario file's directory.
    /// Orientation-displacement faults apply only to synthesized traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<String>,
}

fn default_measured_power() -> i8 {
    crate::codec::DEFAULT_MEASURED_POWER
}

fn default_advert_gap() -> f64 {
    crate::beacon::DEFAULT_ADVERT_GAP_SECS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewaySpec {
    pub placement: Placement,
    #[serde(default = "default_scan")]
    pub scan_duration: f64,
    #[serde(default = "default_upload")]
    pub upload_duration: f64,
    /// Delay before the first scan window opens; offsetting a second
    /// gateway's grid lets it cover the first one's deaf phases.
    #[serde(default)]
    pub start_offset: f64,
    #[serde(default = "default_cloud_url")]
    pub cloud_base_url: String,
}

fn default_scan() -> f64 {
    DEFAULT_SCAN_SECS
}

fn default_upload() -> f64 {
    DEFAULT_UPLOAD_SECS
}

fn default_cloud_url() -> String {
    "http://localhost:8080".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WearableSpec {
    pub user: String,
    /// Step-function position: the wearable sits at the waypoint with the
    /// largest `t` not exceeding now.
    pub placements: Vec<Waypoint>,
    /// Times at which the user long-touches (each toggles scanning).
    #[serde(default)]
    pub long_touches: Vec<f64>,
    #[serde(default = "default_association_window")]
    pub association_window: f64,
    #[serde(default = "default_set_timeout")]
    pub set_timeout: f64,
}

fn default_association_window() -> f64 {
    DEFAULT_ASSOCIATION_WINDOW_SECS
}

fn default_set_timeout() -> f64 {
    DEFAULT_SET_TIMEOUT_SECS
}

/// One scripted set: ground truth for the metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkoutSet {
    pub user: String,
    pub equipment: String,
    pub start_t: f64,
    pub reps: u16,
    #[serde(default = "default_rep_period")]
    pub rep_period_s: f64,
}

fn default_rep_period() -> f64 {
    5.0
}

impl WorkoutSet {
    /// Time of the last repetition (and thus of the final advertisement
    /// pair, up to the advert gap).
    pub fn last_rep_t(&self) -> f64 {
        self.start_t + (self.reps.max(1) as f64 - 1.0) * self.rep_period_s
    }

    /// Repetition times, `reps` of them, `rep_period_s` apart.
    pub fn rep_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.reps).map(|i| self.start_t + i as f64 * self.rep_period_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fault {
    /// The beacon's mounting slips at `t`: subsequent repetitions move a
    /// different axis, so the configured interrupt never fires again.
    OrientationDisplacement { equipment: String, t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub registry: Vec<RegistryEntry>,
    pub beacons: Vec<BeaconSpec>,
    pub gateway: GatewaySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_gateway: Option<GatewaySpec>,
    pub wearables: Vec<WearableSpec>,
    pub workout_script: Vec<WorkoutSet>,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<Fault>,
    /// Directory the scenario was loaded from; anchors relative
    /// `trace_csv` paths.
    #[serde(skip)]
    pub base_dir: Option<std::path::PathBuf>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("failed to read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let mut scenario: Scenario = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        scenario.base_dir = path.parent().map(|p| p.to_path_buf());
        scenario.validate()?;
        Ok(scenario)
    }

    /// Resolve a beacon's recorded trace, if it has one.
    pub fn load_trace(
        &self,
        beacon: &BeaconSpec,
    ) -> Result<Option<Vec<AccelSample>>, ScenarioError> {
        let Some(rel) = &beacon.trace_csv else {
            return Ok(None);
        };
        let path = match &self.base_dir {
            Some(dir) => dir.join(rel),
            None => std::path::PathBuf::from(rel),
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| invalid(format!("beacon trace {} unreadable: {e}", path.display())))?;
        let trace = crate::beacon::parse_trace_csv(&text)
            .map_err(|e| invalid(format!("beacon trace {}: {e}", path.display())))?;
        if trace.first().is_some_and(|s| s.t < 0.0) {
            return Err(invalid(format!(
                "beacon trace {} starts before t = 0",
                path.display()
            )));
        }
        Ok(Some(trace))
    }

    /// Equipment registry implied by the scenario.
    pub fn registry(&self) -> Result<EquipmentRegistry, ScenarioError> {
        EquipmentRegistry::new(
            self.registry
                .iter()
                .map(|e| EquipmentType {
                    uuid: e.uuid,
                    name: e.name.clone(),
                })
                .collect(),
        )
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn equipment_placement(&self, name: &str) -> Option<Placement> {
        self.registry
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.placement)
    }

    /// Check every cross-reference and numeric constraint, reporting the
    /// first violation found.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.registry.is_empty() {
            return Err(invalid("registry must list at least one machine"));
        }
        let registry = self.registry()?;
        for entry in &self.registry {
            if !(entry.placement.x.is_finite() && entry.placement.y.is_finite()) {
                return Err(invalid(format!(
                    "machine {:?} has a non-finite placement",
                    entry.name
                )));
            }
        }

        if self.beacons.is_empty() {
            return Err(invalid("at least one beacon is required"));
        }
        for (i, beacon) in self.beacons.iter().enumerate() {
            if registry.by_name(&beacon.equipment).is_none() {
                return Err(invalid(format!(
                    "beacon {i} references unknown equipment {:?}",
                    beacon.equipment
                )));
            }
            beacon
                .interrupt
                .validate()
                .map_err(|e| invalid(e.to_string()))?;
            if !(beacon.advert_gap > 0.0) {
                return Err(invalid(format!("beacon {i} advert_gap must be > 0")));
            }
            if let Some(power) = &beacon.power {
                power.validate().map_err(|e| invalid(e.to_string()))?;
            }
            let dup = self.beacons[..i]
                .iter()
                .any(|b| b.equipment == beacon.equipment && b.instance == beacon.instance);
            if dup {
                return Err(invalid(format!(
                    "duplicate beacon identity ({}, instance {})",
                    beacon.equipment, beacon.instance
                )));
            }
        }

        for (label, gw) in self.gateways() {
            if !(gw.scan_duration > 0.0 && gw.upload_duration > 0.0) {
                return Err(invalid(format!("{label}: durations must be > 0")));
            }
            if gw.start_offset < 0.0 {
                return Err(invalid(format!("{label}: start_offset must be >= 0")));
            }
        }

        for wearable in &self.wearables {
            if wearable.placements.is_empty() {
                return Err(invalid(format!(
                    "wearable {:?} needs at least one waypoint",
                    wearable.user
                )));
            }
            if wearable.placements.windows(2).any(|w| w[1].t < w[0].t) {
                return Err(invalid(format!(
                    "wearable {:?} waypoints out of order",
                    wearable.user
                )));
            }
            if wearable.long_touches.first().is_some_and(|t| *t < 0.0) {
                return Err(invalid(format!(
                    "wearable {:?} long_touches must not be negative",
                    wearable.user
                )));
            }
            if wearable.long_touches.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(format!(
                    "wearable {:?} long_touches must be strictly increasing",
                    wearable.user
                )));
            }
            if !(wearable.association_window > 0.0 && wearable.set_timeout > 0.0) {
                return Err(invalid(format!(
                    "wearable {:?}: windows must be > 0",
                    wearable.user
                )));
            }
            if self
                .wearables
                .iter()
                .filter(|w| w.user == wearable.user)
                .count()
                > 1
            {
                return Err(invalid(format!(
                    "duplicate wearable user {:?}",
                    wearable.user
                )));
            }
        }

        if self.workout_script.is_empty() {
            return Err(invalid("workout_script must contain at least one set"));
        }
        for (i, set) in self.workout_script.iter().enumerate() {
            if registry.by_name(&set.equipment).is_none() {
                return Err(invalid(format!(
                    "set {i} references unknown equipment {:?}",
                    set.equipment
                )));
            }
            if !self.beacons.iter().any(|b| b.equipment == set.equipment) {
                return Err(invalid(format!(
                    "set {i} equipment {:?} has no beacon",
                    set.equipment
                )));
            }
            if set.reps == 0 {
                return Err(invalid(format!("set {i} must have at least one rep")));
            }
            if !(set.rep_period_s > 0.0) || !set.start_t.is_finite() || set.start_t < 0.0 {
                return Err(invalid(format!("set {i} has bad timing")));
            }
        }
        // Sets on one machine must be separated far enough for the beacon
        // counter to reset and for trailing PATCHes to attribute to the
        // right set; sets of one user far enough apart not to overlap.
        let min_gap =
            crate::beacon::RESET_WINDOW_SECS.max(crate::sim::engine::attribution_slack(self));
        let mut by_machine = self.workout_script.clone();
        by_machine.sort_by(|a, b| {
            a.equipment
                .cmp(&b.equipment)
                .then(a.start_t.total_cmp(&b.start_t))
        });
        for pair in by_machine.windows(2) {
            if pair[0].equipment == pair[1].equipment
                && pair[1].start_t <= pair[0].last_rep_t() + min_gap
            {
                return Err(invalid(format!(
                    "sets on {:?} must start more than {min_gap:.1} s after the previous set's last rep",
                    pair[0].equipment
                )));
            }
        }
        let mut by_user = self.workout_script.clone();
        by_user.sort_by(|a, b| a.user.cmp(&b.user).then(a.start_t.total_cmp(&b.start_t)));
        for pair in by_user.windows(2) {
            if pair[0].user == pair[1].user && pair[1].start_t <= pair[0].last_rep_t() {
                return Err(invalid(format!(
                    "user {:?} has overlapping sets",
                    pair[0].user
                )));
            }
        }

        self.channel.validate().map_err(invalid)?;

        for fault in &self.faults {
            let Fault::OrientationDisplacement { equipment, t } = fault;
            if registry.by_name(equipment).is_none() {
                return Err(invalid(format!(
                    "fault references unknown equipment {equipment:?}"
                )));
            }
            if !t.is_finite() {
                return Err(invalid("fault time must be finite".to_string()));
            }
        }
        Ok(())
    }

    /// The configured gateways with display labels, primary first.
    pub fn gateways(&self) -> Vec<(String, &GatewaySpec)> {
        let mut out = vec![("gateway 0".to_string(), &self.gateway)];
        if let Some(second) = &self.second_gateway {
            out.push(("gateway 1".to_string(), second));
        }
        out
    }

    /// First orientation-displacement time for a machine, if any.
    pub fn displacement_t(&self, equipment: &str) -> Option<f64> {
        self.faults
            .iter()
            .map(|Fault::OrientationDisplacement { equipment: e, t }| (e, *t))
            .filter(|(e, _)| e.as_str() == equipment)
            .map(|(_, t)| t)
            .fold(None, |acc, t| Some(acc.map_or(t, |a: f64| a.min(t))))
    }
}

/// Build the accelerometer trace a beacon would see: one above-threshold
/// pulse per scripted repetition, moved to a rotated axis once an
/// orientation-displacement fault (if any) has occurred.
pub fn synthesize_trace(scenario: &Scenario, beacon: &BeaconSpec) -> Vec<AccelSample> {
    let displacement_t = scenario.displacement_t(&beacon.equipment);
    let mut times: Vec<f64> = scenario
        .workout_script
        .iter()
        .filter(|set| set.equipment == beacon.equipment)
        .flat_map(|set| set.rep_times().collect::<Vec<_>>())
        .collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();

    let magnitude = beacon.interrupt.threshold * 1.5;
    let signed = match beacon.interrupt.direction {
        Direction::Positive => magnitude,
        Direction::Negative => -magnitude,
    };
    times
        .into_iter()
        .map(|t| {
            let displaced = displacement_t.is_some_and(|ft| t >= ft);
            let axis = if displaced {
                rotated(beacon.interrupt.axis)
            } else {
                beacon.interrupt.axis
            };
            let mut sample = AccelSample {
                t,
                ax: 0.0,
                ay: 0.0,
                az: 0.0,
            };
            match axis {
                Axis::X => sample.ax = signed,
                Axis::Y => sample.ay = signed,
                Axis::Z => sample.az = signed,
            }
            sample
        })
        .collect()
}

fn rotated(axis: Axis) -> Axis {
    match axis {
        Axis::X => Axis::Y,
        Axis::Y => Axis::Z,
        Axis::Z => Axis::X,
    }
}

/// Position of a wearable at time `t`.
pub fn waypoint_at(placements: &[Waypoint], t: f64) -> Placement {
    let mut current = &placements[0];
    for wp in placements {
        if wp.t <= t {
            current = wp;
        } else {
            break;
        }
    }
    Placement {
        x: current.x,
        y: current.y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Scenario {
        serde_json::from_value(serde_json::json!({
            "seed": 7,
            "registry": [
                {"uuid": "11111111111111111111111111111111", "name": "leg_curl",
                 "placement": {"x": 0.0, "y": 0.0}}
            ],
            "beacons": [
                {"equipment": "leg_curl",
                 "interrupt": {"axis": "z", "direction": "positive", "threshold": 1.0, "debounce": 2.0}}
            ],
            "gateway": {"placement": {"x": 1.0, "y": 1.0}},
            "wearables": [
                {"user": "alice", "placements": [{"t": 0.0, "x": 0.5, "y": 0.0}],
                 "long_touches": [1.0]}
            ],
            "workout_script": [
                {"user": "alice", "equipment": "leg_curl", "start_t": 10.0, "reps": 4}
            ]
        }))
        .unwrap()
    }

    #[test]
    fn minimal_scenario_validates_with_defaults() {
        let s = minimal();
        s.validate().unwrap();
        assert_eq!(s.gateway.scan_duration, 3.0);
        assert_eq!(s.gateway.upload_duration, 0.9);
        assert_eq!(s.beacons[0].measured_power, -59);
        assert_eq!(s.workout_script[0].rep_period_s, 5.0);
        assert_eq!(s.channel.base_loss_prob, 0.0);
    }

    #[test]
    fn unknown_equipment_is_rejected_with_the_violation_named() {
        let mut s = minimal();
        s.workout_script[0].equipment = "rowing".into();
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("rowing"), "{err}");
    }

    #[test]
    fn overlapping_sets_on_one_machine_are_rejected() {
        let mut s = minimal();
        let mut second = s.workout_script[0].clone();
        second.start_t = s.workout_script[0].last_rep_t() + 1.0;
        s.workout_script.push(second);
        assert!(s.validate().is_err());
    }

    #[test]
    fn set_geometry() {
        let set = WorkoutSet {
            user: "a".into(),
            equipment: "m".into(),
            start_t: 10.0,
            reps: 4,
            rep_period_s: 5.0,
        };
        assert_eq!(
            set.rep_times().collect::<Vec<_>>(),
            vec![10.0, 15.0, 20.0, 25.0]
        );
        assert_eq!(set.last_rep_t(), 25.0);
    }

    #[test]
    fn trace_pulses_once_per_rep_on_the_configured_axis() {
        let s = minimal();
        let trace = synthesize_trace(&s, &s.beacons[0]);
        assert_eq!(trace.len(), 4);
        assert!(trace.iter().all(|smp| smp.az == 1.5 && smp.ax == 0.0));
        let interrupts = crate::beacon::detect_interrupts(&trace, &s.beacons[0].interrupt);
        assert_eq!(interrupts, vec![10.0, 15.0, 20.0, 25.0]);
    }

    #[test]
    fn displacement_moves_pulses_off_axis() {
        let mut s = minimal();
        s.faults.push(Fault::OrientationDisplacement {
            equipment: "leg_curl".into(),
            t: 17.0,
        });
        let trace = synthesize_trace(&s, &s.beacons[0]);
        let interrupts = crate::beacon::detect_interrupts(&trace, &s.beacons[0].interrupt);
        // pulses at 10 and 15 fire; 20 and 25 land on the rotated axis
        assert_eq!(interrupts, vec![10.0, 15.0]);
        assert!(trace[2].ax == 1.5 && trace[2].az == 0.0);
    }

    #[test]
    fn waypoint_step_function() {
        let wps = vec![
            Waypoint {
                t: 0.0,
                x: 0.0,
                y: 0.0,
            },
            Waypoint {
                t: 10.0,
                x: 5.0,
                y: 0.0,
            },
        ];
        assert_eq!(waypoint_at(&wps, 0.0), Placement { x: 0.0, y: 0.0 });
        assert_eq!(waypoint_at(&wps, 9.9), Placement { x: 0.0, y: 0.0 });
        assert_eq!(waypoint_at(&wps, 10.0), Placement { x: 5.0, y: 0.0 });
        assert_eq!(waypoint_at(&wps, 99.0), Placement { x: 5.0, y: 0.0 });
    }

    #[test]
    fn scenario_json_roundtrip() {
        let s = minimal();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
    }
}
