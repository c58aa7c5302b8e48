//! Deterministic discrete-event engine wiring beacons, the radio channel,
//! gateways, wearables and the in-process cloud store. One seeded run is a
//! pure function of the scenario: identical inputs give byte-identical
//! event logs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::beacon::{detect_interrupts, Beacon, Emission, RESET_WINDOW_SECS};
use crate::channel::{deliver, Placement, ReceiverSlot};
use crate::cloud::{Store, StoredUpdate};
use crate::codec::EquipmentRegistry;
use crate::gateway::{Gateway, GatewayConfig, WhitelistEntry};
use crate::sim::events::{EventLog, LogRecord};
use crate::sim::metrics::{metrics_from_log, MetricsReport};
use crate::sim::scenario::{synthesize_trace, waypoint_at, Scenario, ScenarioError};
use crate::wearable::{Wearable, WearableConfig};

/// Timers (association close, set timeout, reset) fire this much past
/// their strict deadline so strictly-greater comparisons see elapsed time.
const POLL_GRACE: f64 = 0.001;

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub log: EventLog,
    pub report: MetricsReport,
    /// The cloud state the dashboard would serve after the run.
    pub final_store: Store,
}

/// Run with the scenario's own seed.
pub fn run_simulation(scenario: &Scenario) -> Result<SimOutput, ScenarioError> {
    run_simulation_with_seed(scenario, scenario.seed)
}

/// Run with an overriding seed.
pub fn run_simulation_with_seed(
    scenario: &Scenario,
    seed: u64,
) -> Result<SimOutput, ScenarioError> {
    scenario.validate()?;
    let mut engine = Engine::new(scenario, seed)?;
    engine.run();
    let report = metrics_from_log(&engine.log)
        .map_err(|e| ScenarioError::Invalid(format!("metrics: {e}")))?;
    Ok(SimOutput {
        log: engine.log,
        report,
        final_store: engine.store,
    })
}

/// How far past a set's last repetition its PATCHes are still attributed
/// to it: one full gateway cycle plus margin.
pub fn attribution_slack(scenario: &Scenario) -> f64 {
    scenario
        .gateways()
        .iter()
        .map(|(_, g)| g.scan_duration + g.upload_duration)
        .fold(0.0_f64, f64::max)
        + 1.0
}

#[derive(Clone, Debug)]
enum Action {
    SetWindowMark { set: usize },
    Interrupt { beacon: usize },
    EmitCopy { beacon: usize, emission: Emission },
    ResetPoll { beacon: usize },
    GatewayTick { gateway: usize },
    LongTouch { wearable: usize },
    WearablePoll { wearable: usize },
}

struct QueuedEvent {
    t: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.seq == other.seq
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    // BinaryHeap is a max-heap; invert so the earliest (t, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RxId {
    Gateway(usize),
    Wearable(usize),
}

struct Engine<'s> {
    scenario: &'s Scenario,
    registry: EquipmentRegistry,
    beacons: Vec<Beacon>,
    beacon_placements: Vec<Placement>,
    interrupt_schedules: Vec<Vec<f64>>,
    gateways: Vec<Gateway>,
    gateway_placements: Vec<Placement>,
    wearables: Vec<Wearable>,
    /// Last logged association per wearable, to log transitions once.
    associations: Vec<Option<String>>,
    store: Store,
    seed: u64,
    rng: ChaCha8Rng,
    queue: BinaryHeap<QueuedEvent>,
    seq: u64,
    log: EventLog,
    sim_end: f64,
}

impl<'s> Engine<'s> {
    fn new(scenario: &'s Scenario, seed: u64) -> Result<Self, ScenarioError> {
        let registry = scenario.registry()?;
        let store = Store::new(&registry);

        let mut beacons = Vec::new();
        let mut beacon_placements = Vec::new();
        let mut interrupt_schedules = Vec::new();
        for spec in &scenario.beacons {
            let equipment = registry
                .by_name(&spec.equipment)
                .expect("validated beacon equipment")
                .clone();
            let mut beacon = Beacon::new(equipment, spec.instance, spec.measured_power);
            beacon.advert_gap = spec.advert_gap;
            beacons.push(beacon);
            beacon_placements.push(
                scenario
                    .equipment_placement(&spec.equipment)
                    .expect("validated placement"),
            );
            // a recorded trace, when configured, replaces the pulses
            // synthesized from the workout script
            let trace = match scenario.load_trace(spec)? {
                Some(trace) => trace,
                None => synthesize_trace(scenario, spec),
            };
            interrupt_schedules.push(detect_interrupts(&trace, &spec.interrupt));
        }

        let whitelist: Vec<WhitelistEntry> = scenario
            .beacons
            .iter()
            .map(|spec| WhitelistEntry {
                uuid: registry.by_name(&spec.equipment).expect("validated").uuid,
                major: spec.instance,
                machine: spec.equipment.clone(),
            })
            .collect();

        let mut gateways = Vec::new();
        let mut gateway_placements = Vec::new();
        for (_, gw_spec) in scenario.gateways() {
            let config = GatewayConfig {
                whitelist: whitelist.clone(),
                scan_duration: gw_spec.scan_duration,
                upload_duration: gw_spec.upload_duration,
                cloud_base_url: gw_spec.cloud_base_url.clone(),
            };
            gateways.push(
                Gateway::new(config, gw_spec.start_offset)
                    .map_err(|e| ScenarioError::Invalid(e.to_string()))?,
            );
            gateway_placements.push(gw_spec.placement);
        }

        let wearables: Vec<Wearable> = scenario
            .wearables
            .iter()
            .map(|spec| {
                Wearable::new(WearableConfig {
                    association_window: spec.association_window,
                    set_timeout: spec.set_timeout,
                })
            })
            .collect();
        let associations = vec![None; wearables.len()];

        let last_script_t = scenario
            .workout_script
            .iter()
            .map(|s| s.last_rep_t())
            .chain(
                scenario
                    .wearables
                    .iter()
                    .flat_map(|w| w.long_touches.iter().copied()),
            )
            .chain(interrupt_schedules.iter().flatten().copied())
            .fold(0.0_f64, f64::max);
        let max_timeout = scenario
            .wearables
            .iter()
            .map(|w| w.set_timeout)
            .fold(0.0_f64, f64::max);
        let sim_end = last_script_t + max_timeout + attribution_slack(scenario) + 5.0;

        Ok(Engine {
            scenario,
            registry,
            beacons,
            beacon_placements,
            interrupt_schedules,
            gateways,
            gateway_placements,
            wearables,
            associations,
            store,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: BinaryHeap::new(),
            seq: 0,
            log: EventLog::default(),
            sim_end,
        })
    }

    fn push(&mut self, t: f64, action: Action) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(QueuedEvent { t, seq, action });
    }

    fn run(&mut self) {
        self.log.push(LogRecord::Meta {
            t: 0.0,
            seed: self.seed,
            gateways: self.gateways.len(),
            scan_duration: self.scenario.gateway.scan_duration,
            upload_duration: self.scenario.gateway.upload_duration,
            attribution_slack: attribution_slack(self.scenario),
        });

        for (i, set) in self.scenario.workout_script.iter().enumerate() {
            self.push(set.start_t, Action::SetWindowMark { set: i });
        }
        for i in 0..self.beacons.len() {
            for t in self.interrupt_schedules[i].clone() {
                self.push(t, Action::Interrupt { beacon: i });
            }
        }
        for i in 0..self.gateways.len() {
            self.push(
                self.gateways[i].phase_end_t,
                Action::GatewayTick { gateway: i },
            );
        }
        for (j, spec) in self.scenario.wearables.iter().enumerate() {
            for &t in &spec.long_touches {
                self.push(t, Action::LongTouch { wearable: j });
            }
        }

        while let Some(event) = self.queue.pop() {
            match event.action {
                Action::SetWindowMark { set } => self.on_set_window(event.t, set),
                Action::Interrupt { beacon } => self.on_interrupt(event.t, beacon),
                Action::EmitCopy { beacon, emission } => {
                    self.on_emission(event.t, beacon, &emission)
                }
                Action::ResetPoll { beacon } => self.on_reset_poll(event.t, beacon),
                Action::GatewayTick { gateway } => self.on_gateway_tick(event.t, gateway),
                Action::LongTouch { wearable } => self.on_long_touch(event.t, wearable),
                Action::WearablePoll { wearable } => self.on_wearable_poll(event.t, wearable),
            }
        }
    }

    fn on_set_window(&mut self, t: f64, set: usize) {
        let s = &self.scenario.workout_script[set];
        self.log.push(LogRecord::SetWindow {
            t,
            user: s.user.clone(),
            equipment: s.equipment.clone(),
            truth: s.reps,
            start_t: s.start_t,
            end_t: s.last_rep_t(),
        });
    }

    fn on_interrupt(&mut self, t: f64, beacon: usize) {
        let outcome = self.beacons[beacon].step(t, true);
        let equipment = self.beacons[beacon].equipment.name.clone();
        let instance = self.beacons[beacon].instance;
        if outcome.reset {
            self.log.push(LogRecord::BeaconReset {
                t,
                equipment: equipment.clone(),
                instance,
            });
        }
        self.log.push(LogRecord::Interrupt {
            t,
            equipment: equipment.clone(),
            instance,
        });
        if outcome.counter_overflow {
            self.log.push(LogRecord::CounterOverflow {
                t,
                equipment,
                instance,
            });
        }
        for emission in outcome.emissions {
            self.push(emission.t, Action::EmitCopy { beacon, emission });
        }
        self.push(
            t + RESET_WINDOW_SECS + POLL_GRACE,
            Action::ResetPoll { beacon },
        );
    }

    fn on_reset_poll(&mut self, t: f64, beacon: usize) {
        let outcome = self.beacons[beacon].step(t, false);
        if outcome.reset {
            self.log.push(LogRecord::BeaconReset {
                t,
                equipment: self.beacons[beacon].equipment.name.clone(),
                instance: self.beacons[beacon].instance,
            });
        }
    }

    fn on_emission(&mut self, t: f64, beacon: usize, emission: &Emission) {
        self.log.push(LogRecord::Emission {
            t,
            equipment: self.beacons[beacon].equipment.name.clone(),
            instance: emission.frame.major,
            minor: emission.frame.minor,
            copy: emission.copy,
        });

        let mut receivers = Vec::new();
        for (i, gw) in self.gateways.iter().enumerate() {
            receivers.push(ReceiverSlot {
                id: RxId::Gateway(i),
                placement: self.gateway_placements[i],
                listening: gw.is_listening(t),
            });
        }
        for (j, w) in self.wearables.iter().enumerate() {
            receivers.push(ReceiverSlot {
                id: RxId::Wearable(j),
                placement: waypoint_at(&self.scenario.wearables[j].placements, t),
                listening: w.scanning,
            });
        }

        let receptions = deliver(
            emission,
            &self.beacon_placements[beacon],
            &receivers,
            &self.scenario.channel,
            &mut self.rng,
        );
        for reception in receptions {
            let receiver_label = match reception.receiver {
                RxId::Gateway(i) => format!("gateway{i}"),
                RxId::Wearable(j) => format!("wearable:{}", self.scenario.wearables[j].user),
            };
            self.log.push(LogRecord::Reception {
                t,
                receiver: receiver_label,
                equipment: self.beacons[beacon].equipment.name.clone(),
                instance: reception.frame.major,
                minor: reception.frame.minor,
                rssi: reception.rssi,
            });
            match reception.receiver {
                RxId::Gateway(i) => self.gateways[i].on_reception(&reception),
                RxId::Wearable(j) => {
                    self.wearables[j].on_reception(&reception, &self.registry);
                    self.log_association_change(t, j);
                    let spec = &self.scenario.wearables[j];
                    self.push(
                        t + spec.association_window + POLL_GRACE,
                        Action::WearablePoll { wearable: j },
                    );
                    self.push(
                        t + spec.set_timeout + POLL_GRACE,
                        Action::WearablePoll { wearable: j },
                    );
                }
            }
        }
    }

    fn on_gateway_tick(&mut self, t: f64, gateway: usize) {
        let before = self.gateways[gateway].phase;
        let patches = self.gateways[gateway].tick(t);
        let after = self.gateways[gateway].phase;
        if after != before {
            self.log.push(LogRecord::GatewayPhase {
                t,
                gateway,
                phase: after,
            });
        }
        for patch in patches {
            self.log.push(LogRecord::Patch {
                t,
                gateway,
                method: patch.method.clone(),
                path: patch.path.clone(),
                body: patch.body.clone(),
            });
            let update = StoredUpdate {
                t: patch.body.t,
                machine: patch.body.machine.clone(),
                reps: patch.body.reps,
            };
            if let Err(e) = self.store.apply(&update) {
                self.log.push(LogRecord::PatchRejected {
                    t,
                    gateway,
                    machine: update.machine,
                    reason: e.to_string(),
                });
            }
        }
        let next = self.gateways[gateway].phase_end_t;
        if next <= self.sim_end {
            self.push(next, Action::GatewayTick { gateway });
        }
    }

    fn on_long_touch(&mut self, t: f64, wearable: usize) {
        let record = self.wearables[wearable].on_long_touch(t);
        let user = self.scenario.wearables[wearable].user.clone();
        self.log.push(LogRecord::ScanToggle {
            t,
            user: user.clone(),
            scanning: self.wearables[wearable].scanning,
        });
        if let Some(r) = record {
            self.log.push(LogRecord::WearableSet {
                t,
                user,
                equipment: r.equipment,
                reps: r.reps,
                start_t: r.start_t,
                end_t: r.end_t,
            });
        }
        self.associations[wearable] = None;
    }

    fn on_wearable_poll(&mut self, t: f64, wearable: usize) {
        let record = self.wearables[wearable].tick(t);
        self.log_association_change(t, wearable);
        if let Some(r) = record {
            self.log.push(LogRecord::WearableSet {
                t,
                user: self.scenario.wearables[wearable].user.clone(),
                equipment: r.equipment,
                reps: r.reps,
                start_t: r.start_t,
                end_t: r.end_t,
            });
            self.associations[wearable] = None;
        }
    }

    fn log_association_change(&mut self, t: f64, wearable: usize) {
        let current = self.wearables[wearable]
            .current_equipment()
            .map(|e| e.name.clone());
        if current != self.associations[wearable] {
            if let Some(equipment) = &current {
                self.log.push(LogRecord::Association {
                    t,
                    user: self.scenario.wearables[wearable].user.clone(),
                    equipment: equipment.clone(),
                });
            }
            self.associations[wearable] = current;
        }
    }
}
