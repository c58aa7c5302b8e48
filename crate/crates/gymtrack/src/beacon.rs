//! Equipment-mounted beacon: interrupt detection on accelerometer traces,
//! repetition counting with a 5 s reset, double-advertisement emission, and
//! the battery model.
//!
//! The inertial part stays quiet until the configured axis crosses a
//! threshold; each crossing is one repetition. The repetition count rides in
//! the advertisement minor field and resets to zero once no interrupt has
//! arrived for more than [`RESET_WINDOW_SECS`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{EquipmentType, IBeaconFrame};

/// Silence after which the repetition counter resets (strictly greater-than
/// comparison, so a rep cadence of exactly 5 s never resets mid-set).
pub const RESET_WINDOW_SECS: f64 = 5.0;

/// Slop on the reset comparison so accumulated float error in sample times
/// (e.g. 16.03 - 11.03 = 5.000000000000002) cannot fake a longer-than-5 s
/// gap at an exact 5 s cadence.
const RESET_SLOP_SECS: f64 = 1e-9;

/// Gap between the two copies of a double advertisement.
pub const DEFAULT_ADVERT_GAP_SECS: f64 = 0.1;

/// One accelerometer sample, axes in g.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelSample {
    pub fn axis(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.ax,
            Axis::Y => self.ay,
            Axis::Z => self.az,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

/// Wake-up interrupt configuration: fire when `axis` crosses `threshold`
/// in `direction`, then hold off for `debounce` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterruptConfig {
    pub axis: Axis,
    pub direction: Direction,
    /// Threshold magnitude in g, > 0.
    pub threshold: f64,
    /// Minimum gap between interrupts, seconds, > 0.
    pub debounce: f64,
}

impl InterruptConfig {
    pub fn validate(&self) -> Result<(), BeaconError> {
        if !(self.threshold > 0.0) {
            return Err(BeaconError::BadConfig("interrupt threshold must be > 0"));
        }
        if !(self.debounce > 0.0) {
            return Err(BeaconError::BadConfig("interrupt debounce must be > 0"));
        }
        Ok(())
    }

    fn crosses(&self, value: f64) -> bool {
        match self.direction {
            Direction::Positive => value >= self.threshold,
            Direction::Negative => value <= -self.threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum BeaconError {
    #[error("bad beacon config: {0}")]
    BadConfig(&'static str),
}

/// Scan a time-ordered trace and return the interrupt times.
///
/// An interrupt fires at the first sample where the configured axis crosses
/// the threshold in the configured direction (crossing is `>=`, not `>`),
/// then further crossings are suppressed until `debounce` seconds have
/// passed. An empty trace yields an empty list.
pub fn detect_interrupts(trace: &[AccelSample], cfg: &InterruptConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<f64> = None;
    for sample in trace {
        if !cfg.crosses(sample.axis(cfg.axis)) {
            continue;
        }
        match last {
            Some(prev) if sample.t - prev < cfg.debounce => continue,
            _ => {
                out.push(sample.t);
                last = Some(sample.t);
            }
        }
    }
    out
}

/// Parse an accelerometer trace from CSV text with columns `t,ax,ay,az`.
/// A header row naming the first column `t` is skipped. Sample times must
/// be strictly increasing.
pub fn parse_trace_csv(text: &str) -> Result<Vec<AccelSample>, TraceError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && cols.first().is_some_and(|c| c.eq_ignore_ascii_case("t")) {
            continue;
        }
        if cols.len() != 4 {
            return Err(TraceError::BadColumnCount {
                line: line_no,
                got: cols.len(),
            });
        }
        let mut vals = [0.0f64; 4];
        for (i, col) in cols.iter().enumerate() {
            vals[i] = col.parse::<f64>().map_err(|_| TraceError::BadNumber {
                line: line_no,
                field: col.to_string(),
            })?;
            if !vals[i].is_finite() {
                return Err(TraceError::BadNumber {
                    line: line_no,
                    field: col.to_string(),
                });
            }
        }
        let sample = AccelSample {
            t: vals[0],
            ax: vals[1],
            ay: vals[2],
            az: vals[3],
        };
        if let Some(prev) = out.last() {
            let prev: &AccelSample = prev;
            if sample.t <= prev.t {
                return Err(TraceError::NonIncreasingTime { line: line_no });
            }
        }
        out.push(sample);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: expected 4 columns t,ax,ay,az, got {got}")]
    BadColumnCount { line: usize, got: usize },
    #[error("line {line}: bad number {field:?}")]
    BadNumber { line: usize, field: String },
    #[error("line {line}: sample times must be strictly increasing")]
    NonIncreasingTime { line: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeaconMode {
    Idle,
    Advertising,
}

/// A frame due to leave the antenna at `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Emission {
    pub t: f64,
    pub frame: IBeaconFrame,
    /// 0 for the first copy, 1 for the duplicate.
    pub copy: u8,
}

/// What one step did: emissions scheduled, whether the counter reset,
/// whether an increment clamped at the 16-bit ceiling.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    pub emissions: Vec<Emission>,
    pub reset: bool,
    pub counter_overflow: bool,
}

/// One equipment-mounted beacon.
#[derive(Clone, Debug)]
pub struct Beacon {
    pub equipment: EquipmentType,
    /// Advertised as major.
    pub instance: u16,
    pub measured_power: i8,
    pub advert_gap: f64,
    pub rep_count: u16,
    pub last_interrupt_t: Option<f64>,
    pub mode: BeaconMode,
}

impl Beacon {
    pub fn new(equipment: EquipmentType, instance: u16, measured_power: i8) -> Self {
        Beacon {
            equipment,
            instance,
            measured_power,
            advert_gap: DEFAULT_ADVERT_GAP_SECS,
            rep_count: 0,
            last_interrupt_t: None,
            mode: BeaconMode::Idle,
        }
    }

    fn frame(&self) -> IBeaconFrame {
        IBeaconFrame {
            uuid: self.equipment.uuid,
            major: self.instance,
            minor: self.rep_count,
            measured_power: self.measured_power,
        }
    }

    /// Advance the beacon to `now`, optionally feeding it an interrupt.
    ///
    /// Reset is applied lazily first: if more than [`RESET_WINDOW_SECS`] have
    /// passed since the last interrupt the counter drops to zero and the
    /// beacon goes idle (silently — no advertisement marks the reset). An
    /// interrupt then increments the counter, clamping at u16::MAX, and emits
    /// the updated frame twice: at `now` and `now + advert_gap`.
    pub fn step(&mut self, now: f64, interrupt: bool) -> StepOutcome {
        let mut outcome = StepOutcome::default();
        if let Some(last) = self.last_interrupt_t {
            if now - last > RESET_WINDOW_SECS + RESET_SLOP_SECS && self.rep_count != 0 {
                self.rep_count = 0;
                self.mode = BeaconMode::Idle;
                outcome.reset = true;
            }
        }
        if interrupt {
            if self.rep_count == u16::MAX {
                outcome.counter_overflow = true;
            } else {
                self.rep_count += 1;
            }
            self.last_interrupt_t = Some(now);
            self.mode = BeaconMode::Advertising;
            let frame = self.frame();
            outcome.emissions.push(Emission {
                t: now,
                frame,
                copy: 0,
            });
            outcome.emissions.push(Emission {
                t: now + self.advert_gap,
                frame,
                copy: 1,
            });
        }
        outcome
    }
}

/// Beacon supply-side parameters for the battery estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub idle_current_ma: f64,
    pub advertising_current_ma: f64,
    pub advertising_hours_per_day: f64,
    pub battery_capacity_mah: f64,
    /// Fraction of the nominal charge treated as usable, in (0, 1].
    pub usable_fraction: f64,
}

impl PowerProfile {
    /// The measured reference profile: 0.03 mA idle, 0.04 mA advertising,
    /// 6 h advertising per day, CR2032 at 210 mAh with 80% usable.
    pub fn reference() -> Self {
        PowerProfile {
            idle_current_ma: 0.03,
            advertising_current_ma: 0.04,
            advertising_hours_per_day: 6.0,
            battery_capacity_mah: 210.0,
            usable_fraction: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), BeaconError> {
        if !(self.idle_current_ma > 0.0) || !(self.advertising_current_ma > 0.0) {
            return Err(BeaconError::BadConfig("currents must be > 0"));
        }
        if !(self.battery_capacity_mah > 0.0) {
            return Err(BeaconError::BadConfig("battery capacity must be > 0"));
        }
        if !(0.0..=24.0).contains(&self.advertising_hours_per_day) {
            return Err(BeaconError::BadConfig(
                "advertising hours must be in [0, 24]",
            ));
        }
        if !(self.usable_fraction > 0.0 && self.usable_fraction <= 1.0) {
            return Err(BeaconError::BadConfig("usable fraction must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Expected battery life in days:
/// usable charge / (daily advertising draw + daily idle draw).
///
/// On the reference profile this comes to ≈215.4 days. The prototype
/// hardware this models was published with a ~400 day estimate, which does
/// not follow from its stated currents; this function reports the
/// arithmetic, not the claim.
pub fn battery_life_days(p: &PowerProfile) -> f64 {
    let usable_mah = p.battery_capacity_mah * p.usable_fraction;
    let daily_mah = p.advertising_hours_per_day * p.advertising_current_ma
        + (24.0 - p.advertising_hours_per_day) * p.idle_current_ma;
    usable_mah / daily_mah
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::EquipmentUuid;

    fn cfg() -> InterruptConfig {
        InterruptConfig {
            axis: Axis::Z,
            direction: Direction::Positive,
            threshold: 1.0,
            debounce: 2.0,
        }
    }

    fn test_beacon() -> Beacon {
        Beacon::new(
            EquipmentType {
                uuid: EquipmentUuid([1; 16]),
                name: "leg_curl".into(),
            },
            0,
            -59,
        )
    }

    fn sine_trace(amplitude: f64, period: f64, duration: f64, dt: f64) -> Vec<AccelSample> {
        let n = (duration / dt).round() as usize;
        (0..=n)
            .map(|i| {
                let t = i as f64 * dt;
                AccelSample {
                    t,
                    ax: 0.0,
                    ay: 0.0,
                    az: amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
                }
            })
            .collect()
    }

    // Independent oracle for the sinusoid case: per period the signal sits at
    // or above the threshold on one closed interval whose entry point is
    // asin(threshold/amplitude) scaled back to time. With debounce shorter
    // than the period but longer than the interval, exactly one interrupt
    // fires per period, at the first sample inside the interval.
    fn expected_sine_interrupts(
        amplitude: f64,
        period: f64,
        duration: f64,
        dt: f64,
        threshold: f64,
    ) -> Vec<f64> {
        let entry = (threshold / amplitude).asin() * period / (2.0 * std::f64::consts::PI);
        let mut expected = Vec::new();
        let mut k = 0.0;
        loop {
            let window_start = entry + k * period;
            if window_start > duration {
                break;
            }
            let first_sample = (window_start / dt).ceil() * dt;
            if first_sample <= duration {
                expected.push(first_sample);
            }
            k += 1.0;
        }
        expected
    }

    #[test]
    fn flat_trace_never_fires() {
        let trace: Vec<AccelSample> = (0..100)
            .map(|i| AccelSample {
                t: i as f64 * 0.1,
                ax: 0.0,
                ay: 0.0,
                az: 0.0,
            })
            .collect();
        assert!(detect_interrupts(&trace, &cfg()).is_empty());
        assert!(detect_interrupts(&[], &cfg()).is_empty());
    }

    #[test]
    fn sinusoid_fires_once_per_period() {
        let dt = 0.01;
        let trace = sine_trace(1.5, 5.0, 20.0, dt);
        let got = detect_interrupts(&trace, &cfg());
        let expected = expected_sine_interrupts(1.5, 5.0, 20.0, dt, 1.0);
        assert_eq!(got.len(), 4);
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(expected.iter()) {
            assert!((g - e).abs() < dt / 2.0, "got {g}, expected {e}");
        }
    }

    #[test]
    fn exact_threshold_sample_fires() {
        let trace = [AccelSample {
            t: 0.0,
            ax: 0.0,
            ay: 0.0,
            az: 1.0,
        }];
        assert_eq!(detect_interrupts(&trace, &cfg()), vec![0.0]);
    }

    #[test]
    fn negative_direction_uses_negated_threshold() {
        let cfg = InterruptConfig {
            axis: Axis::X,
            direction: Direction::Negative,
            threshold: 0.5,
            debounce: 1.0,
        };
        let trace = [
            AccelSample {
                t: 0.0,
                ax: 0.6,
                ay: 0.0,
                az: 0.0,
            },
            AccelSample {
                t: 1.0,
                ax: -0.6,
                ay: 0.0,
                az: 0.0,
            },
        ];
        assert_eq!(detect_interrupts(&trace, &cfg), vec![1.0]);
    }

    #[test]
    fn four_reps_at_five_seconds_emit_eight_packets_in_twenty() {
        let mut b = test_beacon();
        let mut emissions = Vec::new();
        for i in 0..4 {
            emissions.extend(b.step(i as f64 * 5.0, true).emissions);
        }
        assert_eq!(emissions.len(), 8);
        assert!(emissions.iter().all(|e| e.t < 20.0));
        // Minor values climb 1,1,2,2,3,3,4,4 across the duplicate pairs.
        let minors: Vec<u16> = emissions.iter().map(|e| e.frame.minor).collect();
        assert_eq!(minors, vec![1, 1, 2, 2, 3, 3, 4, 4]);
        assert_eq!(b.rep_count, 4);
        // Spacing of exactly 5 s never resets mid-set.
        assert_eq!(b.mode, BeaconMode::Advertising);
    }

    #[test]
    fn counter_resets_after_five_seconds_of_silence() {
        let mut b = test_beacon();
        b.step(0.0, true);
        let outcome = b.step(5.1, false);
        assert!(outcome.reset);
        assert!(outcome.emissions.is_empty());
        assert_eq!(b.rep_count, 0);
        assert_eq!(b.mode, BeaconMode::Idle);
    }

    #[test]
    fn exactly_five_seconds_does_not_reset() {
        let mut b = test_beacon();
        b.step(0.0, true);
        let outcome = b.step(5.0, false);
        assert!(!outcome.reset);
        assert_eq!(b.rep_count, 1);
    }

    #[test]
    fn no_interrupts_is_identity() {
        let mut b = test_beacon();
        let before = (b.rep_count, b.mode);
        let outcome = b.step(100.0, false);
        assert!(outcome.emissions.is_empty());
        assert!(!outcome.reset);
        assert_eq!((b.rep_count, b.mode), before);
    }

    #[test]
    fn counter_clamps_at_u16_max() {
        let mut b = test_beacon();
        b.rep_count = u16::MAX - 1;
        b.last_interrupt_t = Some(0.0);
        let o1 = b.step(1.0, true);
        assert!(!o1.counter_overflow);
        assert_eq!(b.rep_count, u16::MAX);
        let o2 = b.step(2.0, true);
        assert!(o2.counter_overflow);
        assert_eq!(b.rep_count, u16::MAX);
        assert_eq!(o2.emissions[0].frame.minor, u16::MAX);
    }

    #[test]
    fn battery_reference_profile_is_about_215_days() {
        // 210 * 0.8 = 168 mAh usable; 6*0.04 + 18*0.03 = 0.78 mAh/day.
        let days = battery_life_days(&PowerProfile::reference());
        assert!((days - 168.0 / 0.78).abs() < 1e-9);
        assert!((days - 215.4).abs() < 0.05);
    }

    #[test]
    fn battery_idle_only_case() {
        let p = PowerProfile {
            idle_current_ma: 0.03,
            advertising_current_ma: 0.04,
            advertising_hours_per_day: 0.0,
            battery_capacity_mah: 210.0,
            usable_fraction: 0.8,
        };
        // 168 / 0.72 = 233.33…
        assert!((battery_life_days(&p) - 233.3).abs() < 0.05);
    }

    #[test]
    fn trace_csv_roundtrip_and_errors() {
        let trace = parse_trace_csv("t,ax,ay,az\n0.0,0.0,0.0,1.5\n0.5,0.1,0.0,0.0\n").unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0].az, 1.5);
        assert!(matches!(
            parse_trace_csv("0.0,1.0\n"),
            Err(TraceError::BadColumnCount { line: 1, got: 2 })
        ));
        assert!(matches!(
            parse_trace_csv("0.0,0,0,0\n0.0,0,0,0\n"),
            Err(TraceError::NonIncreasingTime { line: 2 })
        ));
        assert!(matches!(
            parse_trace_csv("0.0,x,0,0\n"),
            Err(TraceError::BadNumber { .. })
        ));
    }
}
