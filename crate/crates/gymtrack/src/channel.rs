//! Lossy radio channel: log-distance path loss with optional gaussian
//! shadowing, plus an i.i.d. Bernoulli drop per (emission, receiver).
//!
//! Duty-cycle deafness is not modeled here — a receiver that is not
//! listening simply never gets the packet. The channel only decides RSSI
//! and random loss for receivers that are listening.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beacon::Emission;
use crate::codec::IBeaconFrame;

/// Distances below this are clamped to avoid the log singularity.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Position in the studio plane, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
}

impl Placement {
    pub fn distance(&self, other: &Placement) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt().max(MIN_DISTANCE_M)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path loss exponent, > 0 (2 free space, ~3 indoor).
    pub path_loss_exponent: f64,
    /// RSSI at the 1 m reference distance, dBm.
    pub reference_rssi_1m: f64,
    /// Shadowing standard deviation, dB. Zero disables noise.
    pub noise_sigma: f64,
    /// Independent drop probability per (emission, receiver), in [0, 1].
    pub base_loss_prob: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            path_loss_exponent: 2.0,
            reference_rssi_1m: -59.0,
            noise_sigma: 0.0,
            base_loss_prob: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.path_loss_exponent > 0.0) {
            return Err("path_loss_exponent must be > 0");
        }
        if !(0.0..=1.0).contains(&self.base_loss_prob) {
            return Err("base_loss_prob must be in [0, 1]");
        }
        if !(self.noise_sigma >= 0.0) {
            return Err("noise_sigma must be >= 0");
        }
        if !self.reference_rssi_1m.is_finite() {
            return Err("reference_rssi_1m must be finite");
        }
        Ok(())
    }
}

/// Box-Muller gaussian draw; always consumes two uniforms so the rng stream
/// stays aligned whether or not sigma is zero.
fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// RSSI seen at `rx` for a transmitter at `tx`:
/// `reference − 10·n·log10(d) + N(0, sigma)`.
pub fn compute_rssi<R: Rng>(
    tx: &Placement,
    rx: &Placement,
    params: &ChannelParams,
    rng: &mut R,
) -> f64 {
    let d = tx.distance(rx);
    params.reference_rssi_1m - 10.0 * params.path_loss_exponent * d.log10()
        + gaussian(rng, params.noise_sigma)
}

/// A listener the channel may deliver to.
#[derive(Clone, Debug)]
pub struct ReceiverSlot<I> {
    pub id: I,
    pub placement: Placement,
    pub listening: bool,
}

/// One delivered advertisement.
#[derive(Clone, Debug, PartialEq)]
pub struct Reception<I> {
    pub receiver: I,
    pub frame: IBeaconFrame,
    pub rssi: f64,
    pub t: f64,
}

/// Fan an emission out to every listening receiver, dropping each copy
/// independently with probability `base_loss_prob`. Receivers are visited
/// in slice order; draws happen only for listening receivers, so the
/// reception log is a pure function of (inputs, rng state).
pub fn deliver<I: Clone, R: Rng>(
    emission: &Emission,
    tx: &Placement,
    receivers: &[ReceiverSlot<I>],
    params: &ChannelParams,
    rng: &mut R,
) -> Vec<Reception<I>> {
    let mut out = Vec::new();
    for slot in receivers {
        if !slot.listening {
            continue;
        }
        let drop_draw: f64 = rng.random();
        if drop_draw < params.base_loss_prob {
            continue;
        }
        let rssi = compute_rssi(tx, &slot.placement, params, rng);
        out.push(Reception {
            receiver: slot.id.clone(),
            frame: emission.frame,
            rssi,
            t: emission.t,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::EquipmentUuid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless() -> ChannelParams {
        ChannelParams {
            noise_sigma: 0.0,
            base_loss_prob: 0.0,
            ..ChannelParams::default()
        }
    }

    fn emission() -> Emission {
        Emission {
            t: 1.0,
            frame: IBeaconFrame {
                uuid: EquipmentUuid([9; 16]),
                major: 0,
                minor: 3,
                measured_power: -59,
            },
            copy: 0,
        }
    }

    #[test]
    fn one_meter_is_the_reference_rssi() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rssi = compute_rssi(
            &Placement { x: 0.0, y: 0.0 },
            &Placement { x: 1.0, y: 0.0 },
            &noiseless(),
            &mut rng,
        );
        assert_eq!(rssi, -59.0);
    }

    #[test]
    fn ten_meters_exponent_two_drops_twenty_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rssi = compute_rssi(
            &Placement { x: 0.0, y: 0.0 },
            &Placement { x: 10.0, y: 0.0 },
            &noiseless(),
            &mut rng,
        );
        assert!((rssi - (-79.0)).abs() < 1e-9);
    }

    #[test]
    fn rssi_is_monotone_decreasing_in_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tx = Placement { x: 0.0, y: 0.0 };
        let params = noiseless();
        let mut prev = f64::INFINITY;
        for d in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let rssi = compute_rssi(&tx, &Placement { x: d, y: 0.0 }, &params, &mut rng);
            assert!(rssi < prev, "rssi {rssi} at {d} m not below {prev}");
            prev = rssi;
        }
    }

    #[test]
    fn distance_clamps_below_ten_centimeters() {
        let p = Placement { x: 0.0, y: 0.0 };
        assert_eq!(p.distance(&p), MIN_DISTANCE_M);
    }

    #[test]
    fn lossless_delivery_reaches_every_listener() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let receivers = vec![
            ReceiverSlot {
                id: "a",
                placement: Placement { x: 1.0, y: 0.0 },
                listening: true,
            },
            ReceiverSlot {
                id: "b",
                placement: Placement { x: 2.0, y: 0.0 },
                listening: true,
            },
        ];
        let got = deliver(
            &emission(),
            &Placement { x: 0.0, y: 0.0 },
            &receivers,
            &noiseless(),
            &mut rng,
        );
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].receiver, "a");
        assert_eq!(got[1].receiver, "b");
        assert_eq!(got[0].t, 1.0);
        assert_eq!(got[0].frame.minor, 3);
    }

    #[test]
    fn deaf_receiver_never_receives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let receivers = vec![ReceiverSlot {
            id: "a",
            placement: Placement { x: 1.0, y: 0.0 },
            listening: false,
        }];
        let got = deliver(
            &emission(),
            &Placement { x: 0.0, y: 0.0 },
            &receivers,
            &noiseless(),
            &mut rng,
        );
        assert!(got.is_empty());
    }

    #[test]
    fn total_loss_delivers_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ChannelParams {
            base_loss_prob: 1.0,
            ..noiseless()
        };
        let receivers = vec![ReceiverSlot {
            id: "a",
            placement: Placement { x: 1.0, y: 0.0 },
            listening: true,
        }];
        for _ in 0..100 {
            assert!(deliver(
                &emission(),
                &Placement { x: 0.0, y: 0.0 },
                &receivers,
                &params,
                &mut rng
            )
            .is_empty());
        }
    }

    #[test]
    fn same_seed_same_receptions() {
        let receivers: Vec<ReceiverSlot<usize>> = (0..5)
            .map(|i| ReceiverSlot {
                id: i,
                placement: Placement {
                    x: i as f64 + 1.0,
                    y: 0.5,
                },
                listening: true,
            })
            .collect();
        let params = ChannelParams {
            noise_sigma: 2.0,
            base_loss_prob: 0.3,
            ..noiseless()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut all = Vec::new();
            for _ in 0..50 {
                all.extend(deliver(
                    &emission(),
                    &Placement { x: 0.0, y: 0.0 },
                    &receivers,
                    &params,
                    &mut rng,
                ));
            }
            all
        };
        assert_eq!(run(), run());
    }
}
