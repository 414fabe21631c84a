//! Bounded-delay channel models and single-in-flight delivery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundInputs};
use crate::codec::Packet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid delay model: {0}")]
    Config(String),
    #[error("replay sequence exhausted at packet {k} (length {len})")]
    ReplayExhausted { k: u64, len: usize },
    #[error("coordinate {0} already has a packet in flight")]
    Busy(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelayModel {
    Constant {
        delay: f64,
    },
    Uniform {
        seed: u64,
    },
    /// Fixed delay `β` chosen so the error sweeps a full quantization cell.
    Adversarial {
        beta: f64,
    },
    Replay {
        delays: Vec<f64>,
    },
}

/// A delay model bound to its delay bound `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayChannel {
    pub model: DelayModel,
    pub gamma: f64,
}

impl DelayChannel {
    pub fn new(model: DelayModel, gamma: f64) -> Result<Self, ChannelError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(ChannelError::Config(format!(
                "gamma must be non-negative, got {gamma}"
            )));
        }
        let in_range = |d: f64| d.is_finite() && (0.0..=gamma).contains(&d);
        match &model {
            DelayModel::Constant { delay } if !in_range(*delay) => {
                return Err(ChannelError::Config(format!(
                    "constant delay {delay} outside [0, {gamma}]"
                )))
            }
            DelayModel::Adversarial { beta } if !in_range(*beta) => {
                return Err(ChannelError::Config(format!(
                    "adversarial delay {beta} outside [0, {gamma}]"
                )))
            }
            DelayModel::Replay { delays } => {
                if let Some(d) = delays.iter().find(|d| !in_range(**d)) {
                    return Err(ChannelError::Config(format!(
                        "replayed delay {d} outside [0, {gamma}]"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { model, gamma })
    }

    /// Adversarial channel for growth rate `a`. Returns a warning when `β`
    /// exceeds `γ` and had to be clamped.
    pub fn adversarial(p: &BoundInputs) -> (Self, Option<String>) {
        let beta = bounds::beta(p);
        let (delay, warning) = if beta > p.gamma {
            (
                p.gamma,
                Some(format!(
                    "adversarial delay beta = {beta} exceeds gamma = {}; clamped to gamma",
                    p.gamma
                )),
            )
        } else {
            (beta, None)
        };
        (
            Self {
                model: DelayModel::Adversarial { beta: delay },
                gamma: p.gamma,
            },
            warning,
        )
    }

    /// Delay of the `k`-th packet. Depends only on the model and `k`.
    pub fn sample_delay(&self, k: u64) -> Result<f64, ChannelError> {
        match &self.model {
            DelayModel::Constant { delay } => Ok(*delay),
            DelayModel::Adversarial { beta } => Ok(*beta),
            DelayModel::Uniform { seed } => {
                if self.gamma == 0.0 {
                    return Ok(0.0);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k);
                Ok(rng.random_range(0.0..=self.gamma))
            }
            DelayModel::Replay { delays } => {
                delays
                    .get(k as usize)
                    .copied()
                    .ok_or(ChannelError::ReplayExhausted {
                        k,
                        len: delays.len(),
                    })
            }
        }
    }
}

/// Delay model as written in a run configuration. Unlike [`DelayModel`] it
/// is independent of `γ`, so one spec serves a whole sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DelaySpec {
    Constant { delay: f64 },
    Uniform { seed: u64 },
    Adversarial,
    Replay { delays: Vec<f64> },
}

impl DelaySpec {
    /// Binds the spec to the parameters of one run. `p.a` is the growth rate
    /// the adversarial delay is computed for.
    pub fn resolve(&self, p: &BoundInputs) -> Result<(DelayChannel, Option<String>), ChannelError> {
        let model = match self {
            DelaySpec::Constant { delay } => DelayModel::Constant { delay: *delay },
            DelaySpec::Uniform { seed } => DelayModel::Uniform { seed: *seed },
            DelaySpec::Replay { delays } => DelayModel::Replay {
                delays: delays.clone(),
            },
            DelaySpec::Adversarial => return Ok(DelayChannel::adversarial(p)),
        };
        Ok((DelayChannel::new(model, p.gamma)?, None))
    }

    /// Same spec with its seed offset, used to give each coordinate of a
    /// vector plant its own random stream.
    pub fn offset_seed(&self, offset: u64) -> DelaySpec {
        match self {
            DelaySpec::Uniform { seed } => DelaySpec::Uniform {
                seed: seed.wrapping_add(offset),
            },
            other => other.clone(),
        }
    }

    /// Parses `constant:<d>`, `uniform[:<seed>]`, `adversarial` or
    /// `replay:<d1>,<d2>,...`. A bare `uniform` takes `default_seed`.
    pub fn parse(text: &str, default_seed: u64) -> Result<DelaySpec, ChannelError> {
        let (head, tail) = match text.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (text.trim(), None),
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| ChannelError::Config(format!("not a number: {s:?}")))
        };
        match (head, tail) {
            ("constant", Some(d)) => Ok(DelaySpec::Constant { delay: num(d)? }),
            ("uniform", None) => Ok(DelaySpec::Uniform { seed: default_seed }),
            ("uniform", Some(s)) => s
                .parse::<u64>()
                .map(|seed| DelaySpec::Uniform { seed })
                .map_err(|_| ChannelError::Config(format!("not a seed: {s:?}"))),
            ("adversarial", None) => Ok(DelaySpec::Adversarial),
            ("replay", Some(list)) => Ok(DelaySpec::Replay {
                delays: list.split(',').map(|s| num(s.trim())).collect::<Result<_, _>>()?,
            }),
            _ => Err(ChannelError::Config(format!(
                "unknown delay model {text:?}; expected constant:<d>, uniform[:<seed>], adversarial or replay:<list>"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlightPacket {
    pub packet: Packet,
    pub t_c: f64,
    /// Per-coordinate sequence number of the packet.
    pub k: u64,
}

/// One independent channel per coordinate, each carrying at most one packet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InFlight {
    slots: Vec<Option<InFlightPacket>>,
}

impl InFlight {
    pub fn new(n: usize) -> Self {
        Self {
            slots: vec![None; n],
        }
    }

    /// True iff the coordinate's channel is idle.
    pub fn admit(&self, coord: usize) -> bool {
        self.slots[coord].is_none()
    }

    pub fn send(
        &mut self,
        coord: usize,
        packet: Packet,
        t_c: f64,
        k: u64,
    ) -> Result<(), ChannelError> {
        if !self.admit(coord) {
            return Err(ChannelError::Busy(coord));
        }
        self.slots[coord] = Some(InFlightPacket { packet, t_c, k });
        Ok(())
    }

    pub fn next_delivery(&self) -> Option<f64> {
        self.slots
            .iter()
            .flatten()
            .map(|p| p.t_c)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Removes and returns every packet due at or before `t`, in coordinate
    /// order.
    pub fn take_due(&mut self, t: f64) -> Vec<InFlightPacket> {
        self.slots
            .iter_mut()
            .filter(|slot| slot.as_ref().is_some_and(|p| p.t_c <= t))
            .filter_map(Option::take)
            .collect()
    }
}
