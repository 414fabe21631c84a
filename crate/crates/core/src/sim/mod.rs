//! Event-driven closed-loop simulation.
//!
//! The sensor watches each coordinate of the estimation error. When
//! `|z_i| ≥ v_i(t)` and the coordinate's channel is idle it encodes the
//! trigger time, the packet is delivered after a bounded delay, and the
//! controller applies the jump `x̂_i ← x̂_i + z̄_i`. The sensor's replica of
//! `x̂` is the controller's own estimate: both see the same receptions.

mod engine;
pub mod invariants;
pub mod rates;
pub mod sweep;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundInputs, BoundsError};
use crate::channel::{ChannelError, DelaySpec};
use crate::codec::CodecError;
use crate::model::{Integrator, JordanPlant, ModelError, ScalarPlant, SimState, TriggerConfig};

pub use engine::DIVERGENCE_THRESHOLD;
pub use invariants::{check_trace, InvariantCheck, InvariantReport};
pub use rates::{measure_rates, RateReport};
pub use sweep::{phase_curves, sweep_gamma, SweepRow};
pub use trace::{Event, EventKind, RunParams, Sample, SimTrace};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("state diverged at t = {t}")]
    Divergence { t: f64, trace: Box<SimTrace> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// How trigger instants are located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detection {
    /// First grid point with `|z| ≥ v` and an idle channel.
    #[default]
    Grid,
    /// Exact crossing time, bisected inside the step.
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub step: f64,
    pub integrator: Integrator,
    pub detection: Detection,
    /// Fixed packet size for every coordinate instead of the sufficient rule.
    pub packet_bits: Option<u32>,
    /// Coordinates whose sensor never transmits.
    pub muted: Vec<usize>,
    /// Precision parameter used for the analytic bounds in rate reports.
    pub nu: f64,
    /// Record one sample every this many grid steps.
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            horizon: 7.0,
            step: 0.0002,
            integrator: Integrator::Exact,
            detection: Detection::Grid,
            packet_bits: None,
            muted: Vec::new(),
            nu: 2.0,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarScenario {
    pub plant: ScalarPlant,
    pub trigger: TriggerConfig,
    pub delay: DelaySpec,
    pub x0: f64,
    pub xhat0: f64,
    pub options: SimOptions,
}

impl ScalarScenario {
    pub fn bound_inputs(&self) -> Result<BoundInputs, BoundsError> {
        BoundInputs::new(
            self.plant.a,
            self.trigger.sigma,
            self.trigger.rho0,
            self.trigger.gamma,
            self.trigger.b,
            self.options.nu,
        )
    }

    /// Same scenario with a different delay bound.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.trigger.gamma = gamma;
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorScenario {
    pub plant: JordanPlant,
    pub trigger: TriggerConfig,
    /// One delay spec per coordinate.
    pub delays: Vec<DelaySpec>,
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub options: SimOptions,
}

/// Runs the scalar loop. Requires `|z(0)| < v0`.
pub fn run_scalar(s: &ScalarScenario) -> Result<SimTrace, SimError> {
    s.plant.validate()?;
    if s.trigger.dim() != 1 || s.trigger.ladder != [s.trigger.rho0] {
        return Err(SimError::Config(
            "a scalar run needs exactly one v0 and the ladder [rho0]".into(),
        ));
    }
    let z0 = s.x0 - s.xhat0;
    if !(z0.abs() < s.trigger.v0[0]) {
        return Err(SimError::Precondition(format!(
            "initial estimation error |z(0)| = {} must be below v0 = {}",
            z0.abs(),
            s.trigger.v0[0]
        )));
    }
    let inputs = s.bound_inputs()?;
    let (channel, warning) = s.delay.resolve(&inputs)?;
    let plant = JordanPlant::from(s.plant);
    let init = SimState::scalar(0.0, s.x0, s.xhat0);
    engine::run(
        &plant,
        &s.trigger,
        vec![channel],
        init,
        &s.options,
        warning.into_iter().collect(),
    )
}

/// Runs the Jordan-form loop. Requires `|z_i(0)| ≤ v0_i` and trigger levels
/// that respect the cascade limit inside every block.
pub fn run_vector(s: &VectorScenario) -> Result<SimTrace, SimError> {
    s.plant.validate()?;
    s.trigger.validate_for(&s.plant)?;
    let n = s.plant.dim();
    if s.x0.len() != n || s.xhat0.len() != n || s.delays.len() != n {
        return Err(SimError::Config(format!(
            "x0, xhat0 and delays need {n} entries, got {}, {} and {}",
            s.x0.len(),
            s.xhat0.len(),
            s.delays.len()
        )));
    }
    for i in 0..n {
        let z = (s.x0[i] - s.xhat0[i]).abs();
        if !(z <= s.trigger.v0[i]) {
            return Err(SimError::Precondition(format!(
                "coordinate {i}: |z(0)| = {z} exceeds v0 = {}",
                s.trigger.v0[i]
            )));
        }
    }
    let cfg = &s.trigger;
    let mut offset = 0;
    for (j, block) in s.plant.blocks.iter().enumerate() {
        let range = offset..offset + block.order;
        let rungs = bounds::v0_cascade_bound(
            block.eigenvalue,
            cfg.sigma,
            cfg.rho0,
            cfg.gamma,
            &cfg.ladder[range.clone()],
            &cfg.v0[range.clone()],
        )?;
        for rung in rungs.iter().skip(1) {
            let v0 = cfg.v0[offset + rung.index];
            if v0 > rung.max_v0 * (1.0 + 1e-12) {
                return Err(SimError::Config(format!(
                    "block {j}, coordinate {}: v0 = {v0} exceeds the cascade limit {}",
                    rung.index, rung.max_v0
                )));
            }
        }
        offset += block.order;
    }

    let mut channels = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for (coord, spec) in s.plant.coordinates().iter().zip(&s.delays) {
        let inputs = BoundInputs::new(
            coord.eigenvalue,
            cfg.sigma,
            cfg.rho0,
            cfg.gamma,
            cfg.b,
            s.options.nu,
        )?;
        let (channel, warning) = spec.resolve(&inputs)?;
        channels.push(channel);
        warnings.extend(warning);
    }
    let init = SimState::new(
        0.0,
        nalgebra::DVector::from_column_slice(&s.x0),
        nalgebra::DVector::from_column_slice(&s.xhat0),
    )?;
    engine::run(&s.plant, cfg, channels, init, &s.options, warnings)
}

/// Packet size per coordinate: the override if given, otherwise the
/// sufficient rule with the coordinate's own `ρ_i`.
pub fn packet_sizes(plant: &JordanPlant, cfg: &TriggerConfig, fixed: Option<u32>) -> Vec<u32> {
    plant
        .coordinates()
        .iter()
        .zip(&cfg.ladder)
        .map(|(c, rho_i)| {
            fixed.unwrap_or_else(|| {
                bounds::packet_size_for(c.eigenvalue, cfg.sigma, *rho_i, cfg.gamma, cfg.b)
            })
        })
        .collect()
}
