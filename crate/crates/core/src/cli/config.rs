//! TOML run configuration.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::bounds::{self, BoundInputs, VectorBoundInputs};
use crate::channel::DelaySpec;
use crate::model::{
    default_ladder, Integrator, JordanBlock, JordanPlant, ScalarPlant, TriggerConfig,
};
use crate::sim::{Detection, ScalarScenario, SimOptions, VectorScenario};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<T>, String> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(format!("{what}: expected 1 or {n} values, got {}", v.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Step { start: f64, step: f64, count: usize },
    Span { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Step { start, step, count } => {
                (0..*count).map(|k| start + step * k as f64).collect()
            }
            Grid::Span { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_b() -> f64 {
    1.0001
}
fn default_nu() -> f64 {
    2.0
}
fn default_horizon() -> f64 {
    7.0
}
fn default_step() -> f64 {
    0.0002
}
fn default_record_every() -> usize {
    1
}
fn default_delay() -> OneOrMany<String> {
    OneOrMany::One("uniform".into())
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default = "one")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct JordanSection {
    pub blocks: Vec<JordanBlock>,
    /// Input map, one row per state coordinate. Identity if omitted.
    pub b: Option<Vec<Vec<f64>>>,
    /// Feedback gain, one row per input. Zero if omitted.
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSection {
    pub v0: Option<OneOrMany<f64>>,
    pub sigma: Option<f64>,
    pub rho0: Option<f64>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub ladder: Option<Vec<f64>>,
}

impl Default for TriggerSection {
    fn default() -> Self {
        Self {
            v0: None,
            sigma: None,
            rho0: None,
            gamma: 0.0,
            b: default_b(),
            nu: default_nu(),
            ladder: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    #[serde(default = "default_delay")]
    pub delay: OneOrMany<String>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            delay: default_delay(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub x0: Option<OneOrMany<f64>>,
    pub xhat0: Option<OneOrMany<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub detection: Detection,
    pub packet_bits: Option<u32>,
    #[serde(default)]
    pub muted: Vec<usize>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            x0: None,
            xhat0: None,
            horizon: default_horizon(),
            step: default_step(),
            integrator: Integrator::Exact,
            detection: Detection::Grid,
            packet_bits: None,
            muted: Vec::new(),
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub gamma: Grid,
    /// Family of ρ0 values for analytic sweeps; defaults to the trigger's ρ0.
    pub rho0: Option<Vec<f64>>,
    /// σ grid for the supremum of the necessary rate.
    pub sigma_sup: Option<Grid>,
    /// Run the closed loop at every grid point instead of bounds only.
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: Option<PlantSection>,
    pub jordan: Option<JordanSection>,
    #[serde(default)]
    pub trigger: TriggerSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub sim: SimSection,
    pub sweep: Option<SweepSection>,
}

pub enum Scenario {
    Scalar(ScalarScenario),
    Vector(VectorScenario),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if cfg.plant.is_some() && cfg.jordan.is_some() {
            return Err("give either [plant] or [jordan], not both".into());
        }
        Ok(cfg)
    }

    fn sigma(&self) -> Result<f64, String> {
        self.trigger
            .sigma
            .ok_or_else(|| "trigger.sigma is required".into())
    }

    fn rho0(&self) -> Result<f64, String> {
        self.trigger
            .rho0
            .ok_or_else(|| "trigger.rho0 is required".into())
    }

    pub fn is_vector(&self) -> bool {
        self.jordan.is_some()
    }

    /// Scalar bound inputs; a Jordan plant is rejected.
    pub fn bound_inputs(&self) -> Result<BoundInputs, String> {
        let plant = self
            .plant
            .as_ref()
            .ok_or("scalar bounds need a [plant] section or --a")?;
        BoundInputs::new(
            plant.a,
            self.sigma()?,
            self.rho0()?,
            self.trigger.gamma,
            self.trigger.b,
            self.trigger.nu,
        )
        .map_err(|e| e.to_string())
    }

    pub fn jordan_plant(&self) -> Result<JordanPlant, String> {
        let j = self.jordan.as_ref().ok_or("missing [jordan] section")?;
        let n: usize = j.blocks.iter().map(|b| b.order).sum();
        let b = match &j.b {
            Some(rows) => matrix(rows, "jordan.b")?,
            None => DMatrix::identity(n, n),
        };
        let k = match &j.k {
            Some(rows) => matrix(rows, "jordan.k")?,
            None => DMatrix::zeros(b.ncols(), n),
        };
        JordanPlant::new(j.blocks.clone(), b, k, j.l).map_err(|e| e.to_string())
    }

    fn ladder(&self, plant: &JordanPlant) -> Result<Vec<f64>, String> {
        let rho0 = self.rho0()?;
        Ok(match &self.trigger.ladder {
            Some(l) => l.clone(),
            None => plant
                .blocks
                .iter()
                .flat_map(|b| default_ladder(rho0, b.order))
                .collect(),
        })
    }

    pub fn vector_bound_inputs(&self) -> Result<VectorBoundInputs, String> {
        let plant = self.jordan_plant()?;
        let p = VectorBoundInputs {
            blocks: plant.blocks.clone(),
            sigma: self.sigma()?,
            rho0: self.rho0()?,
            gamma: self.trigger.gamma,
            b: self.trigger.b,
            nu: self.trigger.nu,
            ladder: self.ladder(&plant)?,
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    fn options(&self) -> SimOptions {
        SimOptions {
            horizon: self.sim.horizon,
            step: self.sim.step,
            integrator: self.sim.integrator,
            detection: self.sim.detection,
            packet_bits: self.sim.packet_bits,
            muted: self.sim.muted.clone(),
            nu: self.trigger.nu,
            record_every: self.sim.record_every,
        }
    }

    fn delays(&self, n: usize) -> Result<Vec<DelaySpec>, String> {
        let seed = self.channel.seed;
        match &self.channel.delay {
            OneOrMany::One(text) => {
                let spec = DelaySpec::parse(text, seed).map_err(|e| e.to_string())?;
                Ok((0..n).map(|i| spec.offset_seed(i as u64)).collect())
            }
            OneOrMany::Many(list) if list.len() == n => list
                .iter()
                .map(|t| DelaySpec::parse(t, seed).map_err(|e| e.to_string()))
                .collect(),
            OneOrMany::Many(list) => Err(format!(
                "channel.delay: expected 1 or {n} entries, got {}",
                list.len()
            )),
        }
    }

    pub fn scenario(&self) -> Result<Scenario, String> {
        let x0 = self.sim.x0.as_ref().ok_or("sim.x0 is required")?;
        let xhat0 = self.sim.xhat0.as_ref().ok_or("sim.xhat0 is required")?;
        let v0 = self.trigger.v0.as_ref().ok_or("trigger.v0 is required")?;
        let (sigma, rho0, gamma, b) = (
            self.sigma()?,
            self.rho0()?,
            self.trigger.gamma,
            self.trigger.b,
        );
        if let Some(p) = &self.plant {
            let plant = ScalarPlant::new(p.a, p.b, p.k, p.l).map_err(|e| e.to_string())?;
            let v0 = v0.expand(1, "trigger.v0")?[0];
            let trigger =
                TriggerConfig::scalar(v0, sigma, rho0, gamma, b).map_err(|e| e.to_string())?;
            return Ok(Scenario::Scalar(ScalarScenario {
                plant,
                trigger,
                delay: self.delays(1)?.remove(0),
                x0: x0.expand(1, "sim.x0")?[0],
                xhat0: xhat0.expand(1, "sim.xhat0")?[0],
                options: self.options(),
            }));
        }
        let plant = self.jordan_plant()?;
        let n = plant.dim();
        let ladder = self.ladder(&plant)?;
        let v0 = match v0 {
            OneOrMany::One(first) => {
                // A single level seeds the largest admissible cascade per block.
                let mut out = Vec::with_capacity(n);
                let mut offset = 0;
                for blk in &plant.blocks {
                    let rungs = &ladder[offset..offset + blk.order];
                    out.extend(
                        bounds::max_v0_cascade(blk.eigenvalue, sigma, rho0, gamma, rungs, *first)
                            .map_err(|e| e.to_string())?,
                    );
                    offset += blk.order;
                }
                out
            }
            many => many.expand(n, "trigger.v0")?,
        };
        let trigger = TriggerConfig {
            v0,
            sigma,
            rho0,
            gamma,
            b,
            ladder,
        };
        trigger.validate_for(&plant).map_err(|e| e.to_string())?;
        Ok(Scenario::Vector(VectorScenario {
            plant,
            trigger,
            delays: self.delays(n)?,
            x0: x0.expand(n, "sim.x0")?,
            xhat0: xhat0.expand(n, "sim.xhat0")?,
            options: self.options(),
        }))
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(format!(
            "{what}: rows must be non-empty and of equal length"
        ));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
