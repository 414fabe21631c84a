//! Plant and trigger types, and exact propagation of the closed loop between
//! communication events.
//!
//! The loop is simulated on the augmented state `[x; x̂]`. With the linear law
//! `u = -K x̂` held continuously, both the plant and the controller-side
//! estimator are linear, so
//!
//! ```text
//! d/dt [x ]   [A  -BK  ] [x ]
//!      [x̂] = [0  A - BK] [x̂]
//! ```
//!
//! and the estimation error `z = x - x̂` obeys `ż = A z` regardless of the
//! control input. `A` is always in real Jordan form here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("invalid trigger configuration: {0}")]
    InvalidTrigger(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("numerical overflow at t = {t}: state is no longer finite")]
    Overflow { t: f64 },
}

/// Scalar unstable plant `ẋ = A x + B u` with `|x(0)| ≤ L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPlant {
    pub a: f64,
    pub b: f64,
    pub k: f64,
    pub l: f64,
}

impl ScalarPlant {
    pub fn new(a: f64, b: f64, k: f64, l: f64) -> Result<Self, ModelError> {
        let plant = Self { a, b, k, l };
        plant.validate()?;
        Ok(plant)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(ModelError::InvalidPlant(format!(
                "growth rate A must be positive, got {}",
                self.a
            )));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(ModelError::InvalidPlant(format!(
                "initial-condition bound L must be positive, got {}",
                self.l
            )));
        }
        if !self.b.is_finite() || !self.k.is_finite() {
            return Err(ModelError::InvalidPlant("B and K must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub eigenvalue: f64,
    pub order: usize,
}

/// Vector plant whose state matrix is `diag(J_1, …, J_q)`, each `J_j` an
/// upper Jordan block (ones on the superdiagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct JordanPlant {
    pub blocks: Vec<JordanBlock>,
    /// n × m input map.
    pub b: DMatrix<f64>,
    /// m × n feedback gain, `u = -K x̂`.
    pub k: DMatrix<f64>,
    pub l: f64,
}

impl JordanPlant {
    pub fn new(
        blocks: Vec<JordanBlock>,
        b: DMatrix<f64>,
        k: DMatrix<f64>,
        l: f64,
    ) -> Result<Self, ModelError> {
        let plant = Self { blocks, b, k, l };
        plant.validate()?;
        Ok(plant)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.blocks.is_empty() {
            return Err(ModelError::InvalidPlant(
                "at least one Jordan block is required".into(),
            ));
        }
        for (j, block) in self.blocks.iter().enumerate() {
            if !(block.eigenvalue.is_finite() && block.eigenvalue > 0.0) {
                return Err(ModelError::InvalidPlant(format!(
                    "block {j}: eigenvalue must be positive, got {}",
                    block.eigenvalue
                )));
            }
            if block.order == 0 {
                return Err(ModelError::InvalidPlant(format!(
                    "block {j}: order must be >= 1"
                )));
            }
        }
        let n = self.dim();
        if self.b.nrows() != n {
            return Err(ModelError::InvalidPlant(format!(
                "B has {} rows, expected {n}",
                self.b.nrows()
            )));
        }
        if self.k.ncols() != n || self.k.nrows() != self.b.ncols() {
            return Err(ModelError::InvalidPlant(format!(
                "K is {}x{}, expected {}x{n}",
                self.k.nrows(),
                self.k.ncols(),
                self.b.ncols()
            )));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(ModelError::InvalidPlant(format!(
                "initial-condition bound L must be positive, got {}",
                self.l
            )));
        }
        if self.b.iter().chain(self.k.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidPlant("B and K must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.order).sum()
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.order as f64 * b.eigenvalue)
            .sum()
    }

    pub fn state_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        let mut offset = 0;
        for block in &self.blocks {
            for i in 0..block.order {
                a[(offset + i, offset + i)] = block.eigenvalue;
                if i + 1 < block.order {
                    a[(offset + i, offset + i + 1)] = 1.0;
                }
            }
            offset += block.order;
        }
        a
    }

    /// Coordinates in state order, each tagged with its block.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        let mut out = Vec::with_capacity(self.dim());
        for (j, block) in self.blocks.iter().enumerate() {
            for i in 0..block.order {
                out.push(Coordinate {
                    block: j,
                    index: i,
                    eigenvalue: block.eigenvalue,
                    order: block.order,
                });
            }
        }
        out
    }
}

impl From<ScalarPlant> for JordanPlant {
    fn from(p: ScalarPlant) -> Self {
        JordanPlant {
            blocks: vec![JordanBlock {
                eigenvalue: p.a,
                order: 1,
            }],
            b: DMatrix::from_element(1, 1, p.b),
            k: DMatrix::from_element(1, 1, p.k),
            l: p.l,
        }
    }
}

/// Position of a state coordinate inside the Jordan structure. `index` is
/// zero-based; the last coordinate of a block (`index == order - 1`) is the
/// one that evolves without coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub block: usize,
    pub index: usize,
    pub eigenvalue: f64,
    pub order: usize,
}

impl Coordinate {
    pub fn is_uncoupled(&self) -> bool {
        self.index + 1 == self.order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSpec {
    Scalar(ScalarPlant),
    Jordan(JordanPlant),
}

impl PlantSpec {
    pub fn to_jordan(&self) -> JordanPlant {
        match self {
            PlantSpec::Scalar(p) => JordanPlant::from(*p),
            PlantSpec::Jordan(p) => p.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PlantSpec::Scalar(_) => 1,
            PlantSpec::Jordan(p) => p.dim(),
        }
    }
}

/// Event-triggering design parameters.
///
/// `v0` and `ladder` hold one entry per state coordinate, in state order. For
/// a scalar plant both have length one and `ladder == [rho0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    pub v0: Vec<f64>,
    pub sigma: f64,
    pub rho0: f64,
    pub gamma: f64,
    pub b: f64,
    pub ladder: Vec<f64>,
}

impl TriggerConfig {
    pub fn scalar(v0: f64, sigma: f64, rho0: f64, gamma: f64, b: f64) -> Result<Self, ModelError> {
        let cfg = Self {
            v0: vec![v0],
            sigma,
            rho0,
            gamma,
            b,
            ladder: vec![rho0],
        };
        cfg.validate_scalars()?;
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(ModelError::InvalidTrigger(format!(
                "v0 must be positive, got {v0}"
            )));
        }
        Ok(cfg)
    }

    /// Builds a vector configuration with the default ladder `ρ_i = ρ0·i/p`
    /// inside every block.
    pub fn with_default_ladder(
        plant: &JordanPlant,
        v0: Vec<f64>,
        sigma: f64,
        rho0: f64,
        gamma: f64,
        b: f64,
    ) -> Result<Self, ModelError> {
        let ladder = plant
            .blocks
            .iter()
            .flat_map(|blk| default_ladder(rho0, blk.order))
            .collect();
        let cfg = Self {
            v0,
            sigma,
            rho0,
            gamma,
            b,
            ladder,
        };
        cfg.validate_for(plant)?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.v0.len()
    }

    fn validate_scalars(&self) -> Result<(), ModelError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ModelError::InvalidTrigger(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return Err(ModelError::InvalidTrigger(format!(
                "rho0 must lie in (0, 1), got {}",
                self.rho0
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ModelError::InvalidTrigger(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.b.is_finite() && self.b > 1.0) {
            return Err(ModelError::InvalidTrigger(format!(
                "b must exceed 1, got {}",
                self.b
            )));
        }
        Ok(())
    }

    /// Checks shape and ladder structure against a plant. The v0 cascade is
    /// checked separately by the simulator since it depends on the bounds.
    pub fn validate_for(&self, plant: &JordanPlant) -> Result<(), ModelError> {
        self.validate_scalars()?;
        let n = plant.dim();
        if self.v0.len() != n || self.ladder.len() != n {
            return Err(ModelError::InvalidTrigger(format!(
                "v0 and ladder need {n} entries, got {} and {}",
                self.v0.len(),
                self.ladder.len()
            )));
        }
        if let Some(bad) = self.v0.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(ModelError::InvalidTrigger(format!(
                "v0 entries must be positive, got {bad}"
            )));
        }
        let mut offset = 0;
        for (j, block) in plant.blocks.iter().enumerate() {
            let rungs = &self.ladder[offset..offset + block.order];
            if rungs[0] <= 0.0 {
                return Err(ModelError::InvalidTrigger(format!(
                    "block {j}: ladder must start above 0"
                )));
            }
            if rungs.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(ModelError::InvalidTrigger(format!(
                    "block {j}: ladder must be strictly increasing"
                )));
            }
            if rungs[block.order - 1] != self.rho0 {
                return Err(ModelError::InvalidTrigger(format!(
                    "block {j}: ladder must end at rho0 = {}",
                    self.rho0
                )));
            }
            offset += block.order;
        }
        Ok(())
    }
}

pub fn default_ladder(rho0: f64, order: usize) -> Vec<f64> {
    (1..=order)
        .map(|i| {
            if i == order {
                rho0
            } else {
                rho0 * i as f64 / order as f64
            }
        })
        .collect()
}

/// `v(t) = v0 e^{-σ t}` for the given coordinate.
pub fn trigger_value(cfg: &TriggerConfig, coord: usize, t: f64) -> f64 {
    cfg.v0[coord] * (-cfg.sigma * t).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: DVector<f64>,
    pub xhat: DVector<f64>,
}

impl SimState {
    pub fn new(t: f64, x: DVector<f64>, xhat: DVector<f64>) -> Result<Self, ModelError> {
        if x.len() != xhat.len() {
            return Err(ModelError::InvalidState(format!(
                "x has {} entries but x̂ has {}",
                x.len(),
                xhat.len()
            )));
        }
        Ok(Self { t, x, xhat })
    }

    pub fn scalar(t: f64, x: f64, xhat: f64) -> Self {
        Self {
            t,
            x: DVector::from_element(1, x),
            xhat: DVector::from_element(1, xhat),
        }
    }

    pub fn error(&self) -> DVector<f64> {
        &self.x - &self.xhat
    }

    /// Control input `u = -K x̂`.
    pub fn input(&self, plant: &JordanPlant) -> DVector<f64> {
        -(&plant.k * &self.xhat)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.xhat.iter()).all(|v| v.is_finite())
    }
}

/// Jump strategy: on delivery the estimate of `coord` moves by `zbar`. The
/// plant state is untouched.
pub fn apply_jump(state: &SimState, coord: usize, zbar: f64) -> SimState {
    let mut next = state.clone();
    next.xhat[coord] += zbar;
    next
}

/// `exp(J h)` for a single `order × order` upper Jordan block: `e^{λh}` times
/// the upper-triangular Toeplitz matrix with `h^k / k!` on the k-th
/// superdiagonal.
pub fn jordan_block_exp(eigenvalue: f64, order: usize, h: f64) -> DMatrix<f64> {
    let scale = (eigenvalue * h).exp();
    let mut coeff = Vec::with_capacity(order);
    let mut term = 1.0;
    for k in 0..order {
        if k > 0 {
            term *= h / k as f64;
        }
        coeff.push(term * scale);
    }
    DMatrix::from_fn(order, order, |r, c| if c >= r { coeff[c - r] } else { 0.0 })
}

/// Block-diagonal `exp(A h)`, the exact transition of the estimation error.
pub fn error_transition(plant: &JordanPlant, h: f64) -> DMatrix<f64> {
    let n = plant.dim();
    let mut phi = DMatrix::zeros(n, n);
    let mut offset = 0;
    for block in &plant.blocks {
        let e = jordan_block_exp(block.eigenvalue, block.order, h);
        phi.view_mut((offset, offset), (block.order, block.order))
            .copy_from(&e);
        offset += block.order;
    }
    phi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Matrix exponential of the augmented closed loop.
    #[default]
    Exact,
    /// Forward Euler on the augmented closed loop.
    Euler,
}

/// Closed-loop propagator with a cached transition for the nominal step.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    closed_loop: DMatrix<f64>,
    integrator: Integrator,
    cached: Option<(f64, DMatrix<f64>)>,
}

impl Propagator {
    pub fn new(plant: &JordanPlant, integrator: Integrator) -> Self {
        let n = plant.dim();
        let a = plant.state_matrix();
        let bk = &plant.b * &plant.k;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&a);
        m.view_mut((0, n), (n, n)).copy_from(&(-&bk));
        m.view_mut((n, n), (n, n)).copy_from(&(&a - &bk));
        Self {
            n,
            closed_loop: m,
            integrator,
            cached: None,
        }
    }

    pub fn closed_loop_matrix(&self) -> &DMatrix<f64> {
        &self.closed_loop
    }

    fn transition(&self, h: f64) -> DMatrix<f64> {
        match self.integrator {
            Integrator::Exact => (&self.closed_loop * h).exp(),
            Integrator::Euler => DMatrix::identity(2 * self.n, 2 * self.n) + &self.closed_loop * h,
        }
    }

    /// Precomputes and caches the transition for step `h`.
    pub fn cache_step(&mut self, h: f64) {
        let phi = self.transition(h);
        self.cached = Some((h, phi));
    }

    pub fn advance(&self, state: &SimState, h: f64) -> Result<SimState, ModelError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(ModelError::InvalidStep(h));
        }
        let mut aug = DVector::zeros(2 * self.n);
        aug.rows_mut(0, self.n).copy_from(&state.x);
        aug.rows_mut(self.n, self.n).copy_from(&state.xhat);
        let next = match &self.cached {
            Some((step, phi)) if *step == h => phi * aug,
            _ => self.transition(h) * aug,
        };
        let out = SimState {
            t: state.t + h,
            x: next.rows(0, self.n).into_owned(),
            xhat: next.rows(self.n, self.n).into_owned(),
        };
        if !out.is_finite() {
            return Err(ModelError::Overflow { t: out.t });
        }
        Ok(out)
    }
}

/// Advances `state` by `h` along the exact closed-loop flow.
pub fn propagate(state: &SimState, plant: &PlantSpec, h: f64) -> Result<SimState, ModelError> {
    let jordan = plant.to_jordan();
    if state.x.len() != jordan.dim() {
        return Err(ModelError::InvalidState(format!(
            "state has dimension {}, plant has {}",
            state.x.len(),
            jordan.dim()
        )));
    }
    Propagator::new(&jordan, Integrator::Exact).advance(state, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn jordan2(lambda: f64) -> JordanPlant {
        JordanPlant::new(
            vec![JordanBlock {
                eigenvalue: lambda,
                order: 2,
            }],
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[3.0, 4.0]),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn open_loop_doubles_after_ln2() {
        let plant = PlantSpec::Scalar(ScalarPlant::new(1.0, 0.0, 0.0, 1.0).unwrap());
        let s = propagate(&SimState::scalar(0.0, 1.0, 0.0), &plant, LN_2).unwrap();
        assert_relative_eq!(s.x[0], 2.0, max_relative = 1e-14);
        assert_eq!(s.xhat[0], 0.0);
        assert_relative_eq!(s.error()[0], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_error_stays_zero() {
        let plant = PlantSpec::Scalar(ScalarPlant::new(1.0, 0.2, 8.0, 1.0).unwrap());
        let s = propagate(&SimState::scalar(0.0, 0.3, 0.3), &plant, 2.5).unwrap();
        assert!(s.error()[0].abs() < 1e-15);
    }

    #[test]
    fn jordan_pair_matches_closed_form() {
        let e = jordan_block_exp(1.0, 2, 1.0);
        let z = &e * DVector::from_row_slice(&[0.0, 1.0]);
        assert_relative_eq!(z[0], std::f64::consts::E, max_relative = 1e-15);
        assert_relative_eq!(z[1], std::f64::consts::E, max_relative = 1e-15);
    }

    // RK4 with a tiny step as an independent reference for ż = J z.
    fn rk4_error(lambda: f64, z0: [f64; 3], h: f64, steps: usize) -> [f64; 3] {
        let f = |z: [f64; 3]| [lambda * z[0] + z[1], lambda * z[1] + z[2], lambda * z[2]];
        let mut z = z0;
        let dt = h / steps as f64;
        for _ in 0..steps {
            let k1 = f(z);
            let k2 = f(std::array::from_fn(|i| z[i] + 0.5 * dt * k1[i]));
            let k3 = f(std::array::from_fn(|i| z[i] + 0.5 * dt * k2[i]));
            let k4 = f(std::array::from_fn(|i| z[i] + dt * k3[i]));
            z = std::array::from_fn(|i| {
                z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
        }
        z
    }

    #[test]
    fn error_transition_matches_fine_integration() {
        let lambda = 0.7;
        let h = 1.3;
        let z0 = [0.2, -0.5, 1.1];
        let reference = rk4_error(lambda, z0, h, 20_000);
        let exact = jordan_block_exp(lambda, 3, h) * DVector::from_row_slice(&z0);
        for i in 0..3 {
            assert_relative_eq!(exact[i], reference[i], max_relative = 1e-9);
        }
    }

    #[test]
    fn augmented_flow_error_matches_jordan_closed_form() {
        let plant = jordan2(0.8);
        let state = SimState::new(
            0.0,
            DVector::from_row_slice(&[0.4, -0.2]),
            DVector::from_row_slice(&[0.1, 0.3]),
        )
        .unwrap();
        let next = propagate(&state, &PlantSpec::Jordan(plant.clone()), 0.9).unwrap();
        let expected = error_transition(&plant, 0.9) * state.error();
        for i in 0..2 {
            assert_relative_eq!(
                next.error()[i],
                expected[i],
                max_relative = 1e-12,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn propagation_is_additive_in_time() {
        let plant = PlantSpec::Jordan(jordan2(1.2));
        let s0 = SimState::new(
            0.0,
            DVector::from_row_slice(&[0.5, 0.25]),
            DVector::from_row_slice(&[-0.1, 0.05]),
        )
        .unwrap();
        let direct = propagate(&s0, &plant, 0.7).unwrap();
        let split = propagate(&propagate(&s0, &plant, 0.3).unwrap(), &plant, 0.4).unwrap();
        for i in 0..2 {
            assert_relative_eq!(direct.x[i], split.x[i], max_relative = 1e-12);
            assert_relative_eq!(direct.xhat[i], split.xhat[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn overflow_is_reported() {
        let plant = PlantSpec::Scalar(ScalarPlant::new(50.0, 0.0, 0.0, 1.0).unwrap());
        let err = propagate(&SimState::scalar(0.0, 1.0, 0.0), &plant, 100.0).unwrap_err();
        assert!(matches!(err, ModelError::Overflow { .. }));
    }

    #[test]
    fn trigger_function_values() {
        let cfg = TriggerConfig::scalar(0.2671, 0.1, 0.1, 1.2, 1.0001).unwrap();
        assert_eq!(trigger_value(&cfg, 0, 0.0), 0.2671);
        let half = TriggerConfig::scalar(1.0, 1.0, 0.5, 0.0, 2.0).unwrap();
        assert_relative_eq!(trigger_value(&half, 0, LN_2), 0.5, max_relative = 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let v = trigger_value(&cfg, 0, k as f64);
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn jumps_move_only_the_estimate() {
        let s = SimState::scalar(1.0, 1.0, 0.4);
        let j = apply_jump(&s, 0, 0.6);
        assert_eq!(j.x, s.x);
        assert_relative_eq!(j.xhat[0], 1.0);
        assert_relative_eq!(j.error()[0], 0.0, epsilon = 1e-16);
        assert_eq!(apply_jump(&s, 0, 0.0), s);

        let s = SimState::scalar(0.0, 0.2, 0.1);
        let j = apply_jump(&s, 0, 0.095);
        assert_relative_eq!(j.error()[0], 0.005, max_relative = 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ScalarPlant::new(-1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ScalarPlant::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(TriggerConfig::scalar(1.0, 0.0, 0.5, 0.1, 2.0).is_err());
        assert!(TriggerConfig::scalar(1.0, 1.0, 1.0, 0.1, 2.0).is_err());
        assert!(TriggerConfig::scalar(1.0, 1.0, 0.5, 0.1, 1.0).is_err());
        let plant = jordan2(1.0);
        let mut cfg =
            TriggerConfig::with_default_ladder(&plant, vec![1.0, 0.1], 1.0, 0.5, 0.1, 1.5).unwrap();
        assert_eq!(cfg.ladder, vec![0.25, 0.5]);
        cfg.ladder = vec![0.5, 0.5];
        assert!(cfg.validate_for(&plant).is_err());
    }
}
