//! Runtime invariants evaluated on a finished trace.

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs};

use super::{EventKind, SimTrace};

/// Relative slack for comparisons that hold exactly in real arithmetic.
const ROUNDING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Largest ratio of observed value to allowed value; `≤ 1` means pass.
    pub worst_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<f64>,
}

impl InvariantCheck {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            violations: 0,
            worst_ratio: 0.0,
            first_violation: None,
        }
    }

    fn observe(&mut self, t: f64, value: f64, limit: f64) {
        self.checked += 1;
        let ratio = if limit > 0.0 {
            value / limit
        } else if value <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > self.worst_ratio || ratio.is_nan() {
            self.worst_ratio = ratio;
        }
        if !(value <= limit) {
            self.violations += 1;
            self.first_violation.get_or_insert(t);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(InvariantCheck::passed)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> + '_ {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Checks a trace against:
///
/// * `delay`: every delivered delay lies in `[0, γ]`;
/// * `post_jump`: after a reception `|z_i| ≤ ρ0 e^{-σγ} v_i(t_s)` for the last
///   coordinate of a block and `|z_i| ≤ ρ0 v_i(t_c)` inside a block;
/// * `envelope`: `|z_i(t)| ≤ v0_i((ρ0 - ρ_i) + e^{(λ+σ)γ})e^{-σt}` at every
///   sample, up to `2h(λ+σ) sup|z_i|`;
/// * `inter_event`: consecutive triggers of a last-in-block coordinate are at
///   least `-ln(ρ0 e^{-σγ})/(λ+σ) - 2h` apart;
/// * `trigger_count`: at most `1 + T/(D - 2h)` triggers per such coordinate.
///
/// Muted coordinates are still checked; a muted run is expected to fail.
pub fn check_trace(trace: &SimTrace) -> InvariantReport {
    let p = &trace.params;
    let h = p.step;
    let jump_fraction = p.rho0 * (-p.sigma * p.gamma).exp();
    let level = |i: usize, t: f64| p.v0[i] * (-p.sigma * t).exp();

    let mut delay = InvariantCheck::new("delay");
    let mut post_jump = InvariantCheck::new("post_jump");
    for e in trace.receptions() {
        let d = if e.delta < 0.0 {
            f64::INFINITY
        } else {
            e.delta
        };
        delay.observe(e.t_c, d, p.gamma * (1.0 + ROUNDING));
        let c = &trace.coordinates[e.coord];
        let limit = if c.is_uncoupled() {
            jump_fraction * level(e.coord, e.t_s)
        } else {
            p.rho0 * level(e.coord, e.t_c)
        };
        let z_post = e.z_post.unwrap_or(f64::NAN).abs();
        post_jump.observe(
            e.t_c,
            z_post,
            limit * (1.0 + ROUNDING) + f64::EPSILON * e.z_pre.abs(),
        );
    }

    let mut envelope = InvariantCheck::new("envelope");
    let sup_z: Vec<f64> = (0..trace.dim())
        .map(|i| {
            trace
                .samples
                .iter()
                .map(|s| s.z[i].abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for s in &trace.samples {
        for (i, c) in trace.coordinates.iter().enumerate() {
            let growth = c.eigenvalue + p.sigma;
            let factor =
                bounds::envelope_factor(c.eigenvalue, p.sigma, p.rho0, p.ladder[i], p.gamma);
            let limit = level(i, s.t) * factor + 2.0 * h * growth * sup_z[i];
            envelope.observe(s.t, s.z[i].abs(), limit * (1.0 + ROUNDING));
        }
    }

    let mut inter_event = InvariantCheck::new("inter_event");
    let mut trigger_count = InvariantCheck::new("trigger_count");
    for (i, c) in trace.coordinates.iter().enumerate() {
        if !c.is_uncoupled() {
            continue;
        }
        let Ok(bi) = BoundInputs::new(c.eigenvalue, p.sigma, p.rho0, p.gamma, p.b, p.nu.max(1.0))
        else {
            continue;
        };
        let d = bounds::min_inter_event_time(&bi);
        let times: Vec<f64> = trace.triggers(i).map(|e| e.t_s).collect();
        for w in times.windows(2) {
            // Compared as "required gap ≤ observed gap".
            let gap = w[1] - w[0];
            inter_event.observe(w[1], d - 2.0 * h, gap + ROUNDING * d);
        }
        let cap = if d > 2.0 * h {
            1.0 + trace.t_end / (d - 2.0 * h)
        } else {
            f64::INFINITY
        };
        trigger_count.observe(trace.t_end, times.len() as f64, cap);
    }

    InvariantReport {
        checks: vec![delay, post_jump, envelope, inter_event, trigger_count],
    }
}

/// Reception events whose decoded time fell outside `[t_c - γ, t_c]`.
pub fn flagged_receptions(trace: &SimTrace) -> usize {
    trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Reception && e.q_outside_window)
        .count()
}
