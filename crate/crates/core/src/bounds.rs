//! Closed-form rate, packet-size and delay calculators.
//!
//! `log` is base 2 and `ln` is natural throughout. Every `max{0, ·}` clamp
//! returns exactly `0.0` so callers may compare against zero.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use thiserror::Error;

use crate::model::JordanBlock;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Parameters shared by the scalar bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub a: f64,
    pub sigma: f64,
    pub rho0: f64,
    pub gamma: f64,
    pub b: f64,
    pub nu: f64,
}

impl BoundInputs {
    pub fn new(
        a: f64,
        sigma: f64,
        rho0: f64,
        gamma: f64,
        b: f64,
        nu: f64,
    ) -> Result<Self, BoundsError> {
        let p = Self {
            a,
            sigma,
            rho0,
            gamma,
            b,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        check_common(self.sigma, self.rho0, self.gamma, self.b, self.nu)?;
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(BoundsError::Invalid(format!(
                "A must be positive, got {}",
                self.a
            )));
        }
        Ok(())
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_rho0(mut self, rho0: f64) -> Self {
        self.rho0 = rho0;
        self
    }

    /// `ρ0 e^{-σγ}`, the post-jump fraction of the trigger level.
    fn jump_fraction(&self) -> f64 {
        self.rho0 * (-self.sigma * self.gamma).exp()
    }

    /// `-ln(ρ0 e^{-σγ})`, without underflow at large `σγ`.
    fn neg_ln_jump(&self) -> f64 {
        self.sigma * self.gamma - self.rho0.ln()
    }
}

/// `ln(e^x - 1)`, `-∞` at `x = 0`.
fn ln_expm1(x: f64) -> f64 {
    if x > 1.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `ln(ln(1 + e^u))`.
fn ln_ln1p_exp(u: f64) -> f64 {
    if u < -30.0 {
        u
    } else {
        u.exp().ln_1p().ln()
    }
}

fn check_common(sigma: f64, rho0: f64, gamma: f64, b: f64, nu: f64) -> Result<(), BoundsError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(BoundsError::Invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(BoundsError::Invalid(format!(
            "rho0 must lie in (0, 1), got {rho0}"
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(BoundsError::Invalid(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    if !(b.is_finite() && b > 1.0) {
        return Err(BoundsError::Invalid(format!("b must exceed 1, got {b}")));
    }
    if !(nu.is_finite() && nu >= 1.0) {
        return Err(BoundsError::Invalid(format!(
            "nu must be at least 1, got {nu}"
        )));
    }
    Ok(())
}

/// Parameters for a Jordan-form plant. `ladder` holds `ρ_i` per coordinate in
/// state order and ends at `rho0` inside every block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorBoundInputs {
    pub blocks: Vec<JordanBlock>,
    pub sigma: f64,
    pub rho0: f64,
    pub gamma: f64,
    pub b: f64,
    pub nu: f64,
    pub ladder: Vec<f64>,
}

impl VectorBoundInputs {
    pub fn validate(&self) -> Result<(), BoundsError> {
        check_common(self.sigma, self.rho0, self.gamma, self.b, self.nu)?;
        let n: usize = self.blocks.iter().map(|b| b.order).sum();
        if self.blocks.is_empty() || self.ladder.len() != n {
            return Err(BoundsError::Invalid(format!(
                "ladder needs {n} entries, got {}",
                self.ladder.len()
            )));
        }
        if self
            .blocks
            .iter()
            .any(|b| !(b.eigenvalue > 0.0) || b.order == 0)
        {
            return Err(BoundsError::Invalid(
                "eigenvalues must be positive, orders >= 1".into(),
            ));
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

    /// Scalar inputs for one block (eigenvalue substituted for `A`).
    pub fn block_inputs(&self, block: &JordanBlock) -> BoundInputs {
        BoundInputs {
            a: block.eigenvalue,
            sigma: self.sigma,
            rho0: self.rho0,
            gamma: self.gamma,
            b: self.b,
            nu: self.nu,
        }
    }

    fn coordinates(&self) -> impl Iterator<Item = (&JordanBlock, f64)> + '_ {
        self.blocks
            .iter()
            .flat_map(|blk| std::iter::repeat_n(blk, blk.order))
            .zip(self.ladder.iter().copied())
    }
}

fn clamp0(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Information access rate needed for exponential convergence at rate σ:
/// `(A + σ)/ln 2`.
pub fn access_rate_necessary(p: &BoundInputs) -> f64 {
    (p.a + p.sigma) / LN_2
}

/// `(Tr(A) + nσ)/ln 2`.
pub fn access_rate_necessary_vector(p: &VectorBoundInputs) -> f64 {
    (p.trace() + p.dim() as f64 * p.sigma) / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitsKind {
    Estimation,
    Stabilization,
}

/// Bits the controller must have received by time `t`.
///
/// `growth` is `A` (scalar) or `Tr(A)`, `dim` is `n`, and `z0_norm` is the
/// initial estimation-error norm (ignored for stabilization).
pub fn bits_lower_bound(
    t: f64,
    l: f64,
    z0_norm: f64,
    growth: f64,
    sigma: f64,
    dim: usize,
    kind: BitsKind,
) -> Result<f64, BoundsError> {
    if !(t >= 0.0) {
        return Err(BoundsError::Invalid(format!(
            "horizon must be non-negative, got {t}"
        )));
    }
    let rate_term = t * (growth + dim as f64 * sigma) / LN_2;
    match kind {
        BitsKind::Stabilization => Ok(rate_term),
        BitsKind::Estimation => {
            if !(z0_norm > 0.0) {
                return Err(BoundsError::Domain(
                    "estimation bound needs a non-zero initial error".into(),
                ));
            }
            if z0_norm > l {
                return Err(BoundsError::Domain(format!(
                    "initial error {z0_norm} exceeds the bound L = {l}"
                )));
            }
            Ok(rate_term + dim as f64 * (l / z0_norm).log2())
        }
    }
}

/// Minimum packet size for the post-jump contract:
/// `max{0, log((e^{Aγ} - 1)/(ρ0 e^{-σγ}))}`.
pub fn packet_bits_necessary(p: &BoundInputs) -> f64 {
    clamp0((ln_expm1(p.a * p.gamma) + p.neg_ln_jump()) / LN_2)
}

/// Upper bound on the triggering rate, `(A + σ)/(-ln(ρ0 e^{-σγ}))`.
pub fn triggering_rate_upper(p: &BoundInputs) -> f64 {
    (p.a + p.sigma) / p.neg_ln_jump()
}

/// Uniform lower bound on the inter-event time, the reciprocal of
/// [`triggering_rate_upper`].
pub fn min_inter_event_time(p: &BoundInputs) -> f64 {
    p.neg_ln_jump() / (p.a + p.sigma)
}

/// Triggering rate achieved by some delay realization under ν-precision:
/// `(A + σ)/(ln ν + ln(2 + e^{σγ}/ρ0))`.
pub fn triggering_rate_lower(p: &BoundInputs) -> f64 {
    // ln(2 + e^{σγ}/ρ0) = -ln(ρ0 e^{-σγ}) + ln(1 + 2ρ0 e^{-σγ})
    let tail = p.neg_ln_jump() + (2.0 * p.jump_fraction()).ln_1p();
    (p.a + p.sigma) / (p.nu.ln() + tail)
}

pub fn transmission_rate_necessary(p: &BoundInputs) -> f64 {
    let bits = packet_bits_necessary(p);
    if bits == 0.0 {
        return 0.0;
    }
    triggering_rate_lower(p) * bits
}

/// Sum over blocks of `p_j` times the scalar necessary rate at `λ_j`.
pub fn transmission_rate_necessary_vector(p: &VectorBoundInputs) -> f64 {
    p.blocks
        .iter()
        .map(|blk| blk.order as f64 * transmission_rate_necessary(&p.block_inputs(blk)))
        .sum()
}

/// Approximation of the necessary rate valid for `ρ0 ≪ e^{σγ}/max{2, ν}`:
/// `(A + σ)/ln 2 · max{0, 1 + log(e^{Aγ} - 1)/(-log(ρ0 e^{-σγ}))}`.
pub fn transmission_rate_necessary_approx(p: &BoundInputs) -> f64 {
    let ratio = ln_expm1(p.a * p.gamma) / p.neg_ln_jump();
    (p.a + p.sigma) / LN_2 * clamp0(1.0 + ratio)
}

pub fn transmission_rate_necessary_approx_vector(p: &VectorBoundInputs) -> f64 {
    p.blocks
        .iter()
        .map(|blk| blk.order as f64 * transmission_rate_necessary_approx(&p.block_inputs(blk)))
        .sum()
}

/// Per-event bit requirement of the time-quantization policy before integer
/// rounding: `max{0, 1 + log(bγ(A + σ)/ln(1 + ρ e^{-(σ + A)γ}))}`.
fn sufficient_bits_real(a: f64, sigma: f64, rho: f64, gamma: f64, b: f64) -> f64 {
    clamp0(1.0 + sufficient_log_term(a, sigma, rho, gamma, b))
}

/// `log(bγ(A + σ)/ln(1 + ρ e^{-(σ + A)γ}))`, `-∞` at `γ = 0`.
fn sufficient_log_term(a: f64, sigma: f64, rho: f64, gamma: f64, b: f64) -> f64 {
    let c = a + sigma;
    ((b * gamma * c).ln() - ln_ln1p_exp(rho.ln() - c * gamma)) / LN_2
}

/// Rate achieved by the time-quantization codec.
pub fn transmission_rate_sufficient(p: &BoundInputs) -> f64 {
    let bits = sufficient_bits_real(p.a, p.sigma, p.rho0, p.gamma, p.b);
    if bits == 0.0 {
        return 0.0;
    }
    triggering_rate_upper(p) * bits
}

/// Sum over coordinates; the log term of coordinate `i` uses `ρ_i`, the
/// triggering factor uses `ρ0`.
pub fn transmission_rate_sufficient_vector(p: &VectorBoundInputs) -> f64 {
    p.coordinates()
        .map(|(blk, rho_i)| {
            let bits = sufficient_bits_real(blk.eigenvalue, p.sigma, rho_i, p.gamma, p.b);
            if bits == 0.0 {
                0.0
            } else {
                triggering_rate_upper(&p.block_inputs(blk)) * bits
            }
        })
        .sum()
}

/// Finds a root of `f` on `[lo, hi]` by bisection. Requires a sign change.
/// Runs until the bracket is narrower than `tol` or cannot be split further
/// in floating point.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, BoundsError> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(BoundsError::Domain(format!(
            "no sign change on [{lo}, {hi}]: f = ({f_lo}, {f_hi})"
        )));
    }
    for _ in 0..2000 {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Residual of the critical-delay equation `e^{Aγ} - ρ0 e^{-σγ} - 1`.
pub fn critical_delay_residual(p: &BoundInputs, gamma: f64) -> f64 {
    (p.a * gamma).exp_m1() - p.rho0 * (-p.sigma * gamma).exp()
}

/// Delay `γ_c` below which the necessary transmission rate vanishes.
///
/// The residual is strictly increasing, negative at 0 and positive at
/// `ln 2 / A`, so bisection on that bracket always converges.
pub fn critical_delay(p: &BoundInputs) -> f64 {
    bisect(|g| critical_delay_residual(p, g), 0.0, LN_2 / p.a, 0.0)
        .expect("critical-delay residual changes sign on [0, ln2/A]")
}

/// `γ_eq = ln 2 / A`.
pub fn equilibrium_delay(a: f64) -> f64 {
    LN_2 / a
}

/// Large-delay limit of both the approximate necessary and the sufficient
/// rate: `(A + σ)/ln 2 · (1 + A/σ)`.
pub fn rate_asymptote(p: &BoundInputs) -> f64 {
    (p.a + p.sigma) / LN_2 * (1.0 + p.a / p.sigma)
}

/// Delay over which the error sweeps one full quantization cell:
/// `β = ln(1 + 2ρ0 e^{-σγ})/A`.
pub fn beta(p: &BoundInputs) -> f64 {
    (2.0 * p.jump_fraction()).ln_1p() / p.a
}

/// Integer packet size used by the codec:
/// `max{1, ⌈1 + log(bγ(A + σ)/ln(1 + ρ0 e^{-(σ + A)γ}))⌉}`. Returns 1 for
/// `γ = 0`.
pub fn packet_size_sufficient(p: &BoundInputs) -> u32 {
    packet_size_for(p.a, p.sigma, p.rho0, p.gamma, p.b)
}

/// Same rule with an explicit `ρ`, used per coordinate in vector mode.
pub fn packet_size_for(a: f64, sigma: f64, rho: f64, gamma: f64, b: f64) -> u32 {
    if gamma <= 0.0 {
        return 1;
    }
    let g = (1.0 + sufficient_log_term(a, sigma, rho, gamma, b)).ceil();
    if g.is_nan() || g < 1.0 {
        1
    } else if g >= u32::MAX as f64 {
        u32::MAX
    } else {
        g as u32
    }
}

/// Largest admissible `|t_s - q(t_s)|`: `ln(1 + ρ0 e^{-(σ + A)γ})/(A + σ)`.
pub fn time_quantization_tolerance(p: &BoundInputs) -> f64 {
    (p.rho0 * (-(p.sigma + p.a) * p.gamma).exp()).ln_1p() / (p.a + p.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption1Window {
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub expansion_ok: bool,
}

impl Assumption1Window {
    pub fn all(&self) -> bool {
        self.lower_ok && self.upper_ok && self.expansion_ok
    }
}

/// Real-valued lower and upper packet-size limits for ν-precision
/// compatibility of the codec.
pub fn assumption1_limits(p: &BoundInputs) -> Result<(f64, f64), BoundsError> {
    if !(p.nu >= 2.0) {
        return Err(BoundsError::Domain(format!(
            "the packet-size upper limit needs nu >= 2, got {}",
            p.nu
        )));
    }
    let lower = sufficient_bits_real(p.a, p.sigma, p.rho0, p.gamma, p.b);
    let inner = 1.0 / ((p.nu - 1.0) * (2.0 + 1.0 / p.jump_fraction()));
    let upper = (p.b * p.gamma * (p.a + p.sigma) / (-inner).ln_1p().abs()).log2();
    Ok((lower, upper))
}

/// Checks a constant packet size `g` against the lower limit, the upper limit
/// and the expansion condition with `δ = bγ/2^{g-2}`.
pub fn assumption1_window(p: &BoundInputs, g: u32) -> Result<Assumption1Window, BoundsError> {
    if g < 2 {
        return Err(BoundsError::Domain(format!(
            "packet size must be at least 2, got {g}"
        )));
    }
    let (lower, upper) = assumption1_limits(p)?;
    let c = p.a + p.sigma;
    let delta = p.b * p.gamma / 2f64.powi(g as i32 - 2);
    let ratio = (-c * delta / 2.0).exp_m1() / (-c * delta / 4.0).exp_m1();
    Ok(Assumption1Window {
        lower_ok: g as f64 >= lower,
        upper_ok: g as f64 <= upper,
        expansion_ok: ratio >= (c * 3.0 * delta / 4.0).exp(),
    })
}

/// All `g` in `range` for which every packet-window check holds.
pub fn assumption1_scan(
    p: &BoundInputs,
    range: std::ops::RangeInclusive<u32>,
) -> Result<Vec<u32>, BoundsError> {
    let mut out = Vec::new();
    for g in range {
        if assumption1_window(p, g)?.all() {
            out.push(g);
        }
    }
    Ok(out)
}

/// One rung of the v0 cascade inside a Jordan block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeRung {
    /// Coordinate index inside the block, zero-based.
    pub index: usize,
    /// Largest admissible `v0` for this coordinate given the one before it;
    /// `+∞` when unconstrained.
    pub max_v0: f64,
    /// `(ρ0 - ρ_i) + e^{(λ + σ)γ}`, the coordinate's envelope factor.
    pub envelope: f64,
}

/// Envelope factor `(ρ0 - ρ_i) + e^{(λ + σ)γ}`.
pub fn envelope_factor(lambda: f64, sigma: f64, rho0: f64, rho_i: f64, gamma: f64) -> f64 {
    (rho0 - rho_i) + ((lambda + sigma) * gamma).exp()
}

/// Cascade limits on the trigger levels of a Jordan block.
///
/// For coordinate `i ≥ 1` (zero-based) the limit is
/// `v0_{i-1}(λ + σ)(ρ0 - ρ_{i-1}) / (((ρ0 - ρ_{i-1}) + e^{(λ+σ)γ})(e^{(λ+σ)γ} - 1))`,
/// evaluated at the supplied `v0_{i-1}`. The first coordinate is
/// unconstrained. `γ = 0` yields `+∞`.
pub fn v0_cascade_bound(
    lambda: f64,
    sigma: f64,
    rho0: f64,
    gamma: f64,
    ladder: &[f64],
    v0: &[f64],
) -> Result<Vec<CascadeRung>, BoundsError> {
    let p = ladder.len();
    if p == 0 || v0.len() != p {
        return Err(BoundsError::Invalid(format!(
            "ladder and v0 must have the block order as length, got {} and {}",
            ladder.len(),
            v0.len()
        )));
    }
    let growth = ((lambda + sigma) * gamma).exp_m1();
    let mut out = Vec::with_capacity(p);
    for i in 0..p {
        let envelope = envelope_factor(lambda, sigma, rho0, ladder[i], gamma);
        let max_v0 = if i == 0 {
            f64::INFINITY
        } else {
            let gap = rho0 - ladder[i - 1];
            if !(gap > 0.0) {
                return Err(BoundsError::Domain(format!(
                    "rung {} equals rho0 before the end of the block",
                    i - 1
                )));
            }
            if growth == 0.0 {
                f64::INFINITY
            } else {
                v0[i - 1] * (lambda + sigma) * gap / ((gap + growth + 1.0) * growth)
            }
        };
        out.push(CascadeRung {
            index: i,
            max_v0,
            envelope,
        });
    }
    Ok(out)
}

/// Largest cascade starting from `v0_first`: each level is set to its bound.
pub fn max_v0_cascade(
    lambda: f64,
    sigma: f64,
    rho0: f64,
    gamma: f64,
    ladder: &[f64],
    v0_first: f64,
) -> Result<Vec<f64>, BoundsError> {
    let mut v0 = vec![v0_first; ladder.len()];
    for i in 1..ladder.len() {
        let rungs = v0_cascade_bound(lambda, sigma, rho0, gamma, &ladder[..=i], &v0[..=i])?;
        v0[i] = rungs[i].max_v0;
    }
    Ok(v0)
}

/// Analytic curves against the delay bound at fixed `A`, `σ`, `ρ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub inputs: BoundInputs,
    pub rows: Vec<PhaseRow>,
    pub gamma_c: f64,
    pub gamma_eq: f64,
    pub asymptote: f64,
    pub access_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub gamma: f64,
    pub necessary: f64,
    pub necessary_approx: f64,
    pub sufficient: f64,
    /// Supremum of the necessary rate over a σ grid, when one was supplied.
    pub necessary_sup_sigma: Option<f64>,
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use approx::assert_relative_eq;

    fn inputs(a: f64, sigma: f64, rho0: f64, gamma: f64) -> BoundInputs {
        BoundInputs::new(a, sigma, rho0, gamma, 1.0001, 2.0).unwrap()
    }

    #[test]
    fn access_rate_values() {
        assert_abs_diff_eq!(
            access_rate_necessary(&inputs(5.0, 3.0, 0.7, 0.0)),
            11.5416,
            epsilon = 1e-4
        );
        // 2.6/ln2 = 3.75101; the quoted 3.7512 is within 1e-3.
        assert_abs_diff_eq!(
            access_rate_necessary(&inputs(2.4, 0.2, 0.1, 0.0)),
            3.7510,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            access_rate_necessary(&inputs(2.4, 0.2, 0.1, 0.0)),
            3.7512,
            epsilon = 1e-3
        );
        // σ → 0 recovers the classic entropy rate A/ln2.
        assert_abs_diff_eq!(
            access_rate_necessary(&inputs(1.0, 1e-12, 0.5, 0.0)),
            1.4427,
            epsilon = 1e-4
        );
    }

    #[test]
    fn bits_bounds() {
        let zero = bits_lower_bound(0.0, 0.3, 0.3, 1.0, 1.0, 1, BitsKind::Estimation).unwrap();
        assert_eq!(zero, 0.0);
        let three = bits_lower_bound(LN_2, 2.0, 1.0, 1.0, 1.0, 1, BitsKind::Estimation).unwrap();
        assert_relative_eq!(three, 3.0, max_relative = 1e-14);
        let stab = bits_lower_bound(1.0, 1.0, 0.0, 2.4, 0.2, 1, BitsKind::Stabilization).unwrap();
        assert_relative_eq!(stab, access_rate_necessary(&inputs(2.4, 0.2, 0.1, 0.0)));
        assert!(matches!(
            bits_lower_bound(1.0, 1.0, 0.0, 1.0, 1.0, 1, BitsKind::Estimation),
            Err(BoundsError::Domain(_))
        ));
    }

    #[test]
    fn packet_bits_values() {
        assert_eq!(packet_bits_necessary(&inputs(5.0, 3.0, 0.7, 0.0)), 0.0);
        // At γ = 0.0864 the argument is just above one.
        let near = packet_bits_necessary(&inputs(5.0, 3.0, 0.7, 0.0864));
        assert!((0.0..0.001).contains(&near), "{near}");
        // Right at γ_c it clamps to zero.
        let p = inputs(5.0, 3.0, 0.7, 0.0);
        let gc = critical_delay(&p);
        assert!(packet_bits_necessary(&p.with_gamma(gc * (1.0 - 1e-9))) == 0.0);
    }

    #[test]
    fn triggering_rates() {
        let p = BoundInputs::new(1.0, 0.5, 0.7, 0.0, 2.0, 1.0).unwrap();
        assert_relative_eq!(
            triggering_rate_upper(&p),
            1.5 / -(0.7f64.ln()),
            max_relative = 1e-14
        );
        assert_abs_diff_eq!(triggering_rate_upper(&p), 4.2055, epsilon = 1e-3);
        assert_relative_eq!(
            min_inter_event_time(&p) * triggering_rate_upper(&p),
            1.0,
            max_relative = 1e-14
        );
        // 1.5/ln(2 + 1/0.7) = 1.5/1.23214
        assert_abs_diff_eq!(triggering_rate_lower(&p), 1.2174, epsilon = 1e-4);
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let r = triggering_rate_upper(&p.with_gamma(k as f64 * 0.1));
            assert!(r < prev);
            prev = r;
        }
        let mut prev = f64::INFINITY;
        for nu in 1..20 {
            let r = triggering_rate_lower(&BoundInputs { nu: nu as f64, ..p });
            assert!(r < prev);
            prev = r;
        }
        let near_one = BoundInputs {
            rho0: 1.0 - 1e-15,
            ..p
        };
        assert!(triggering_rate_upper(&near_one) > 1e13);
    }

    #[test]
    fn necessary_rate_is_product_of_factors() {
        let p = BoundInputs::new(5.0, 3.0, 0.7, 0.2, 1.0001, 2.0).unwrap();
        let trig = 8.0 / (2f64.ln() + (2.0 + (0.6f64).exp() / 0.7).ln());
        let bits = ((1.0f64).exp() - 1.0).ln() / LN_2 - (0.7 * (-0.6f64).exp()).ln() / LN_2;
        assert_relative_eq!(
            transmission_rate_necessary(&p),
            trig * bits,
            max_relative = 1e-12
        );
        assert_eq!(transmission_rate_necessary(&p.with_gamma(0.05)), 0.0);
    }

    #[test]
    fn approx_rate_equilibrium_and_asymptote() {
        let p = inputs(1.0, 0.5, 0.5, 0.0);
        let at_eq = transmission_rate_necessary_approx(&p.with_gamma(equilibrium_delay(1.0)));
        assert_relative_eq!(at_eq, access_rate_necessary(&p), max_relative = 1e-12);
        assert_abs_diff_eq!(rate_asymptote(&p), 6.4921, epsilon = 1e-4);
        let far = transmission_rate_necessary_approx(&p.with_gamma(2000.0));
        assert_relative_eq!(far, rate_asymptote(&p), max_relative = 1e-3);
    }

    #[test]
    fn sufficient_rate_limits() {
        assert_abs_diff_eq!(
            rate_asymptote(&inputs(1.3, 1.0, 0.9, 0.0)),
            7.6319,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            rate_asymptote(&inputs(1.0, 1.0, 0.5, 0.0)),
            5.7708,
            epsilon = 1e-4
        );
        assert_eq!(
            transmission_rate_sufficient(&inputs(1.0, 1.0, 0.5, 0.0)),
            0.0
        );
        // The sufficient rate approaches the asymptote like log(γ)/γ.
        let p = inputs(1.3, 1.0, 0.9, 0.0);
        let err = |g: f64| {
            (transmission_rate_sufficient(&p.with_gamma(g)) / rate_asymptote(&p) - 1.0).abs()
        };
        assert!(err(5000.0) < err(500.0) && err(500.0) < err(50.0));
        assert!(err(1e5) < 1e-3);
    }

    #[test]
    fn critical_delay_values() {
        let p = inputs(5.0, 3.0, 0.7, 0.0);
        let gc = critical_delay(&p);
        assert_abs_diff_eq!(gc, 0.0864, epsilon = 1e-4);
        assert!(critical_delay_residual(&p, gc).abs() <= 1e-8);
        assert!(gc < equilibrium_delay(5.0));
        let limit = critical_delay(&inputs(2.0, 1e-9, 1.0 - 1e-9, 0.0));
        assert_abs_diff_eq!(limit, equilibrium_delay(2.0), epsilon = 1e-6);
        assert!(critical_delay(&inputs(2.0, 1.0, 1e-9, 0.0)) < 1e-8);
    }

    #[test]
    fn direct_formula_values() {
        assert_abs_diff_eq!(equilibrium_delay(5.0), 0.1386, epsilon = 1e-4);
        assert_abs_diff_eq!(equilibrium_delay(1.0), 0.6931, epsilon = 1e-4);
        assert_relative_eq!(
            beta(&inputs(1.0, 1.0, 0.5, 0.0)),
            LN_2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn packet_size_values() {
        let p = BoundInputs::new(1.0, 0.1, 0.1, 1.2, 1.0001, 2.0).unwrap();
        assert_eq!(packet_size_sufficient(&p), 7);
        assert_eq!(packet_size_sufficient(&p.with_gamma(1e-6)), 1);
        assert_eq!(packet_size_sufficient(&p.with_gamma(0.0)), 1);
        let mut prev = 0;
        for k in 1..=200 {
            let g = packet_size_sufficient(&p.with_gamma(0.05 * k as f64));
            assert!(g >= prev);
            prev = g;
        }
    }

    #[test]
    fn quantization_tolerance_values() {
        let p = BoundInputs::new(1.0, 0.1, 0.1, 1.2, 1.0001, 2.0).unwrap();
        assert_abs_diff_eq!(time_quantization_tolerance(&p), 0.02397, epsilon = 1e-5);
        assert!(time_quantization_tolerance(&p.with_rho0(1e-12)) < 1e-11);
        assert!(time_quantization_tolerance(&p.with_gamma(200.0)) < 1e-50);
    }

    #[test]
    fn assumption1_checks() {
        let p = BoundInputs::new(1.0, 1.0, 0.5, 0.5, 1.0001, 4.0).unwrap();
        assert!(!assumption1_window(&p, 2).unwrap().lower_ok);
        let two = BoundInputs { nu: 2.0, ..p };
        assert!(!assumption1_window(&two, 40).unwrap().upper_ok);
        assert!(matches!(
            assumption1_window(&BoundInputs { nu: 1.0, ..p }, 4),
            Err(BoundsError::Domain(_))
        ));
        // Finer precision widens the window until a witness exists.
        let wide = BoundInputs { nu: 8.0, ..p };
        assert_eq!(assumption1_scan(&wide, 2..=32).unwrap(), vec![4, 5]);
    }

    #[test]
    fn cascade_values() {
        let rungs = v0_cascade_bound(1.0, 1.0, 0.5, 0.1, &[0.5], &[1.0]).unwrap();
        assert_eq!(rungs.len(), 1);
        assert!(rungs[0].max_v0.is_infinite());

        let rungs = v0_cascade_bound(1.0, 1.0, 0.5, 0.1, &[0.25, 0.5], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(rungs[1].max_v0, 1.5347, epsilon = 1e-3);
        assert_relative_eq!(rungs[1].envelope, (0.2f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(
            rungs[0].envelope,
            0.25 + (0.2f64).exp(),
            max_relative = 1e-15
        );

        let zero_delay = v0_cascade_bound(1.0, 1.0, 0.5, 0.0, &[0.25, 0.5], &[1.0, 1.0]).unwrap();
        assert!(zero_delay[1].max_v0.is_infinite());

        assert!(matches!(
            v0_cascade_bound(1.0, 1.0, 0.5, 0.1, &[0.5, 0.5], &[1.0, 1.0]),
            Err(BoundsError::Domain(_))
        ));

        let ladder = [0.1, 0.2, 0.3];
        let v0 = max_v0_cascade(0.5, 0.4, 0.3, 0.2, &ladder, 2.0).unwrap();
        let check = v0_cascade_bound(0.5, 0.4, 0.3, 0.2, &ladder, &v0).unwrap();
        for i in 1..3 {
            assert_relative_eq!(v0[i], check[i].max_v0);
        }
    }

    #[test]
    fn vector_formulas_reduce_to_scalar_sums() {
        let blocks = vec![
            JordanBlock {
                eigenvalue: 1.3,
                order: 1,
            },
            JordanBlock {
                eigenvalue: 0.4,
                order: 1,
            },
        ];
        let v = VectorBoundInputs {
            blocks: blocks.clone(),
            sigma: 0.7,
            rho0: 0.3,
            gamma: 1.1,
            b: 1.2,
            nu: 3.0,
            ladder: vec![0.3, 0.3],
        };
        let scalar = |a: f64| BoundInputs::new(a, 0.7, 0.3, 1.1, 1.2, 3.0).unwrap();
        let (s1, s2) = (scalar(1.3), scalar(0.4));
        assert_eq!(
            transmission_rate_necessary_vector(&v),
            transmission_rate_necessary(&s1) + transmission_rate_necessary(&s2)
        );
        assert_eq!(
            transmission_rate_sufficient_vector(&v),
            transmission_rate_sufficient(&s1) + transmission_rate_sufficient(&s2)
        );
        assert_eq!(
            transmission_rate_necessary_approx_vector(&v),
            transmission_rate_necessary_approx(&s1) + transmission_rate_necessary_approx(&s2)
        );
        assert_relative_eq!(
            access_rate_necessary_vector(&v),
            access_rate_necessary(&s1) + access_rate_necessary(&s2),
            max_relative = 1e-15
        );
        let twin = VectorBoundInputs {
            blocks: vec![blocks[0], blocks[0]],
            ..v
        };
        assert_eq!(
            transmission_rate_necessary_vector(&twin),
            2.0 * transmission_rate_necessary(&s1)
        );
    }

    #[test]
    fn bisect_requires_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 0.0).is_err());
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert_relative_eq!(r, 2f64.sqrt(), max_relative = 1e-15);
    }
}
