//! Time-quantization codec.
//!
//! A packet carries the sign of the estimation error at the trigger instant
//! and a quantized trigger time `t_s`. The time line is cut into windows of
//! length `bγ`; bit 2 is the parity of the window holding `t_s`, and the
//! remaining `g - 2` bits index one of `2^{g-2}` equal cells of width
//! `δ = bγ/2^{g-2}` inside it. Because `bγ > γ` and `t_s ∈ [t_c - γ, t_c]`,
//! the receiver narrows the window down to two neighbours and the parity bit
//! settles it. The decoded time is the cell midpoint, so
//! `|t_s - q| ≤ bγ/2^{g-1}`.
//!
//! A one-bit packet carries only the sign; the receiver uses `q = t_c`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index bits are held in a `u64`.
pub const MAX_PACKET_BITS: u32 = 62;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(
        "cannot decode packet received at t_c = {t_c}: parity bit matches no candidate window"
    )]
    Decode { t_c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(value: f64) -> Sign {
        if value < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    // 0 = positive, 1 = negative
    fn bit(self) -> bool {
        matches!(self, Sign::Negative)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub coord: usize,
    pub bits: Vec<bool>,
    pub t_s: f64,
}

impl Packet {
    pub fn len(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bits packed most-significant first, zero padded to whole bytes.
    pub fn bits_hex(&self) -> String {
        let mut out = String::with_capacity(self.bits.len().div_ceil(8) * 2);
        for chunk in self.bits.chunks(8) {
            let mut byte = 0u8;
            for (i, bit) in chunk.iter().enumerate() {
                if *bit {
                    byte |= 0x80 >> i;
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn sign(&self) -> Sign {
        if self.bits[0] {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    fn index(&self) -> u64 {
        self.bits[2..]
            .iter()
            .fold(0u64, |acc, bit| (acc << 1) | u64::from(*bit))
    }
}

/// Width of one quantization cell for a `g`-bit packet.
pub fn cell_width(g: u32, b: f64, gamma: f64) -> f64 {
    b * gamma / 2f64.powi(g as i32 - 2)
}

/// Worst-case `|t_s - q|` guaranteed by the decoder, `bγ/2^{g-1}`.
pub fn quantization_error_bound(g: u32, b: f64, gamma: f64) -> f64 {
    b * gamma / 2f64.powi(g as i32 - 1)
}

fn check_params(g: u32, b: f64, gamma: f64) -> Result<(), CodecError> {
    if g == 0 || g > MAX_PACKET_BITS {
        return Err(CodecError::Contract(format!(
            "packet size must be in 1..={MAX_PACKET_BITS}, got {g}"
        )));
    }
    if !(b.is_finite() && b > 1.0) {
        return Err(CodecError::Contract(format!("b must exceed 1, got {b}")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CodecError::Contract(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    if g >= 2 && gamma == 0.0 {
        return Err(CodecError::Contract(
            "timing bits need a positive delay bound; use a one-bit packet when gamma = 0".into(),
        ));
    }
    Ok(())
}

pub fn encode(
    coord: usize,
    t_s: f64,
    sign: Sign,
    g: u32,
    b: f64,
    gamma: f64,
) -> Result<Packet, CodecError> {
    check_params(g, b, gamma)?;
    if !(t_s.is_finite() && t_s >= 0.0) {
        return Err(CodecError::Contract(format!(
            "send time must be non-negative, got {t_s}"
        )));
    }
    let mut bits = Vec::with_capacity(g as usize);
    bits.push(sign.bit());
    if g >= 2 {
        let window_len = b * gamma;
        let window = (t_s / window_len).floor();
        bits.push(window.rem_euclid(2.0) == 1.0);
        let cells = 1u64 << (g - 2);
        let delta = window_len / cells as f64;
        let offset = t_s - window * window_len;
        let raw = (offset / delta).floor();
        let index = if raw <= 0.0 {
            0
        } else {
            (raw as u64).min(cells - 1)
        };
        for k in (0..g - 2).rev() {
            bits.push((index >> k) & 1 == 1);
        }
    }
    Ok(Packet { coord, bits, t_s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub sign: Sign,
    /// Reconstructed send time.
    pub q: f64,
    /// Window the parity bit selected; `None` for one-bit packets.
    pub window: Option<i64>,
}

pub fn decode(packet: &Packet, t_c: f64, b: f64, gamma: f64) -> Result<Decoded, CodecError> {
    let g = packet.len();
    check_params(g, b, gamma)?;
    if !t_c.is_finite() {
        return Err(CodecError::Contract(format!(
            "reception time must be finite, got {t_c}"
        )));
    }
    let sign = packet.sign();
    if g == 1 {
        return Ok(Decoded {
            sign,
            q: t_c,
            window: None,
        });
    }
    let window_len = b * gamma;
    let cells = 1u64 << (g - 2);
    let delta = window_len / cells as f64;
    let index = packet.index();
    let parity = packet.bits[1];
    let midpoint = |w: i64| w as f64 * window_len + (index as f64 + 0.5) * delta;

    let early = ((t_c - gamma) / window_len).floor() as i64;
    let late = (t_c / window_len).floor() as i64;
    if let Some(w) = [early, late]
        .into_iter()
        .find(|w| (w.rem_euclid(2) == 1) == parity)
    {
        return Ok(Decoded {
            sign,
            q: midpoint(w),
            window: Some(w),
        });
    }
    // Both candidates coincide and disagree with the parity bit. This only
    // happens when t_s sits on a window edge up to rounding; accept the
    // neighbour whose cell lies within one cell of the feasible interval.
    for w in [early - 1, late + 1] {
        let q = midpoint(w);
        if q >= t_c - gamma - delta && q <= t_c + delta {
            return Ok(Decoded {
                sign,
                q,
                window: Some(w),
            });
        }
    }
    Err(CodecError::Decode { t_c })
}

/// Controller-side estimate of the error at reception,
/// `sign · v0 e^{-σq} · e^{λ(t_c - q)}`.
pub fn reconstruct_error(sign: Sign, q: f64, t_c: f64, v0: f64, sigma: f64, lambda: f64) -> f64 {
    sign.as_f64() * v0 * (-sigma * q + lambda * (t_c - q)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn first_cell_of_first_window() {
        let p = encode(0, 0.0, Sign::Positive, 3, 2.0, 1.0).unwrap();
        assert_eq!(p.bits, vec![false, false, false]);
        let d = decode(&p, 0.5, 2.0, 1.0).unwrap();
        assert_relative_eq!(d.q, cell_width(3, 2.0, 1.0) / 2.0);
        assert_eq!(d.sign, Sign::Positive);
    }

    #[test]
    fn worked_example_bits_and_midpoint() {
        let (b, gamma) = (1.0001, 1.2);
        let p = encode(0, 1.0, Sign::Negative, 8, b, gamma).unwrap();
        // window 0 (parity 0), cell 53 = 0b110101
        assert_eq!(
            p.bits,
            vec![true, false, true, true, false, true, false, true]
        );
        assert_eq!(p.bits_hex(), "b5");
        let delta = b * gamma / 64.0;
        for t_c in [1.0, 1.3, 1.9, 2.2] {
            let d = decode(&p, t_c, b, gamma).unwrap();
            assert_eq!(d.sign, Sign::Negative);
            assert_relative_eq!(d.q, 53.5 * delta, max_relative = 1e-15);
            assert!((d.q - 1.0).abs() <= quantization_error_bound(8, b, gamma));
        }
        assert_eq!(encode(0, 1.0, Sign::Negative, 8, b, gamma).unwrap(), p);
    }

    #[test]
    fn one_bit_packets_carry_the_sign_only() {
        let p = encode(3, 4.2, Sign::Negative, 1, 1.5, 0.0).unwrap();
        assert_eq!(p.bits, vec![true]);
        let d = decode(&p, 4.2, 1.5, 0.0).unwrap();
        assert_eq!(d.q, 4.2);
        assert_eq!(d.sign, Sign::Negative);
    }

    #[test]
    fn contract_violations() {
        assert!(encode(0, 1.0, Sign::Positive, 3, 1.5, 0.0).is_err());
        assert!(encode(0, -1.0, Sign::Positive, 3, 1.5, 1.0).is_err());
        assert!(encode(0, 1.0, Sign::Positive, 0, 1.5, 1.0).is_err());
        assert!(encode(0, 1.0, Sign::Positive, 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn corrupted_parity_is_rejected() {
        let mut p = encode(0, 5.0, Sign::Positive, 6, 2.0, 1.0).unwrap();
        p.bits[1] = !p.bits[1];
        // t_s = 5 lies in window 2; with t_c = 5.2 both candidates are window 2.
        assert!(matches!(
            decode(&p, 5.2, 2.0, 1.0),
            Err(CodecError::Decode { .. })
        ));
    }

    #[test]
    fn exact_timing_reconstructs_exactly() {
        let (v0, sigma, lambda): (f64, f64, f64) = (0.7, 0.3, 1.1);
        let t_s: f64 = 2.5;
        let z = -v0 * (-sigma * t_s).exp();
        let zbar = reconstruct_error(Sign::Negative, t_s, t_s, v0, sigma, lambda);
        assert_eq!(zbar, z);
    }

    #[test]
    fn mismatch_identity() {
        let (v0, sigma, lambda): (f64, f64, f64) = (0.9, 0.4, 1.3);
        for (t_s, q, t_c) in [(1.0f64, 1.01, 1.5), (3.0, 2.97, 3.0), (0.2, 0.25, 1.0)] {
            let v_ts = v0 * (-sigma * t_s).exp();
            let z_tc = v_ts * (lambda * (t_c - t_s)).exp();
            let direct =
                (z_tc - reconstruct_error(Sign::Positive, q, t_c, v0, sigma, lambda)).abs();
            let identity = v_ts
                * (lambda * (t_c - t_s)).exp()
                * (1.0 - ((lambda + sigma) * (t_s - q)).exp()).abs();
            assert_relative_eq!(direct, identity, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn decoded_window_ignores_actual_delay(
            t_s in 0.0f64..500.0,
            g in 2u32..24,
            b in 1.0001f64..4.0,
            gamma in 0.001f64..5.0,
            f1 in 0.0f64..=1.0,
            f2 in 0.0f64..=1.0,
        ) {
            let p = encode(0, t_s, Sign::Positive, g, b, gamma).unwrap();
            let d1 = decode(&p, t_s + f1 * gamma, b, gamma).unwrap();
            let d2 = decode(&p, t_s + f2 * gamma, b, gamma).unwrap();
            prop_assert_eq!(d1.window, d2.window);
            prop_assert_eq!(d1.q, d2.q);
            let slack = 1e-12 * (1.0 + t_s);
            prop_assert!((t_s - d1.q).abs() <= quantization_error_bound(g, b, gamma) + slack);
        }
    }
}
