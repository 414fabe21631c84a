use serde::Serialize;

use crate::bounds::{self, BoundInputs, VectorBoundInputs};

/// Formats a value with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.999995 -> 10.00000).
        if s.trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len()
            > 6
            && decimals > 0
        {
            format!("{x:.prec$}", prec = decimals - 1)
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsTable {
    pub entries: Vec<Entry>,
    /// Packet sizes in 2..=32 passing every packet-window check; `None` when
    /// the window is undefined for these inputs.
    pub assumption1_witness: Option<Vec<u32>>,
}

impl BoundsTable {
    fn push(&mut self, name: &str, value: f64) {
        self.entries.push(Entry {
            name: name.to_string(),
            value,
        });
    }

    pub fn scalar(p: &BoundInputs) -> Self {
        let mut t = BoundsTable {
            entries: Vec::new(),
            assumption1_witness: None,
        };
        t.push("access_rate", bounds::access_rate_necessary(p));
        t.push("packet_bits_necessary", bounds::packet_bits_necessary(p));
        t.push("triggering_rate_upper", bounds::triggering_rate_upper(p));
        t.push("min_inter_event_time", bounds::min_inter_event_time(p));
        t.push("triggering_rate_lower", bounds::triggering_rate_lower(p));
        t.push(
            "transmission_rate_necessary",
            bounds::transmission_rate_necessary(p),
        );
        t.push(
            "transmission_rate_necessary_approx",
            bounds::transmission_rate_necessary_approx(p),
        );
        t.push(
            "transmission_rate_sufficient",
            bounds::transmission_rate_sufficient(p),
        );
        t.push("gamma_c", bounds::critical_delay(p));
        t.push("gamma_eq", bounds::equilibrium_delay(p.a));
        t.push("beta", bounds::beta(p));
        t.push("asymptote", bounds::rate_asymptote(p));
        t.push(
            "packet_size_sufficient",
            f64::from(bounds::packet_size_sufficient(p)),
        );
        t.push(
            "time_quantization_tolerance",
            bounds::time_quantization_tolerance(p),
        );
        if p.gamma > 0.0 {
            if let Ok((lower, upper)) = bounds::assumption1_limits(p) {
                t.push("assumption1_lower", lower);
                t.push("assumption1_upper", upper);
                t.assumption1_witness = bounds::assumption1_scan(p, 2..=32).ok();
            }
        }
        t
    }

    pub fn vector(p: &VectorBoundInputs) -> Self {
        let mut t = BoundsTable {
            entries: Vec::new(),
            assumption1_witness: None,
        };
        t.push("access_rate", bounds::access_rate_necessary_vector(p));
        t.push(
            "transmission_rate_necessary",
            bounds::transmission_rate_necessary_vector(p),
        );
        t.push(
            "transmission_rate_necessary_approx",
            bounds::transmission_rate_necessary_approx_vector(p),
        );
        t.push(
            "transmission_rate_sufficient",
            bounds::transmission_rate_sufficient_vector(p),
        );
        for (j, blk) in p.blocks.iter().enumerate() {
            let bi = p.block_inputs(blk);
            t.push(
                &format!("block{j}.triggering_rate_upper"),
                bounds::triggering_rate_upper(&bi),
            );
            t.push(&format!("block{j}.gamma_c"), bounds::critical_delay(&bi));
            t.push(
                &format!("block{j}.gamma_eq"),
                bounds::equilibrium_delay(blk.eigenvalue),
            );
            t.push(&format!("block{j}.asymptote"), bounds::rate_asymptote(&bi));
        }
        t
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.value)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{:<36}{}\n", e.name, sig6(e.value)));
        }
        if let Some(w) = &self.assumption1_witness {
            let list = if w.is_empty() {
                "none".to_string()
            } else {
                w.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
            };
            out.push_str(&format!("{:<36}{list}\n", "assumption1_witness"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(11.541560327111707), "11.5416");
        assert_eq!(sig6(0.13862943611198905), "0.138629");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(7.0), "7.00000");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(1234567.0), "1.23457e6");
    }
}
