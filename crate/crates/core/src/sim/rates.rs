use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundsError, VectorBoundInputs};

use super::SimTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateRates {
    pub coord: usize,
    pub eigenvalue: f64,
    pub g: u32,
    pub triggers: u64,
    pub bits: u64,
    pub rs: f64,
    pub rtr: f64,
    pub triggering_rate_upper: f64,
    pub min_inter_event_time: f64,
}

/// Analytic values for one Jordan block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBounds {
    pub eigenvalue: f64,
    pub order: usize,
    pub packet_bits_necessary: f64,
    pub packet_size_sufficient: u32,
    pub triggering_rate_upper: f64,
    pub triggering_rate_lower: f64,
    pub gamma_c: f64,
    pub gamma_eq: f64,
    pub beta: f64,
    pub asymptote: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRates {
    pub access_rate: f64,
    pub necessary: f64,
    pub necessary_approx: f64,
    pub sufficient: f64,
    pub blocks: Vec<BlockBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Length of the measured interval.
    pub horizon: f64,
    pub rs_empirical: f64,
    pub rtr_empirical: f64,
    pub bits_sent: u64,
    pub triggers: u64,
    pub per_coordinate: Vec<CoordinateRates>,
    pub bounds: AnalyticRates,
    pub warnings: Vec<String>,
}

/// Empirical rates over `[0, T]` next to the analytic bounds for the run's
/// parameters. `T` is the horizon, or the time reached if the run stopped
/// early.
pub fn measure_rates(trace: &SimTrace) -> Result<RateReport, BoundsError> {
    let p = &trace.params;
    let horizon = if trace.t_end > 0.0 {
        trace.t_end
    } else {
        p.horizon
    };
    if !(horizon > 0.0) {
        return Err(BoundsError::Invalid(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let vector = VectorBoundInputs {
        blocks: p.blocks.clone(),
        sigma: p.sigma,
        rho0: p.rho0,
        gamma: p.gamma,
        b: p.b,
        nu: p.nu,
        ladder: p.ladder.clone(),
    };
    vector.validate()?;

    let block_inputs = |lambda: f64| -> Result<BoundInputs, BoundsError> {
        BoundInputs::new(lambda, p.sigma, p.rho0, p.gamma, p.b, p.nu)
    };
    let per_coordinate = trace
        .coordinates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let bi = block_inputs(c.eigenvalue)?;
            Ok(CoordinateRates {
                coord: i,
                eigenvalue: c.eigenvalue,
                g: p.packet_bits[i],
                triggers: trace.trigger_counts[i],
                bits: trace.bits_sent[i],
                rs: trace.bits_sent[i] as f64 / horizon,
                rtr: trace.trigger_counts[i] as f64 / horizon,
                triggering_rate_upper: bounds::triggering_rate_upper(&bi),
                min_inter_event_time: bounds::min_inter_event_time(&bi),
            })
        })
        .collect::<Result<Vec<_>, BoundsError>>()?;
    let blocks = p
        .blocks
        .iter()
        .map(|blk| {
            let bi = block_inputs(blk.eigenvalue)?;
            Ok(BlockBounds {
                eigenvalue: blk.eigenvalue,
                order: blk.order,
                packet_bits_necessary: bounds::packet_bits_necessary(&bi),
                packet_size_sufficient: bounds::packet_size_sufficient(&bi),
                triggering_rate_upper: bounds::triggering_rate_upper(&bi),
                triggering_rate_lower: bounds::triggering_rate_lower(&bi),
                gamma_c: bounds::critical_delay(&bi),
                gamma_eq: bounds::equilibrium_delay(blk.eigenvalue),
                beta: bounds::beta(&bi),
                asymptote: bounds::rate_asymptote(&bi),
            })
        })
        .collect::<Result<Vec<_>, BoundsError>>()?;

    let bits_sent: u64 = trace.bits_sent.iter().sum();
    let triggers: u64 = trace.trigger_counts.iter().sum();
    Ok(RateReport {
        horizon,
        rs_empirical: bits_sent as f64 / horizon,
        rtr_empirical: triggers as f64 / horizon,
        bits_sent,
        triggers,
        per_coordinate,
        bounds: AnalyticRates {
            access_rate: bounds::access_rate_necessary_vector(&vector),
            necessary: bounds::transmission_rate_necessary_vector(&vector),
            necessary_approx: bounds::transmission_rate_necessary_approx_vector(&vector),
            sufficient: bounds::transmission_rate_sufficient_vector(&vector),
            blocks,
        },
        warnings: trace.warnings.clone(),
    })
}
