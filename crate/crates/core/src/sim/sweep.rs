use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::bounds::{self, BoundInputs, BoundsError, PhaseCurve, PhaseRow};

use super::{run_scalar, ScalarScenario, SimError};

/// One row of a sweep table. Analytic-only sweeps leave the empirical
/// columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub rho0: f64,
    pub sigma: f64,
    pub g: Option<u32>,
    pub rs_empirical: Option<f64>,
    pub r_nec: f64,
    pub r_nec_approx: f64,
    pub r_suf: f64,
    pub r_nec_sup_sigma: Option<f64>,
    pub r_access: f64,
    pub x_final_norm: Option<f64>,
    pub errors: String,
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "gamma",
    "rho0",
    "sigma",
    "g",
    "rs_empirical",
    "r_nec",
    "r_nec_approx",
    "r_suf",
    "r_nec_sup_sigma",
    "r_access",
    "x_final_norm",
    "errors",
];

impl SweepRow {
    fn analytic(p: &BoundInputs) -> Self {
        Self {
            gamma: p.gamma,
            rho0: p.rho0,
            sigma: p.sigma,
            g: None,
            rs_empirical: None,
            r_nec: bounds::transmission_rate_necessary(p),
            r_nec_approx: bounds::transmission_rate_necessary_approx(p),
            r_suf: bounds::transmission_rate_sufficient(p),
            r_nec_sup_sigma: None,
            r_access: bounds::access_rate_necessary(p),
            x_final_norm: None,
            errors: String::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Runs the scalar scenario once per delay bound. Rows come back in grid
/// order; a failed run is recorded in its row and the sweep continues.
pub fn sweep_gamma(base: &ScalarScenario, gammas: &[f64]) -> Result<Vec<SweepRow>, SimError> {
    if gammas.is_empty() {
        return Err(SimError::Config("the gamma grid is empty".into()));
    }
    if let Some(bad) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(SimError::Config(format!(
            "gamma grid values must be positive, got {bad}"
        )));
    }
    base.bound_inputs()?;
    let rows = gammas
        .par_iter()
        .map(|&gamma| sweep_row(&base.with_gamma(gamma)))
        .collect();
    Ok(rows)
}

fn sweep_row(s: &ScalarScenario) -> SweepRow {
    let p = match s.bound_inputs() {
        Ok(p) => p,
        Err(e) => {
            return SweepRow {
                gamma: s.trigger.gamma,
                rho0: s.trigger.rho0,
                sigma: s.trigger.sigma,
                g: None,
                rs_empirical: None,
                r_nec: f64::NAN,
                r_nec_approx: f64::NAN,
                r_suf: f64::NAN,
                r_nec_sup_sigma: None,
                r_access: f64::NAN,
                x_final_norm: None,
                errors: e.to_string(),
            }
        }
    };
    let mut row = SweepRow::analytic(&p);
    row.g = Some(
        s.options
            .packet_bits
            .unwrap_or_else(|| bounds::packet_size_sufficient(&p)),
    );
    match run_scalar(s) {
        Ok(trace) => {
            let bits: u64 = trace.bits_sent.iter().sum();
            row.rs_empirical = Some(bits as f64 / trace.t_end);
            row.x_final_norm = trace.final_sample().map(|f| norm(&f.x));
        }
        Err(SimError::Divergence { t, trace }) => {
            let bits: u64 = trace.bits_sent.iter().sum();
            row.rs_empirical = Some(bits as f64 / t);
            row.errors = format!("diverged at t = {t}");
        }
        Err(e) => row.errors = e.to_string(),
    }
    row
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Necessary, approximate necessary and sufficient rates over a delay grid,
/// with the phase-transition markers. With a σ grid each row also carries
/// the largest necessary rate over that grid.
pub fn phase_curves(
    inputs: &BoundInputs,
    gammas: &[f64],
    sigma_grid: Option<&[f64]>,
) -> Result<PhaseCurve, BoundsError> {
    inputs.validate()?;
    if gammas.is_empty() {
        return Err(BoundsError::Invalid("the gamma grid is empty".into()));
    }
    if let Some(bad) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(BoundsError::Invalid(format!(
            "gamma values must be non-negative, got {bad}"
        )));
    }
    if let Some(grid) = sigma_grid {
        if grid.is_empty() || grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(BoundsError::Invalid(
                "sigma grid must be non-empty and positive".into(),
            ));
        }
    }
    let rows = gammas
        .par_iter()
        .map(|&gamma| {
            let p = inputs.with_gamma(gamma);
            PhaseRow {
                gamma,
                necessary: bounds::transmission_rate_necessary(&p),
                necessary_approx: bounds::transmission_rate_necessary_approx(&p),
                sufficient: bounds::transmission_rate_sufficient(&p),
                necessary_sup_sigma: sigma_grid.map(|grid| {
                    grid.iter()
                        .map(|&s| bounds::transmission_rate_necessary(&p.with_sigma(s)))
                        .fold(0.0, f64::max)
                }),
            }
        })
        .collect();
    Ok(PhaseCurve {
        inputs: *inputs,
        rows,
        gamma_c: bounds::critical_delay(inputs),
        gamma_eq: bounds::equilibrium_delay(inputs.a),
        asymptote: bounds::rate_asymptote(inputs),
        access_rate: bounds::access_rate_necessary(inputs),
    })
}

/// Sweep-table rows for an analytic curve.
pub fn phase_rows(curve: &PhaseCurve) -> Vec<SweepRow> {
    curve
        .rows
        .iter()
        .map(|r| {
            let mut row = SweepRow::analytic(&curve.inputs.with_gamma(r.gamma));
            row.r_nec_sup_sigma = r.necessary_sup_sigma;
            row
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    wtr.write_record(SWEEP_COLUMNS)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
