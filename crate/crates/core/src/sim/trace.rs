use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::model::{Coordinate, Integrator, JordanBlock};

use super::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Trigger,
    Reception,
}

/// One line of the JSON event log. Trigger events carry the scheduled
/// delivery time; reception events additionally carry the decoded time and
/// the error on both sides of the jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub coord: usize,
    pub t_s: f64,
    pub t_c: f64,
    pub delta: f64,
    pub g: u32,
    pub bits_hex: String,
    /// Error of this coordinate just before the event.
    pub z_pre: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_post: Option<f64>,
    /// Decoded send time fell outside `[t_c - γ, t_c]`.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub q_outside_window: bool,
}

impl Event {
    pub fn time(&self) -> f64 {
        match self.kind {
            EventKind::Trigger => self.t_s,
            EventKind::Reception => self.t_c,
        }
    }
}

/// Parameters a trace was produced with, kept so rates and invariants can be
/// evaluated from the trace alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub blocks: Vec<JordanBlock>,
    pub sigma: f64,
    pub rho0: f64,
    pub gamma: f64,
    pub b: f64,
    pub nu: f64,
    pub v0: Vec<f64>,
    pub ladder: Vec<f64>,
    pub packet_bits: Vec<u32>,
    pub step: f64,
    pub horizon: f64,
    pub integrator: Integrator,
    pub detection: Detection,
    pub muted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub params: RunParams,
    pub coordinates: Vec<Coordinate>,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub bits_sent: Vec<u64>,
    pub trigger_counts: Vec<u64>,
    /// Time the run actually reached; below the horizon only on divergence.
    pub t_end: f64,
    pub warnings: Vec<String>,
}

impl SimTrace {
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn triggers(&self, coord: usize) -> impl Iterator<Item = &Event> + '_ {
        self.events
            .iter()
            .filter(move |e| e.kind == EventKind::Trigger && e.coord == coord)
    }

    pub fn receptions(&self) -> impl Iterator<Item = &Event> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Reception)
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// CSV header: `t`, then `x_i`, `xhat_i`, `z_i`, `v_i` for `i = 1..n`.
    pub fn csv_header(&self) -> Vec<String> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        for prefix in ["x", "xhat", "z", "v"] {
            header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
        }
        header
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.csv_header())?;
        for s in &self.samples {
            let row: Vec<f64> = std::iter::once(s.t)
                .chain(s.x.iter().copied())
                .chain(s.xhat.iter().copied())
                .chain(s.z.iter().copied())
                .chain(s.v.iter().copied())
                .collect();
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn events_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.events)
    }
}
