use crate::channel::{DelayChannel, InFlight, InFlightPacket};
use crate::codec::{self, Sign, MAX_PACKET_BITS};
use crate::model::{
    apply_jump, error_transition, trigger_value, Coordinate, JordanPlant, Propagator, SimState,
    TriggerConfig,
};

use super::trace::{Event, EventKind, RunParams, Sample, SimTrace};
use super::{packet_sizes, Detection, SimError, SimOptions};

/// Runs abort once `‖x‖` exceeds this.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

const BISECTION_STEPS: usize = 200;

struct Engine<'a> {
    plant: &'a JordanPlant,
    cfg: &'a TriggerConfig,
    opts: &'a SimOptions,
    coords: Vec<Coordinate>,
    channels: Vec<DelayChannel>,
    g: Vec<u32>,
    propagator: Propagator,
    in_flight: InFlight,
    seq: Vec<u64>,
    trace: SimTrace,
}

pub(super) fn run(
    plant: &JordanPlant,
    cfg: &TriggerConfig,
    channels: Vec<DelayChannel>,
    init: SimState,
    opts: &SimOptions,
    warnings: Vec<String>,
) -> Result<SimTrace, SimError> {
    let n = plant.dim();
    if !(opts.step.is_finite() && opts.step > 0.0) {
        return Err(SimError::Config(format!(
            "step must be positive, got {}",
            opts.step
        )));
    }
    if !(opts.horizon.is_finite() && opts.horizon > 0.0) {
        return Err(SimError::Config(format!(
            "horizon must be positive, got {}",
            opts.horizon
        )));
    }
    if opts.record_every == 0 {
        return Err(SimError::Config("record_every must be at least 1".into()));
    }
    if let Some(bad) = opts.muted.iter().find(|&&i| i >= n) {
        return Err(SimError::Config(format!(
            "muted coordinate {bad} out of range"
        )));
    }
    let g = packet_sizes(plant, cfg, opts.packet_bits);
    for &gi in &g {
        if gi == 0 || gi > MAX_PACKET_BITS || (gi >= 2 && cfg.gamma == 0.0) {
            return Err(SimError::Config(format!(
                "packet size {gi} is not usable with gamma = {}",
                cfg.gamma
            )));
        }
    }

    let mut propagator = Propagator::new(plant, opts.integrator);
    propagator.cache_step(opts.step);
    let params = RunParams {
        blocks: plant.blocks.clone(),
        sigma: cfg.sigma,
        rho0: cfg.rho0,
        gamma: cfg.gamma,
        b: cfg.b,
        nu: opts.nu,
        v0: cfg.v0.clone(),
        ladder: cfg.ladder.clone(),
        packet_bits: g.clone(),
        step: opts.step,
        horizon: opts.horizon,
        integrator: opts.integrator,
        detection: opts.detection,
        muted: opts.muted.clone(),
    };
    let coords = plant.coordinates();
    let trace = SimTrace {
        params,
        coordinates: coords.clone(),
        samples: Vec::new(),
        events: Vec::new(),
        bits_sent: vec![0; n],
        trigger_counts: vec![0; n],
        t_end: 0.0,
        warnings,
    };
    let engine = Engine {
        plant,
        cfg,
        opts,
        coords,
        channels,
        g,
        propagator,
        in_flight: InFlight::new(n),
        seq: vec![0; n],
        trace,
    };
    engine.simulate(init)
}

impl Engine<'_> {
    fn simulate(mut self, init: SimState) -> Result<SimTrace, SimError> {
        let h = self.opts.step;
        let steps = ((self.opts.horizon / h) - 1e-9).ceil().max(1.0) as u64;
        let mut state = init;
        let mut k: u64 = 0;
        loop {
            // Grid point k.
            state = self.deliver_due(state)?;
            state = self.fire_triggers(state, None)?;
            if k.is_multiple_of(self.opts.record_every as u64) || k == steps {
                self.record(&state);
            }
            if k == steps {
                break;
            }
            let t_next = (k + 1) as f64 * h;
            state = self.advance_to(state, t_next, h)?;
            k += 1;
        }
        self.trace.t_end = state.t;
        Ok(self.trace)
    }

    /// Moves from the current grid point to `t_next`, stopping at every
    /// reception and, with refined detection, at every exact crossing.
    fn advance_to(
        &mut self,
        mut state: SimState,
        t_next: f64,
        h: f64,
    ) -> Result<SimState, SimError> {
        let mut full_step = true;
        loop {
            let mut target = t_next;
            let mut stop_for_delivery = false;
            if let Some(tc) = self.in_flight.next_delivery() {
                if tc < target {
                    target = tc;
                    stop_for_delivery = true;
                }
            }
            let mut crossing = None;
            if self.opts.detection == Detection::Refined {
                if let Some((tau, coord)) = self.first_crossing(&state, target - state.t) {
                    target = state.t + tau;
                    crossing = Some(coord);
                    stop_for_delivery = false;
                }
            }
            if crossing.is_none() && !stop_for_delivery {
                state = if full_step {
                    self.step(&state, h)?
                } else {
                    let dt = t_next - state.t;
                    if dt > 0.0 {
                        self.step(&state, dt)?
                    } else {
                        state
                    }
                };
                state.t = t_next;
                return Ok(state);
            }
            full_step = false;
            let dt = target - state.t;
            if dt > 0.0 {
                state = self.step(&state, dt)?;
            }
            state.t = target;
            if stop_for_delivery
                || self
                    .in_flight
                    .next_delivery()
                    .is_some_and(|tc| tc <= target)
            {
                state = self.deliver_due(state)?;
            }
            if self.opts.detection == Detection::Refined {
                state = self.fire_triggers(state, crossing)?;
            }
        }
    }

    fn step(&mut self, state: &SimState, dt: f64) -> Result<SimState, SimError> {
        match self.propagator.advance(state, dt) {
            Ok(next) if next.x.norm() <= DIVERGENCE_THRESHOLD => Ok(next),
            Ok(next) => Err(self.diverged(next.t)),
            Err(_) => Err(self.diverged(state.t + dt)),
        }
    }

    fn diverged(&mut self, t: f64) -> SimError {
        let mut trace = std::mem::replace(&mut self.trace, empty_trace());
        trace.t_end = t;
        SimError::Divergence {
            t,
            trace: Box::new(trace),
        }
    }

    fn active(&self, coord: usize) -> bool {
        !self.opts.muted.contains(&coord) && self.in_flight.admit(coord)
    }

    /// Earliest `τ ∈ (0, span]` at which an idle coordinate reaches its
    /// triggering level, with the coordinate index.
    fn first_crossing(&self, state: &SimState, span: f64) -> Option<(f64, usize)> {
        if span <= 0.0 {
            return None;
        }
        let z = state.error();
        let t0 = state.t;
        let residual = |tau: f64, i: usize| -> f64 {
            let phi = error_transition(self.plant, tau);
            let zi = (phi.row(i) * &z)[0];
            zi.abs() - trigger_value(self.cfg, i, t0 + tau)
        };
        let mut best: Option<(f64, usize)> = None;
        for i in 0..self.coords.len() {
            if !self.active(i) || residual(span, i) < 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (0.0, span);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if residual(mid, i) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            if best.is_none_or(|(tau, _)| hi < tau) {
                best = Some((hi, i));
            }
        }
        best
    }

    fn fire_triggers(
        &mut self,
        mut state: SimState,
        forced: Option<usize>,
    ) -> Result<SimState, SimError> {
        let t = state.t;
        for i in 0..self.coords.len() {
            if !self.active(i) {
                continue;
            }
            let zi = state.x[i] - state.xhat[i];
            if forced != Some(i) && zi.abs() < trigger_value(self.cfg, i, t) {
                continue;
            }
            let g = self.g[i];
            let packet = codec::encode(i, t, Sign::of(zi), g, self.cfg.b, self.cfg.gamma)?;
            let k = self.seq[i];
            self.seq[i] += 1;
            let delay = self.channels[i].sample_delay(k)?;
            let t_c = t + delay;
            self.trace.bits_sent[i] += u64::from(g);
            self.trace.trigger_counts[i] += 1;
            self.trace.events.push(Event {
                kind: EventKind::Trigger,
                coord: i,
                t_s: t,
                t_c,
                delta: delay,
                g,
                bits_hex: packet.bits_hex(),
                z_pre: zi,
                q: None,
                z_post: None,
                q_outside_window: false,
            });
            self.in_flight.send(i, packet, t_c, k)?;
            if delay == 0.0 {
                state = self.deliver_due(state)?;
            }
        }
        Ok(state)
    }

    fn deliver_due(&mut self, mut state: SimState) -> Result<SimState, SimError> {
        for InFlightPacket { packet, t_c, .. } in self.in_flight.take_due(state.t) {
            let i = packet.coord;
            let decoded = codec::decode(&packet, t_c, self.cfg.b, self.cfg.gamma)?;
            let zbar = codec::reconstruct_error(
                decoded.sign,
                decoded.q,
                t_c,
                self.cfg.v0[i],
                self.cfg.sigma,
                self.coords[i].eigenvalue,
            );
            let z_pre = state.x[i] - state.xhat[i];
            state = apply_jump(&state, i, zbar);
            let z_post = state.x[i] - state.xhat[i];
            let q = decoded.q;
            self.trace.events.push(Event {
                kind: EventKind::Reception,
                coord: i,
                t_s: packet.t_s,
                t_c,
                delta: t_c - packet.t_s,
                g: packet.len(),
                bits_hex: packet.bits_hex(),
                z_pre,
                q: Some(q),
                z_post: Some(z_post),
                q_outside_window: q < t_c - self.cfg.gamma || q > t_c,
            });
        }
        Ok(state)
    }

    fn record(&mut self, state: &SimState) {
        let n = self.coords.len();
        self.trace.samples.push(Sample {
            t: state.t,
            x: state.x.iter().copied().collect(),
            xhat: state.xhat.iter().copied().collect(),
            z: state.error().iter().copied().collect(),
            v: (0..n)
                .map(|i| trigger_value(self.cfg, i, state.t))
                .collect(),
        });
    }
}

fn empty_trace() -> SimTrace {
    SimTrace {
        params: RunParams {
            blocks: Vec::new(),
            sigma: 0.0,
            rho0: 0.0,
            gamma: 0.0,
            b: 0.0,
            nu: 0.0,
            v0: Vec::new(),
            ladder: Vec::new(),
            packet_bits: Vec::new(),
            step: 0.0,
            horizon: 0.0,
            integrator: Default::default(),
            detection: Default::default(),
            muted: Vec::new(),
        },
        coordinates: Vec::new(),
        samples: Vec::new(),
        events: Vec::new(),
        bits_sent: Vec::new(),
        trigger_counts: Vec::new(),
        t_end: 0.0,
        warnings: Vec::new(),
    }
}
