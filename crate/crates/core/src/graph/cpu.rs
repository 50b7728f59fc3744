//! Sequential baseline: the same filter on one core, no packets.
//!
//! Each update costs `n × (t_score_per_event × window + t_cpu_overhead)`.
//! Events that arrive while the core is busy are gated by the ROI in force
//! and queued; the new ROI applies to events stamped after the update ends.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use super::{validate_input, Duration, OutputPacket, SimConfig, SimOutput, SimStats, SimTime};
use crate::error::SimError;
use crate::event::Event;
use crate::filter::{
    apply_motion_model, compute_roi, incremental_likelihood, mean_state, normalize_weights,
    systematic_resample, Particle, RoiSpec,
};
use crate::streams::{particle_rng, resample_offset};

struct InFlight {
    done: SimTime,
    cost: Duration,
    t_us: u64,
    scored: Vec<Particle>,
}

struct CpuFilter<'a> {
    config: &'a SimConfig,
    rngs: Vec<ChaCha8Rng>,
    population: Vec<Particle>,
    window: VecDeque<Event>,
    pending: VecDeque<Event>,
    since_update: usize,
    seq: u64,
    roi: RoiSpec,
    in_flight: Option<InFlight>,
    per_event: Duration,
    overhead: Duration,
    track: Vec<OutputPacket>,
    costs: Vec<Duration>,
    stats: SimStats,
}

impl<'a> CpuFilter<'a> {
    fn new(config: &'a SimConfig) -> Self {
        let mut rngs: Vec<ChaCha8Rng> = (0..config.n)
            .map(|i| particle_rng(config.seed, i))
            .collect();
        let population = rngs
            .iter_mut()
            .map(|rng| {
                let s = config.prior.sample(&config.filter, config.geometry, rng);
                Particle::new(s, 1.0 / config.n as f64)
            })
            .collect();
        Self {
            config,
            rngs,
            population,
            window: VecDeque::with_capacity(config.filter.w_max),
            pending: VecDeque::new(),
            since_update: 0,
            seq: 0,
            roi: RoiSpec::whole_frame(config.geometry),
            in_flight: None,
            per_event: Duration::from_us_f64(config.latency.t_score_per_event),
            overhead: Duration::from_us_f64(config.latency.t_cpu_overhead),
            track: Vec::new(),
            costs: Vec::new(),
            stats: SimStats::default(),
        }
    }

    fn on_event(&mut self, e: Event) -> Result<(), SimError> {
        let now = SimTime::from_us(e.t);
        self.complete_before(Some(now))?;
        self.stats.events_in += 1;
        if !self.roi.contains(&e) {
            self.stats.events_dropped_roi += 1;
            return Ok(());
        }
        self.pending.push_back(e);
        if self.in_flight.is_none() {
            self.drain(now);
        }
        Ok(())
    }

    /// Finishes every update that ends strictly before `limit` (all of them
    /// when `limit` is `None`), starting queued work as the core frees up.
    fn complete_before(&mut self, limit: Option<SimTime>) -> Result<(), SimError> {
        while let Some(job) = self.in_flight.take() {
            if limit.is_some_and(|l| job.done >= l) {
                self.in_flight = Some(job);
                break;
            }
            let done = job.done;
            self.finish(job)?;
            self.drain(done);
        }
        Ok(())
    }

    fn drain(&mut self, now: SimTime) {
        while self.in_flight.is_none() {
            let Some(e) = self.pending.pop_front() else {
                return;
            };
            if self.window.len() == self.config.filter.w_max {
                self.window.pop_front();
            }
            self.window.push_back(e);
            self.since_update += 1;
            if self.since_update == self.config.filter.q_trigger {
                self.since_update = 0;
                self.start(now, e.t);
            }
        }
    }

    fn start(&mut self, now: SimTime, t_us: u64) {
        let params = &self.config.filter;
        let geometry = self.config.geometry;
        let scored: Vec<Particle> = self
            .population
            .iter()
            .zip(self.rngs.iter_mut())
            .map(|(p, rng)| {
                let moved = apply_motion_model(&p.state, params, geometry, rng);
                let lik = incremental_likelihood(self.window.iter().rev(), &moved, params);
                Particle::new(moved, lik.value)
            })
            .collect();
        let per_particle = Duration(self.per_event.times(self.window.len()).0 + self.overhead.0);
        let cost = per_particle.times(self.config.n);
        self.in_flight = Some(InFlight {
            done: now.after(cost),
            cost,
            t_us,
            scored,
        });
    }

    fn finish(&mut self, job: InFlight) -> Result<(), SimError> {
        let mut population = job.scored;
        normalize_weights(&mut population, self.config.filter.eps_w);
        let mean = mean_state(&population)?;
        self.roi = compute_roi(&mean, self.config.roi_gain, self.config.roi_margin);
        self.track.push(OutputPacket {
            state: mean,
            t_us: job.t_us,
            seq: self.seq,
        });
        let u0 = resample_offset(self.config.seed, self.seq, self.config.n);
        self.population = systematic_resample(&population, u0)?;
        self.seq += 1;
        self.costs.push(job.cost);
        Ok(())
    }

    fn into_output(mut self) -> SimOutput {
        self.stats.updates_total = self.seq;
        let waits = vec![Duration(0); self.costs.len()];
        self.stats
            .summarize_cycles(&self.costs, &waits, &self.costs);
        SimOutput {
            track: self.track,
            stats: self.stats,
        }
    }
}

/// Runs the sequential baseline over the whole stream.
pub fn run_cpu_baseline(config: &SimConfig, events: &[Event]) -> Result<SimOutput, SimError> {
    validate_input(config, events)?;
    let mut cpu = CpuFilter::new(config);
    for &e in events {
        cpu.on_event(e)?;
    }
    cpu.complete_before(None)?;
    Ok(cpu.into_output())
}
