use std::collections::{BTreeMap, VecDeque};

use rand_chacha::ChaCha8Rng;

use super::{Duration, OutputPacket, Payload, SimConfig, SimTime, LEADER};
use crate::error::SimError;
use crate::event::{Event, SensorGeometry};
use crate::filter::{
    apply_motion_model, compute_roi, incremental_likelihood, mean_state, normalize_weights,
    systematic_resample, FilterParams, Particle, ParticleState, RoiSpec,
};
use crate::streams::{particle_rng, resample_offset};

/// What a particle wants sent after handling a packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParticleAction {
    /// Share `(state, weight)` with every particle once compute is done.
    Broadcast {
        send_time: SimTime,
        sender: usize,
        state: ParticleState,
        weight: f64,
        seq: u64,
    },
    /// Leader only: new ROI for the filter layer.
    Roi { roi: RoiSpec, seq: u64 },
    /// Leader only: mean state for the output vertex.
    Output(OutputPacket),
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CycleTiming {
    pub trigger: SimTime,
    pub send: SimTime,
    pub release: SimTime,
}

/// One particle core.
///
/// Forwarded events go through a FIFO; they are moved into the scoring window
/// only while the particle is not waiting at the barrier, and every
/// `q_trigger`-th consumed event starts an update. Nothing is dropped during a
/// wait, the FIFO just grows.
#[derive(Debug)]
pub struct ParticleVertex {
    index: usize,
    n: usize,
    params: FilterParams,
    geometry: SensorGeometry,
    seed: u64,
    roi_gain: f64,
    roi_margin: f64,
    t_score: Duration,
    rng: ChaCha8Rng,
    particle: Particle,
    window: VecDeque<Event>,
    pending: VecDeque<Event>,
    since_update: usize,
    waiting: bool,
    seq: u64,
    trigger_t_us: u64,
    table: Vec<Option<(ParticleState, f64)>>,
    filled: usize,
    early: BTreeMap<u64, Vec<(usize, ParticleState, f64)>>,
    current: CycleTiming,
    pub(crate) cycles: Vec<CycleTiming>,
    pub(crate) stale: u64,
    pub(crate) releases: u64,
}

impl ParticleVertex {
    pub fn new(index: usize, config: &SimConfig) -> Self {
        let mut rng = particle_rng(config.seed, index);
        let state = config
            .prior
            .sample(&config.filter, config.geometry, &mut rng);
        Self {
            index,
            n: config.n,
            params: config.filter.clone(),
            geometry: config.geometry,
            seed: config.seed,
            roi_gain: config.roi_gain,
            roi_margin: config.roi_margin,
            t_score: Duration::from_us_f64(config.latency.t_score_per_event),
            rng,
            particle: Particle::new(state, 1.0 / config.n as f64),
            window: VecDeque::with_capacity(config.filter.w_max),
            pending: VecDeque::new(),
            since_update: 0,
            waiting: false,
            seq: 0,
            trigger_t_us: 0,
            table: vec![None; config.n],
            filled: 0,
            early: BTreeMap::new(),
            current: CycleTiming::default(),
            cycles: Vec::new(),
            stale: 0,
            releases: 0,
        }
    }

    pub fn particle(&self) -> &Particle {
        &self.particle
    }

    pub fn is_waiting(&self) -> bool {
        self.waiting
    }

    /// Index of the update this particle is currently collecting.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    fn is_leader(&self) -> bool {
        self.index == LEADER
    }

    /// Handles one incoming packet payload at simulated time `now`.
    pub fn step(
        &mut self,
        now: SimTime,
        payload: &Payload,
    ) -> Result<Vec<ParticleAction>, SimError> {
        match *payload {
            Payload::Event(e) => Ok(self.on_event(now, e).into_iter().collect()),
            Payload::StateWeight {
                sender,
                state,
                weight,
                seq,
            } => self.on_state(now, sender, state, weight, seq),
            Payload::RoiUpdate { .. } | Payload::Output(_) => Ok(Vec::new()),
        }
    }

    pub fn on_event(&mut self, now: SimTime, e: Event) -> Option<ParticleAction> {
        self.pending.push_back(e);
        self.drain(now)
    }

    fn drain(&mut self, now: SimTime) -> Option<ParticleAction> {
        while !self.waiting {
            let e = self.pending.pop_front()?;
            if self.window.len() == self.params.w_max {
                self.window.pop_front();
            }
            self.window.push_back(e);
            self.since_update += 1;
            if self.since_update == self.params.q_trigger {
                self.since_update = 0;
                return Some(self.trigger(now, e.t));
            }
        }
        None
    }

    fn trigger(&mut self, now: SimTime, t_us: u64) -> ParticleAction {
        let moved = apply_motion_model(
            &self.particle.state,
            &self.params,
            self.geometry,
            &mut self.rng,
        );
        let lik = incremental_likelihood(self.window.iter().rev(), &moved, &self.params);
        self.particle = Particle::new(moved, lik.value);
        self.waiting = true;
        self.trigger_t_us = t_us;
        let send_time = now.after(self.t_score.times(self.window.len()));
        self.current = CycleTiming {
            trigger: now,
            send: send_time,
            release: send_time,
        };
        ParticleAction::Broadcast {
            send_time,
            sender: self.index,
            state: moved,
            weight: lik.value,
            seq: self.seq,
        }
    }

    pub fn on_state(
        &mut self,
        now: SimTime,
        sender: usize,
        state: ParticleState,
        weight: f64,
        seq: u64,
    ) -> Result<Vec<ParticleAction>, SimError> {
        let duplicate = SimError::DuplicateState {
            receiver: self.index,
            sender,
            seq,
        };
        if seq < self.seq {
            self.stale += 1;
            return Ok(Vec::new());
        }
        if seq > self.seq {
            let bucket = self.early.entry(seq).or_default();
            if bucket.iter().any(|(s, _, _)| *s == sender) {
                return Err(duplicate);
            }
            bucket.push((sender, state, weight));
            return Ok(Vec::new());
        }
        if self.table[sender].is_some() {
            return Err(duplicate);
        }
        self.table[sender] = Some((state, weight));
        self.filled += 1;
        if self.filled < self.n {
            return Ok(Vec::new());
        }
        self.release(now)
    }

    fn release(&mut self, now: SimTime) -> Result<Vec<ParticleAction>, SimError> {
        let mut population: Vec<Particle> = self
            .table
            .iter()
            .map(|slot| {
                let (state, weight) = slot.expect("barrier complete");
                Particle::new(state, weight)
            })
            .collect();
        normalize_weights(&mut population, self.params.eps_w);

        let mut actions = Vec::new();
        if self.is_leader() {
            let mean = mean_state(&population)?;
            actions.push(ParticleAction::Roi {
                roi: compute_roi(&mean, self.roi_gain, self.roi_margin),
                seq: self.seq,
            });
            actions.push(ParticleAction::Output(OutputPacket {
                state: mean,
                t_us: self.trigger_t_us,
                seq: self.seq,
            }));
            self.current.release = now;
            self.cycles.push(self.current);
        }

        let u0 = resample_offset(self.seed, self.seq, self.n);
        let resampled = systematic_resample(&population, u0)?;
        self.particle = resampled[self.index];

        self.releases += 1;
        self.seq += 1;
        self.waiting = false;
        self.table.iter_mut().for_each(|slot| *slot = None);
        self.filled = 0;
        if let Some(bucket) = self.early.remove(&self.seq) {
            for (sender, state, weight) in bucket {
                self.table[sender] = Some((state, weight));
                self.filled += 1;
            }
        }

        actions.extend(self.drain(now));
        Ok(actions)
    }
}
