//! The particle-filter network as a deterministic discrete-event simulation.
//!
//! ```text
//!   sensor ──▶ input ──▶ filter[0..h] ──▶ particle[0..n] ◀──▶ particle[0..n]
//!                          ▲                  │ (leader = particle 0)
//!                          └──── ROI update ──┤
//!                                             └──▶ output
//! ```
//!
//! Events reach the input vertex at their timestamps and are dealt
//! round-robin to the ROI filters. A filter forwards an event to every
//! particle when it falls inside the current ROI. Particles score the newest
//! events every `q_trigger` events, exchange `(state, weight)` with all
//! peers, and wait at a barrier until all `n` entries for the update are in.
//! Each particle then resamples locally; since all of them see the same table
//! and the same offset, they agree without a central resampler. The leader
//! also publishes the new ROI and the mean state.
//!
//! Time is kept in integer nanoseconds so latency sums are exact.

mod cpu;
mod particle;
mod sim;

use std::fmt;
use std::str::FromStr;

pub use cpu::run_cpu_baseline;
pub use particle::{ParticleAction, ParticleVertex};
pub use sim::run_simulation;

use crate::error::SimError;
use crate::event::{Event, SensorGeometry};
use crate::filter::{FilterParams, ParticleState, Prior, RoiSpec};

/// Simulated time in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub fn from_us(us: u64) -> Self {
        SimTime(us * 1000)
    }

    pub fn as_us(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn after(self, delay: Duration) -> Self {
        SimTime(self.0 + delay.0)
    }
}

/// Non-negative simulated delay in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Duration(pub u64);

impl Duration {
    pub fn from_us_f64(us: f64) -> Self {
        Duration((us * 1000.0).round() as u64)
    }

    pub fn times(self, k: usize) -> Self {
        Duration(self.0 * k as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKind {
    Input,
    Filter,
    Particle,
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId {
    pub kind: VertexKind,
    pub index: usize,
}

impl VertexId {
    pub const INPUT: VertexId = VertexId {
        kind: VertexKind::Input,
        index: 0,
    };
    pub const OUTPUT: VertexId = VertexId {
        kind: VertexKind::Output,
        index: 0,
    };

    pub fn filter(index: usize) -> Self {
        VertexId {
            kind: VertexKind::Filter,
            index,
        }
    }

    pub fn particle(index: usize) -> Self {
        VertexId {
            kind: VertexKind::Particle,
            index,
        }
    }
}

/// Mean state published by the leader after an update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputPacket {
    pub state: ParticleState,
    /// Timestamp of the event that triggered the update, µs.
    pub t_us: u64,
    pub seq: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payload {
    Event(Event),
    StateWeight {
        sender: usize,
        state: ParticleState,
        /// Unnormalized weight (the likelihood value).
        weight: f64,
        seq: u64,
    },
    RoiUpdate {
        roi: RoiSpec,
        seq: u64,
    },
    Output(OutputPacket),
}

/// Where a packet goes. Broadcasts on the particle or filter layer are
/// multicast: one packet, one delivery per member of the layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Destination {
    Vertex(VertexId),
    AllParticles,
    AllFilters,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub payload: Payload,
    pub src: VertexId,
    pub dst: Destination,
    pub send_time: SimTime,
    pub deliver_time: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    InputToFilter,
    FilterToParticle,
    ParticleToParticle,
    LeaderToFilter,
    LeaderToOutput,
}

/// Connectivity of the network. Edges are enumerated lazily; the full
/// particle mesh at scale has hundreds of thousands of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Topology {
    pub h: usize,
    pub n: usize,
}

pub const LEADER: usize = 0;

impl Topology {
    pub fn input_filter_edges(&self) -> usize {
        self.h
    }

    pub fn filter_particle_edges(&self) -> usize {
        self.h * self.n
    }

    /// Includes the self-edge of every particle.
    pub fn particle_particle_edges(&self) -> usize {
        self.n * self.n
    }

    pub fn leader_edges(&self) -> usize {
        self.h + 1
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, EdgeKind)> + '_ {
        let (h, n) = (self.h, self.n);
        let input = (0..h).map(|f| {
            (
                VertexId::INPUT,
                VertexId::filter(f),
                EdgeKind::InputToFilter,
            )
        });
        let filters = (0..h).flat_map(move |f| {
            (0..n).map(move |p| {
                (
                    VertexId::filter(f),
                    VertexId::particle(p),
                    EdgeKind::FilterToParticle,
                )
            })
        });
        let mesh = (0..n).flat_map(move |a| {
            (0..n).map(move |b| {
                (
                    VertexId::particle(a),
                    VertexId::particle(b),
                    EdgeKind::ParticleToParticle,
                )
            })
        });
        let leader = (0..h)
            .map(|f| {
                (
                    VertexId::particle(LEADER),
                    VertexId::filter(f),
                    EdgeKind::LeaderToFilter,
                )
            })
            .chain(std::iter::once((
                VertexId::particle(LEADER),
                VertexId::OUTPUT,
                EdgeKind::LeaderToOutput,
            )));
        input.chain(filters).chain(mesh).chain(leader)
    }
}

pub fn build_topology(h: usize, n: usize) -> Result<Topology, SimError> {
    if h == 0 || n == 0 {
        return Err(SimError::Topology { h, n });
    }
    Ok(Topology { h, n })
}

/// Round-robin assignment of the `seq`-th arriving event to a filter.
pub fn distribute_event(seq: u64, h: usize) -> usize {
    (seq % h as u64) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterDecision {
    Forward,
    Drop,
}

pub fn roi_filter_step(roi: &RoiSpec, e: &Event) -> FilterDecision {
    if roi.contains(e) {
        FilterDecision::Forward
    } else {
        FilterDecision::Drop
    }
}

/// Timing constants, all in µs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencyModel {
    /// Fabric time taken by one state/weight packet.
    pub t_particle_hop: f64,
    /// One event/ROI/output packet hop.
    pub t_event_hop: f64,
    /// Compute per scored event.
    pub t_score_per_event: f64,
    /// Per-particle bookkeeping in the sequential baseline.
    pub t_cpu_overhead: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            t_particle_hop: 4.6,
            t_event_hop: 1.0,
            t_score_per_event: 0.2,
            t_cpu_overhead: 1.0,
        }
    }
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self {
            t_particle_hop: 0.0,
            t_event_hop: 0.0,
            t_score_per_event: 0.0,
            t_cpu_overhead: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("t_particle_hop", self.t_particle_hop),
            ("t_event_hop", self.t_event_hop),
            ("t_score_per_event", self.t_score_per_event),
            ("t_cpu_overhead", self.t_cpu_overhead),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Graph,
    Cpu,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graph" => Ok(Mode::Graph),
            "cpu" => Ok(Mode::Cpu),
            other => Err(format!("unknown mode '{other}' (expected graph or cpu)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Graph => "graph",
            Mode::Cpu => "cpu",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub h: usize,
    pub filter: FilterParams,
    pub latency: LatencyModel,
    pub geometry: SensorGeometry,
    pub seed: u64,
    pub prior: Prior,
    pub mode: Mode,
    pub roi_gain: f64,
    pub roi_margin: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            h: 8,
            filter: FilterParams::default(),
            latency: LatencyModel::default(),
            geometry: SensorGeometry::default(),
            seed: 0,
            prior: Prior::Uniform,
            mode: Mode::Graph,
            roi_gain: 2.0,
            roi_margin: 10.0,
        }
    }
}

impl SimConfig {
    /// The (n, h) pair used for full-board scaling runs.
    pub fn board_scale() -> Self {
        Self {
            n: 500,
            h: 240,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        build_topology(self.h, self.n)?;
        self.filter.validate()?;
        self.latency.validate()?;
        if !(self.roi_gain > 0.0 && self.roi_gain.is_finite()) {
            return Err(SimError::Config(format!(
                "roi_gain must be > 0, got {}",
                self.roi_gain
            )));
        }
        if !(self.roi_margin >= 0.0 && self.roi_margin.is_finite()) {
            return Err(SimError::Config(format!(
                "roi_margin must be >= 0, got {}",
                self.roi_margin
            )));
        }
        if let Prior::Around { spread, .. } = self.prior {
            if !(spread >= 0.0 && spread.is_finite()) {
                return Err(SimError::Config(format!(
                    "prior spread must be >= 0, got {spread}"
                )));
            }
        }
        Ok(())
    }

    /// Runs the configured mode.
    pub fn run(&self, events: &[Event]) -> Result<SimOutput, SimError> {
        match self.mode {
            Mode::Graph => run_simulation(self, events),
            Mode::Cpu => run_cpu_baseline(self, events),
        }
    }
}

/// Counters and timing summary of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimStats {
    pub updates_total: u64,
    pub events_in: u64,
    pub events_dropped_roi: u64,
    /// Per-receiver deliveries of state/weight packets (self included).
    pub packets_state: u64,
    /// Per-filter deliveries of ROI updates.
    pub packets_roi: u64,
    pub packets_output: u64,
    /// Per-particle deliveries of forwarded events.
    pub event_deliveries: u64,
    pub stale_state_packets: u64,
    /// Barrier releases summed over all particles.
    pub barrier_releases: u64,
    /// Mean modeled cycle time of one update, trigger to barrier release.
    pub mean_update_period_us: f64,
    pub p99_update_period_us: f64,
    pub modeled_update_rate_hz: f64,
    pub barrier_wait_us_mean: f64,
    pub compute_us_mean: f64,
}

impl SimStats {
    /// Flat `key=value` block, one entry per line.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        put("updates_total", self.updates_total.to_string());
        put("events_in", self.events_in.to_string());
        put("events_dropped_roi", self.events_dropped_roi.to_string());
        put("packets_state", self.packets_state.to_string());
        put(
            "mean_update_period_us",
            format!("{:.3}", self.mean_update_period_us),
        );
        put(
            "p99_update_period_us",
            format!("{:.3}", self.p99_update_period_us),
        );
        put(
            "modeled_update_rate_hz",
            format!("{:.3}", self.modeled_update_rate_hz),
        );
        put(
            "barrier_wait_us_mean",
            format!("{:.3}", self.barrier_wait_us_mean),
        );
        put("packets_roi", self.packets_roi.to_string());
        put("packets_output", self.packets_output.to_string());
        put("event_deliveries", self.event_deliveries.to_string());
        put("stale_state_packets", self.stale_state_packets.to_string());
        put("barrier_releases", self.barrier_releases.to_string());
        put("compute_us_mean", format!("{:.3}", self.compute_us_mean));
        out
    }

    pub(crate) fn summarize_cycles(
        &mut self,
        cycles: &[Duration],
        waits: &[Duration],
        computes: &[Duration],
    ) {
        let mean = |v: &[Duration]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().map(|d| d.0 as f64).sum::<f64>() / v.len() as f64 / 1000.0
            }
        };
        self.mean_update_period_us = mean(cycles);
        self.barrier_wait_us_mean = mean(waits);
        self.compute_us_mean = mean(computes);
        self.p99_update_period_us = percentile_us(cycles, 0.99);
        self.modeled_update_rate_hz = if self.mean_update_period_us > 0.0 {
            1e6 / self.mean_update_period_us
        } else {
            0.0
        };
    }
}

/// Nearest-rank percentile.
fn percentile_us(values: &[Duration], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted: Vec<u64> = values.iter().map(|d| d.0).collect();
    sorted.sort_unstable();
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as f64 / 1000.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub track: Vec<OutputPacket>,
    pub stats: SimStats,
}

pub(crate) fn validate_input(config: &SimConfig, events: &[Event]) -> Result<(), SimError> {
    config.validate()?;
    for (i, e) in events.iter().enumerate() {
        if !config.geometry.contains(e.x, e.y) {
            return Err(SimError::OutOfBounds { index: i });
        }
        if i > 0 && e.t < events[i - 1].t {
            return Err(SimError::UnorderedInput { index: i });
        }
    }
    Ok(())
}
