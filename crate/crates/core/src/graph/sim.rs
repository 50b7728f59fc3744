use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::particle::{CycleTiming, ParticleAction, ParticleVertex};
use super::{
    distribute_event, roi_filter_step, validate_input, Destination, Duration, FilterDecision,
    OutputPacket, Packet, Payload, SimConfig, SimOutput, SimStats, SimTime, VertexId, VertexKind,
    LEADER,
};
use crate::error::SimError;
use crate::event::Event;
use crate::filter::RoiSpec;

/// Total order on queue entries: delivery time, then source layer, then a
/// stream ordinal, then source index, then insertion order.
///
/// Event packets carry the event's arrival ordinal so that events with equal
/// timestamps keep stream order across filters; other packets use a
/// per-source counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    time: SimTime,
    rank: u8,
    ordinal: u64,
    src: usize,
    insertion: u64,
}

const RANK_SENSOR: u8 = 0;

fn rank(kind: VertexKind) -> u8 {
    match kind {
        VertexKind::Input => 1,
        VertexKind::Filter => 2,
        VertexKind::Particle => 3,
        VertexKind::Output => 4,
    }
}

#[derive(Debug)]
enum Work {
    /// Sensor event `index` arrives at the input vertex.
    Inject(usize),
    Deliver(Packet, u64),
    /// A particle finished computing and puts its state on the fabric.
    Send(ParticleAction),
}

struct Entry {
    key: Key,
    work: Work,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key)
    }
}

struct FilterVertex {
    roi: RoiSpec,
    roi_seq: Option<u64>,
}

struct GraphSim<'a> {
    config: &'a SimConfig,
    events: &'a [Event],
    queue: BinaryHeap<Entry>,
    insertion: u64,
    counters: Vec<u64>,
    filters: Vec<FilterVertex>,
    particles: Vec<ParticleVertex>,
    fabric_free: SimTime,
    t_event_hop: Duration,
    t_particle_hop: Duration,
    arrivals: u64,
    track: Vec<OutputPacket>,
    stats: SimStats,
}

impl<'a> GraphSim<'a> {
    fn new(config: &'a SimConfig, events: &'a [Event]) -> Self {
        let roi = RoiSpec::whole_frame(config.geometry);
        Self {
            config,
            events,
            queue: BinaryHeap::new(),
            insertion: 0,
            counters: vec![0; config.n],
            filters: (0..config.h)
                .map(|_| FilterVertex { roi, roi_seq: None })
                .collect(),
            particles: (0..config.n)
                .map(|i| ParticleVertex::new(i, config))
                .collect(),
            fabric_free: SimTime::default(),
            t_event_hop: Duration::from_us_f64(config.latency.t_event_hop),
            t_particle_hop: Duration::from_us_f64(config.latency.t_particle_hop),
            arrivals: 0,
            track: Vec::new(),
            stats: SimStats::default(),
        }
    }

    fn push(&mut self, time: SimTime, rank: u8, ordinal: u64, src: usize, work: Work) {
        let key = Key {
            time,
            rank,
            ordinal,
            src,
            insertion: self.insertion,
        };
        self.insertion += 1;
        self.queue.push(Entry { key, work });
    }

    fn send(
        &mut self,
        src: VertexId,
        dst: Destination,
        payload: Payload,
        now: SimTime,
        deliver: SimTime,
        ordinal: u64,
    ) {
        let packet = Packet {
            payload,
            src,
            dst,
            send_time: now,
            deliver_time: deliver,
        };
        self.push(
            deliver,
            rank(src.kind),
            ordinal,
            src.index,
            Work::Deliver(packet, ordinal),
        );
    }

    fn next_particle_ordinal(&mut self, index: usize) -> u64 {
        let c = self.counters[index];
        self.counters[index] += 1;
        c
    }

    fn run(mut self) -> Result<SimOutput, SimError> {
        for (i, e) in self.events.iter().enumerate() {
            self.push(
                SimTime::from_us(e.t),
                RANK_SENSOR,
                i as u64,
                0,
                Work::Inject(i),
            );
        }

        let mut clock = SimTime::default();
        while let Some(Entry { key, work }) = self.queue.pop() {
            if key.time < clock {
                return Err(SimError::Config(format!(
                    "simulated clock went backwards: {:?} after {:?}",
                    key.time, clock
                )));
            }
            clock = key.time;
            match work {
                Work::Inject(i) => self.on_inject(clock, i),
                Work::Deliver(packet, ordinal) => self.on_deliver(clock, packet, ordinal)?,
                Work::Send(action) => self.on_send(clock, action),
            }
        }
        Ok(self.finish())
    }

    fn on_inject(&mut self, now: SimTime, index: usize) {
        let e = self.events[index];
        self.stats.events_in += 1;
        let filter = distribute_event(self.arrivals, self.config.h);
        self.arrivals += 1;
        self.send(
            VertexId::INPUT,
            Destination::Vertex(VertexId::filter(filter)),
            Payload::Event(e),
            now,
            now.after(self.t_event_hop),
            index as u64,
        );
    }

    fn on_deliver(&mut self, now: SimTime, packet: Packet, ordinal: u64) -> Result<(), SimError> {
        match (packet.dst, packet.payload) {
            (
                Destination::Vertex(VertexId {
                    kind: VertexKind::Filter,
                    index,
                }),
                Payload::Event(e),
            ) => match roi_filter_step(&self.filters[index].roi, &e) {
                FilterDecision::Forward => self.send(
                    VertexId::filter(index),
                    Destination::AllParticles,
                    Payload::Event(e),
                    now,
                    now.after(self.t_event_hop),
                    ordinal,
                ),
                FilterDecision::Drop => self.stats.events_dropped_roi += 1,
            },
            (Destination::AllParticles, Payload::Event(e)) => {
                self.stats.event_deliveries += self.config.n as u64;
                for i in 0..self.config.n {
                    if let Some(action) = self.particles[i].on_event(now, e) {
                        self.schedule(now, i, action);
                    }
                }
            }
            (
                Destination::AllParticles,
                Payload::StateWeight {
                    sender,
                    state,
                    weight,
                    seq,
                },
            ) => {
                self.stats.packets_state += self.config.n as u64;
                for i in 0..self.config.n {
                    let actions = self.particles[i].on_state(now, sender, state, weight, seq)?;
                    for action in actions {
                        self.schedule(now, i, action);
                    }
                }
            }
            (Destination::AllFilters, Payload::RoiUpdate { roi, seq }) => {
                self.stats.packets_roi += self.config.h as u64;
                for f in &mut self.filters {
                    if f.roi_seq.is_none_or(|s| seq > s) {
                        f.roi = roi;
                        f.roi_seq = Some(seq);
                    }
                }
            }
            (
                Destination::Vertex(VertexId {
                    kind: VertexKind::Output,
                    ..
                }),
                Payload::Output(out),
            ) => {
                self.stats.packets_output += 1;
                self.track.push(out);
            }
            (dst, payload) => {
                return Err(SimError::Config(format!(
                    "misrouted packet {payload:?} to {dst:?}"
                )));
            }
        }
        Ok(())
    }

    fn schedule(&mut self, now: SimTime, particle: usize, action: ParticleAction) {
        let src = VertexId::particle(particle);
        let ordinal = self.next_particle_ordinal(particle);
        match action {
            ParticleAction::Broadcast { send_time, .. } => {
                self.push(
                    send_time,
                    rank(VertexKind::Particle),
                    ordinal,
                    particle,
                    Work::Send(action),
                );
            }
            ParticleAction::Roi { roi, seq } => {
                self.send(
                    src,
                    Destination::AllFilters,
                    Payload::RoiUpdate { roi, seq },
                    now,
                    now.after(self.t_event_hop),
                    ordinal,
                );
            }
            ParticleAction::Output(out) => {
                self.send(
                    src,
                    Destination::Vertex(VertexId::OUTPUT),
                    Payload::Output(out),
                    now,
                    now.after(self.t_event_hop),
                    ordinal,
                );
            }
        }
    }

    /// State packets share one fabric; each occupies it for one hop time.
    fn on_send(&mut self, now: SimTime, action: ParticleAction) {
        let ParticleAction::Broadcast {
            sender,
            state,
            weight,
            seq,
            ..
        } = action
        else {
            unreachable!("only broadcasts are deferred");
        };
        let start = now.max(self.fabric_free);
        let deliver = start.after(self.t_particle_hop);
        self.fabric_free = deliver;
        let ordinal = self.next_particle_ordinal(sender);
        self.send(
            VertexId::particle(sender),
            Destination::AllParticles,
            Payload::StateWeight {
                sender,
                state,
                weight,
                seq,
            },
            now,
            deliver,
            ordinal,
        );
    }

    fn finish(mut self) -> SimOutput {
        let leader = &self.particles[LEADER];
        let cycles: Vec<CycleTiming> = leader.cycles.clone();
        self.stats.updates_total = cycles.len() as u64;
        self.stats.stale_state_packets = self.particles.iter().map(|p| p.stale).sum();
        self.stats.barrier_releases = self.particles.iter().map(|p| p.releases).sum();
        let span = |a: SimTime, b: SimTime| Duration(b.0 - a.0);
        let periods: Vec<Duration> = cycles.iter().map(|c| span(c.trigger, c.release)).collect();
        let waits: Vec<Duration> = cycles.iter().map(|c| span(c.send, c.release)).collect();
        let computes: Vec<Duration> = cycles.iter().map(|c| span(c.trigger, c.send)).collect();
        self.stats.summarize_cycles(&periods, &waits, &computes);
        SimOutput {
            track: self.track,
            stats: self.stats,
        }
    }
}

/// Runs the vertex-graph simulation to completion.
pub fn run_simulation(config: &SimConfig, events: &[Event]) -> Result<SimOutput, SimError> {
    validate_input(config, events)?;
    GraphSim::new(config, events).run()
}
