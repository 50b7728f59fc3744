//! Shared fixtures for the benches and the hop-latency sweep.

use evtrack_core::{
    generate_circle_events, scaling_experiment, Event, GeneratorParams, LatencyModel, MetricsError,
    Mode, Particle, ParticleState, Polarity, SimConfig, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Circle orbiting the frame centre, r = 15, 100 px/s.
pub fn orbit_stream(dur_ms: u64, event_rate: f64, seed: u64) -> Vec<Event> {
    let truth = Trajectory::CircleOrbit {
        cx: 152.0,
        cy: 120.0,
        orbit: 50.0,
        speed: 100.0,
        r: 15.0,
    }
    .sample(dur_ms * 1000, 1000);
    let params = GeneratorParams {
        event_rate,
        seed,
        ..Default::default()
    };
    generate_circle_events(&truth, &params)
        .expect("valid trajectory")
        .0
}

/// A newest-first window of `len` events, mostly near the contour of `s`.
pub fn contour_window(s: &ParticleState, len: usize, seed: u64) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|i| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let d = s.r + rng.random_range(-2.0..2.0);
            let x = (s.x + d * a.cos()).round().max(0.0) as u16;
            let y = (s.y + d * a.sin()).round().max(0.0) as u16;
            Event::new((len - i) as u64, x, y, Polarity::Increase)
        })
        .collect()
}

/// `n` particles with random positive weights normalized to one.
pub fn weighted_population(n: usize, seed: u64) -> Vec<Particle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter()
        .enumerate()
        .map(|(i, w)| Particle::new(ParticleState::new(i as f64, 0.0, 15.0), w / total))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopRow {
    pub t_particle_hop: f64,
    pub n: usize,
    pub rate_hz: f64,
    pub period_us: f64,
}

/// Graph-mode rate for every (hop latency, n) pair on the same stream.
pub fn hop_sweep(
    hops: &[f64],
    n_values: &[usize],
    events: &[Event],
) -> Result<Vec<HopRow>, MetricsError> {
    let mut rows = Vec::new();
    for &hop in hops {
        let base = SimConfig {
            latency: LatencyModel {
                t_particle_hop: hop,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = scaling_experiment(&base, n_values, events)?;
        rows.extend(
            report
                .rows
                .iter()
                .filter(|r| r.mode == Mode::Graph)
                .map(|r| HopRow {
                    t_particle_hop: hop,
                    n: r.n,
                    rate_hz: r.rate_hz,
                    period_us: r.period_us,
                }),
        );
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use evtrack_core::contour_distance;

    #[test]
    fn population_is_normalized() {
        let pop = weighted_population(64, 1);
        let sum: f64 = pop.iter().map(|p| p.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_hugs_contour() {
        let s = ParticleState::new(60.0, 60.0, 20.0);
        let w = contour_window(&s, 300, 3);
        assert_eq!(w.len(), 300);
        assert!(w.windows(2).all(|p| p[0].t > p[1].t));
        assert!(w.iter().all(|e| contour_distance(e, &s) < 2.8));
    }

    #[test]
    fn sweep_period_tracks_hop() {
        let events = orbit_stream(100, 300.0, 0);
        let rows = hop_sweep(&[0.0, 4.6], &[50, 100], &events).unwrap();
        assert_eq!(rows.len(), 4);
        let period = |hop: f64, n| {
            rows.iter()
                .find(|r| r.t_particle_hop == hop && r.n == n)
                .unwrap()
                .period_us
        };
        // With no hop cost the period does not depend on n.
        assert!((period(0.0, 100) - period(0.0, 50)).abs() < 1.0);
        assert!((period(4.6, 100) - period(4.6, 50) - 230.0).abs() < 2.3);
    }
}
