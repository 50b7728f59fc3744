//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use evtrack_cli::bench_stream;
use evtrack_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn orbit_scene(
    clutter_rate: f64,
    event_rate: f64,
    dur_ms: u64,
    seed: u64,
) -> (Vec<Event>, Vec<GroundTruthSample>) {
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
        clutter_rate,
        seed,
        ..Default::default()
    };
    generate_circle_events(&truth, &params).unwrap()
}

fn conservation(cfg: &SimConfig, s: &SimStats) -> Result<(), String> {
    let (n, h, u) = (cfg.n as u64, cfg.h as u64, s.updates_total);
    let ok = s.packets_state == u * n * n
        && s.packets_roi == u * h
        && s.packets_output == u
        && s.barrier_releases == u * n
        && s.event_deliveries == (s.events_in - s.events_dropped_roi) * n;
    if ok {
        Ok(())
    } else {
        Err(format!("n={n} h={h} updates={u}: {s:?}"))
    }
}

/// Modeled rate at n = 200 on a stream with at least 50k in-ROI events/s.
fn modeled_rate() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (dur_ms, event_rate) = (500, 600.0);
    let started = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_evtrack"))
        .args([
            "bench",
            "--n",
            "200",
            "--dur-ms",
            "500",
            "--event-rate",
            "600",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let csv = std::fs::read_to_string(dir.path().join("scaling.csv")).map_err(|e| e.to_string())?;
    let rate: f64 = csv
        .lines()
        .find(|l| l.starts_with("200,graph,"))
        .and_then(|l| l.split(',').nth(2))
        .and_then(|v| v.parse().ok())
        .ok_or("no graph row for n=200")?;

    let events = bench_stream(dur_ms, event_rate, 0).map_err(|e| e.to_string())?;
    let out = run_simulation(
        &SimConfig {
            n: 200,
            ..Default::default()
        },
        &events,
    )
    .map_err(|e| e.to_string())?;
    let in_roi =
        (out.stats.events_in - out.stats.events_dropped_roi) as f64 / (dur_ms as f64 / 1000.0);
    check(
        rate >= 1000.0 && in_roi >= 50_000.0 && elapsed < Duration::from_secs(120),
        format!(
            "graph rate {rate:.1} Hz at n=200, in-ROI {in_roi:.0} ev/s, bench took {elapsed:.1?}"
        ),
    )
}

/// Graph period grows by 350 hops from n=50 to n=400; cpu period grows 8x.
fn scaling_contrast() -> Outcome {
    let events = bench_stream(300, 600.0, 1).map_err(|e| e.to_string())?;
    let report = scaling_experiment(&SimConfig::default(), &[50, 400], &events)
        .map_err(|e| e.to_string())?;
    let period = |n, mode| report.row(n, mode).map(|r| r.period_us).unwrap();
    let hop = LatencyModel::default().t_particle_hop;
    let expected = 350.0 * hop;
    let graph_diff = period(400, Mode::Graph) - period(50, Mode::Graph);
    let cpu_ratio = period(400, Mode::Cpu) / period(50, Mode::Cpu);
    check(
        (graph_diff - expected).abs() <= 0.01 * expected && (cpu_ratio - 8.0).abs() <= 0.08,
        format!("graph period delta {graph_diff:.2} us (expected {expected:.2}), cpu ratio {cpu_ratio:.4}"),
    )
}

fn orbit_errors(clutter_rate: f64) -> Result<Vec<(TrackError, Duration)>, String> {
    (0..5)
        .map(|seed| {
            let started = Instant::now();
            let (events, truth) = orbit_scene(clutter_rate, 100.0, 3000, seed);
            let cfg = SimConfig {
                n: 100,
                seed,
                ..Default::default()
            };
            let out = run_simulation(&cfg, &events).map_err(|e| e.to_string())?;
            let err = compute_tracking_error(&out.track, &truth, EvalOptions::default())
                .map_err(|e| e.to_string())?;
            Ok((err, started.elapsed()))
        })
        .collect()
}

/// Seed-averaged accuracy on the orbiting circle with 1 kHz clutter.
fn tracking_accuracy() -> Outcome {
    let runs = orbit_errors(1000.0)?;
    let mean = runs.iter().map(|(e, _)| e.mean_center_err).sum::<f64>() / runs.len() as f64;
    let lost: Vec<f64> = runs.iter().map(|(e, _)| e.lost_fraction).collect();
    let slowest = runs.iter().map(|(_, d)| *d).max().unwrap();
    check(
        mean <= 3.0 && lost.iter().all(|&l| l == 0.0) && slowest < Duration::from_secs(60),
        format!(
            "mean centre error {mean:.3} px, lost fractions {lost:?}, slowest seed {slowest:.1?}"
        ),
    )
}

/// Tripled clutter: at least 4 of 5 seeds never lose the target.
fn clutter_robustness() -> Outcome {
    let runs = orbit_errors(3000.0)?;
    let kept = runs.iter().filter(|(e, _)| e.lost_fraction == 0.0).count();
    let errs: Vec<String> = runs
        .iter()
        .map(|(e, _)| format!("{:.2}", e.mean_center_err))
        .collect();
    check(
        kept >= 4,
        format!("{kept}/5 seeds with lost_fraction 0, mean errors {errs:?}"),
    )
}

/// Doubling the contour event rate doubles the update count.
fn proportionality() -> Outcome {
    let updates = |event_rate| -> Result<u64, String> {
        let (events, _) = orbit_scene(1000.0, event_rate, 1000, 0);
        let out = run_simulation(&SimConfig::default(), &events).map_err(|e| e.to_string())?;
        Ok(out.stats.updates_total)
    };
    let (base, doubled) = (updates(100.0)?, updates(200.0)?);
    let ratio = doubled as f64 / base as f64;
    check(
        (ratio - 2.0).abs() <= 0.2,
        format!("{base} updates -> {doubled} updates, ratio {ratio:.3}"),
    )
}

/// Every prefix sum evaluated explicitly.
fn brute_force(window: &[Event], s: &ParticleState, params: &FilterParams) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 0;
    for k in 1..=window.len() {
        let sum: f64 = window[..k].iter().map(|e| event_score(e, s, params)).sum();
        if sum > best {
            best = sum;
            best_k = k;
        }
    }
    if window.is_empty() {
        return (params.eps_w, 0);
    }
    let value = (best / (2.0 * std::f64::consts::PI * s.r)).clamp(params.eps_w, 1.0);
    (value, best_k)
}

fn likelihood_oracle() -> Outcome {
    let params = FilterParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let trials = 10_000;
    for _ in 0..trials {
        let s = ParticleState::new(
            rng.random_range(20.0..80.0),
            rng.random_range(20.0..80.0),
            rng.random_range(10.0..30.0),
        );
        let len = rng.random_range(0..=params.w_max);
        let window: Vec<Event> = (0..len)
            .map(|i| {
                let (x, y) = if rng.random_bool(0.6) {
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    let d = s.r + rng.random_range(-3.0..3.0);
                    ((s.x + d * a.cos()).round(), (s.y + d * a.sin()).round())
                } else {
                    (
                        rng.random_range(0.0..100.0f64).floor(),
                        rng.random_range(0.0..100.0f64).floor(),
                    )
                };
                Event::new(
                    1_000_000 - i as u64,
                    x.max(0.0) as u16,
                    y.max(0.0) as u16,
                    Polarity::Increase,
                )
            })
            .collect();
        let got = incremental_likelihood(window.iter(), &s, &params);
        if (got.value, got.best_k) != brute_force(&window, &s, &params) {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over {trials} random windows"),
    )
}

fn resampling() -> Outcome {
    let weights = [0.05, 0.3, 0.0, 0.125, 0.2, 0.325];
    let n = weights.len();
    let population: Vec<Particle> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| Particle::new(ParticleState::new(i as f64, 0.0, 10.0), w))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 10_000;
    let mut counts = vec![0u64; n];
    for _ in 0..trials {
        let u0 = rng.random_range(0.0..1.0 / n as f64);
        for p in systematic_resample(&population, u0).map_err(|e| e.to_string())? {
            counts[p.state.x as usize] += 1;
        }
    }
    let mut worst: f64 = 0.0;
    let mut within = true;
    for (i, &w) in weights.iter().enumerate() {
        // Per trial the copy count is floor(n w) or one more; its variance
        // is f (1 - f) with f the fractional part of n w.
        let f = (n as f64 * w).fract();
        let se = (f * (1.0 - f) / trials as f64).sqrt() / n as f64;
        let freq = counts[i] as f64 / (trials * n as u64) as f64;
        let dev = (freq - w).abs();
        if se == 0.0 {
            within &= dev < 1e-12;
        } else {
            within &= dev <= 3.0 * se;
            worst = worst.max(dev / se);
        }
    }

    let point: Vec<Particle> = (0..4)
        .map(|i| {
            Particle::new(
                ParticleState::new(i as f64, 0.0, 10.0),
                if i == 0 { 1.0 } else { 0.0 },
            )
        })
        .collect();
    let point_ok = systematic_resample(&point, 0.2)
        .map_err(|e| e.to_string())?
        .iter()
        .all(|p| p.state.x == 0.0);
    let uniform: Vec<Particle> = (0..8)
        .map(|i| Particle::new(ParticleState::new(i as f64, 0.0, 10.0), 1.0 / 8.0))
        .collect();
    let identity_ok = systematic_indices(&[0.125; 8], 8, 0.0).map_err(|e| e.to_string())?
        == (0..8).collect::<Vec<_>>()
        && systematic_resample(&uniform, 0.0).map_err(|e| e.to_string())? == uniform;
    check(
        within && point_ok && identity_ok,
        format!("worst deviation {worst:.2} SE over {trials} trials, point mass {point_ok}, identity {identity_ok}"),
    )
}

fn determinism() -> Outcome {
    let (events, _) = orbit_scene(1000.0, 100.0, 500, 42);
    let csv = |cfg: &SimConfig| -> Result<Vec<u8>, String> {
        let out = cfg.run(&events).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_track(&out.track, &mut buf).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let cfg = SimConfig {
        seed: 42,
        ..Default::default()
    };
    let repeat = csv(&cfg)? == csv(&cfg)?;
    let zero = SimConfig {
        n: 1,
        seed: 42,
        latency: LatencyModel::zero(),
        ..Default::default()
    };
    let graph = csv(&zero)?;
    let cpu = csv(&SimConfig {
        mode: Mode::Cpu,
        ..zero.clone()
    })?;
    let equivalent = graph == cpu && graph.len() > "t_us,x,y,r\n".len();
    check(
        repeat && equivalent,
        format!("repeat run identical {repeat}, n=1 graph == cpu {equivalent}"),
    )
}

fn packet_conservation() -> Outcome {
    let (events, _) = orbit_scene(2000.0, 120.0, 300, 3);
    let mut runs = 0;
    for (n, h) in [(1, 1), (2, 8), (10, 3), (100, 8), (200, 16)] {
        for latency in [LatencyModel::default(), LatencyModel::zero()] {
            let cfg = SimConfig {
                n,
                h,
                latency,
                seed: 3,
                ..Default::default()
            };
            let out = run_simulation(&cfg, &events).map_err(|e| e.to_string())?;
            if out.stats.updates_total == 0 {
                return Err(format!("n={n} h={h}: no updates"));
            }
            conservation(&cfg, &out.stats)?;
            runs += 1;
        }
    }
    check(
        true,
        format!("n^2 state / h ROI / 1 output per update on {runs} runs"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("modeled update rate", modeled_rate),
        ("scaling contrast", scaling_contrast),
        ("tracking accuracy", tracking_accuracy),
        ("clutter robustness", clutter_robustness),
        ("event-driven proportionality", proportionality),
        ("likelihood oracle", likelihood_oracle),
        ("resampling correctness", resampling),
        ("determinism and mode equivalence", determinism),
        ("packet conservation", packet_conservation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {} [{tag}] {name}: {detail} ({:.1?})",
            i + 1,
            started.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
