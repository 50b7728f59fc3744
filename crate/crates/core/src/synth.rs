//! Synthetic moving-circle event streams with ground truth.
//!
//! Contour events follow a Poisson process whose rate is proportional to the
//! current circumference (`event_rate × 2πr`). Each one lands at a uniform
//! angle, displaced radially by normal jitter of width `contour_sigma`, and is
//! rounded to the nearest pixel. Clutter is a homogeneous Poisson process over
//! the whole frame. Between trajectory samples the circle is linearly
//! interpolated.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::EventError;
use crate::event::{merge_streams, Event, GroundTruthSample, Polarity, SensorGeometry};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    /// Contour events per pixel of circumference per second.
    pub event_rate: f64,
    /// Radial jitter of contour events, pixels.
    pub contour_sigma: f64,
    /// Frame-wide clutter events per second.
    pub clutter_rate: f64,
    pub geometry: SensorGeometry,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            event_rate: 100.0,
            contour_sigma: 0.5,
            clutter_rate: 1000.0,
            geometry: SensorGeometry::default(),
            seed: 0,
        }
    }
}

/// Linearly interpolated circle at time `t` (µs). `None` outside the span.
pub fn interpolate_truth(truth: &[GroundTruthSample], t: f64) -> Option<GroundTruthSample> {
    let first = truth.first()?;
    let last = truth.last()?;
    if t < first.t as f64 || t > last.t as f64 {
        return None;
    }
    // First sample strictly after t; the bracket is [idx-1, idx].
    let idx = truth.partition_point(|s| (s.t as f64) <= t);
    if idx == truth.len() {
        return Some(GroundTruthSample {
            t: t as u64,
            ..*last
        });
    }
    let (a, b) = (truth[idx - 1], truth[idx]);
    let span = (b.t - a.t) as f64;
    let alpha = if span > 0.0 {
        (t - a.t as f64) / span
    } else {
        1.0
    };
    let lerp = |u: f64, v: f64| u + (v - u) * alpha;
    Some(GroundTruthSample {
        t: t as u64,
        cx: lerp(a.cx, b.cx),
        cy: lerp(a.cy, b.cy),
        r: lerp(a.r, b.r),
    })
}

pub fn generate_circle_events(
    trajectory: &[GroundTruthSample],
    params: &GeneratorParams,
) -> Result<(Vec<Event>, Vec<GroundTruthSample>), EventError> {
    let (first, last) = match (trajectory.first(), trajectory.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(EventError::Generator("trajectory is empty".into())),
    };
    if let Some(w) = trajectory.windows(2).find(|w| w[1].t < w[0].t) {
        return Err(EventError::Generator(format!(
            "trajectory time decreases from {} to {}",
            w[0].t, w[1].t
        )));
    }
    if trajectory.iter().any(|s| !(s.r > 0.0)) {
        return Err(EventError::Generator(
            "trajectory radius must be positive".into(),
        ));
    }
    for (name, v) in [
        ("event_rate", params.event_rate),
        ("contour_sigma", params.contour_sigma),
        ("clutter_rate", params.clutter_rate),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(EventError::Generator(format!(
                "{name} must be finite and >= 0, got {v}"
            )));
        }
    }

    let t0 = first.t as f64;
    let t_end = last.t as f64;
    let contour = contour_events(trajectory, params, t0, t_end);
    let clutter = clutter_events(params, t0, t_end);
    Ok((merge_streams(&contour, &clutter), trajectory.to_vec()))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_polarity(rng: &mut ChaCha8Rng) -> Polarity {
    if rng.random::<bool>() {
        Polarity::Increase
    } else {
        Polarity::Decrease
    }
}

fn contour_events(
    trajectory: &[GroundTruthSample],
    params: &GeneratorParams,
    t0: f64,
    t_end: f64,
) -> Vec<Event> {
    let r_peak = trajectory.iter().map(|s| s.r).fold(0.0, f64::max);
    // Peak rate in events per µs; thinning by r(t)/r_peak gives the exact
    // time-varying process.
    let peak_rate = params.event_rate * TAU * r_peak / 1e6;
    if peak_rate <= 0.0 || t_end <= t0 {
        return Vec::new();
    }
    let mut rng = stream_rng(params.seed, 0);
    let gap = Exp::new(peak_rate).expect("positive rate");
    let jitter = Normal::new(0.0, params.contour_sigma).expect("finite sigma");
    let geo = params.geometry;

    let mut out = Vec::new();
    let mut t = t0;
    loop {
        t += gap.sample(&mut rng);
        if t >= t_end {
            break;
        }
        let t_us = t.floor() as u64;
        let truth = interpolate_truth(trajectory, t_us as f64).expect("inside span");
        let accept: f64 = rng.random();
        if accept * r_peak > truth.r {
            continue;
        }
        let theta = rng.random::<f64>() * TAU;
        let d = truth.r + jitter.sample(&mut rng);
        let x = clip_pixel(truth.cx + d * theta.cos(), geo.width);
        let y = clip_pixel(truth.cy + d * theta.sin(), geo.height);
        out.push(Event::new(t_us, x, y, random_polarity(&mut rng)));
    }
    out
}

fn clutter_events(params: &GeneratorParams, t0: f64, t_end: f64) -> Vec<Event> {
    let rate = params.clutter_rate / 1e6;
    if rate <= 0.0 || t_end <= t0 {
        return Vec::new();
    }
    let mut rng = stream_rng(params.seed, 1);
    let gap = Exp::new(rate).expect("positive rate");
    let geo = params.geometry;
    let mut out = Vec::new();
    let mut t = t0;
    loop {
        t += gap.sample(&mut rng);
        if t >= t_end {
            break;
        }
        let x = rng.random_range(0..geo.width);
        let y = rng.random_range(0..geo.height);
        out.push(Event::new(
            t.floor() as u64,
            x,
            y,
            random_polarity(&mut rng),
        ));
    }
    out
}

fn clip_pixel(v: f64, extent: u16) -> u16 {
    v.round().clamp(0.0, f64::from(extent - 1)) as u16
}

/// Built-in trajectories sampled every `step_us`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trajectory {
    Static {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// Constant velocity in px/s.
    Linear {
        x0: f64,
        y0: f64,
        vx: f64,
        vy: f64,
        r: f64,
    },
    /// Constant linear `speed` (px/s) around a circle of radius `orbit`.
    CircleOrbit {
        cx: f64,
        cy: f64,
        orbit: f64,
        speed: f64,
        r: f64,
    },
}

impl Trajectory {
    pub fn position(&self, t_s: f64) -> (f64, f64, f64) {
        match *self {
            Trajectory::Static { cx, cy, r } => (cx, cy, r),
            Trajectory::Linear { x0, y0, vx, vy, r } => (x0 + vx * t_s, y0 + vy * t_s, r),
            Trajectory::CircleOrbit {
                cx,
                cy,
                orbit,
                speed,
                r,
            } => {
                let phase = if orbit > 0.0 {
                    speed * t_s / orbit
                } else {
                    0.0
                };
                (cx + orbit * phase.cos(), cy + orbit * phase.sin(), r)
            }
        }
    }

    pub fn sample(&self, duration_us: u64, step_us: u64) -> Vec<GroundTruthSample> {
        let step = step_us.max(1);
        let mut out = Vec::with_capacity((duration_us / step + 2) as usize);
        let mut t = 0;
        loop {
            let (cx, cy, r) = self.position(t as f64 / 1e6);
            out.push(GroundTruthSample { t, cx, cy, r });
            if t >= duration_us {
                break;
            }
            t = (t + step).min(duration_us);
        }
        out
    }
}
