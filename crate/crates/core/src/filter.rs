//! Particle filter mathematics for circle tracking on an event stream.
//!
//! Each particle is a circle hypothesis `(x, y, r)`. Its likelihood is built
//! from the newest events: every event inside the contour band scores `+1`,
//! every event clearly inside the circle scores `-inner_penalty`, anything
//! else scores nothing. The running sum is scanned newest-first and the best
//! prefix wins, so the temporal window is discovered per hypothesis rather
//! than fixed. Dividing by the circumference keeps scores comparable across
//! radii.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::FilterError;
use crate::event::{Event, SensorGeometry};

/// Circle hypothesis in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ParticleState {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl ParticleState {
    pub fn new(x: f64, y: f64, r: f64) -> Self {
        Self { x, y, r }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub state: ParticleState,
    pub weight: f64,
}

impl Particle {
    pub fn new(state: ParticleState, weight: f64) -> Self {
        Self { state, weight }
    }
}

/// Circular gate applied by the ROI filter vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoiSpec {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl RoiSpec {
    /// A gate that admits every pixel of the sensor.
    pub fn whole_frame(geometry: SensorGeometry) -> Self {
        let (w, h) = (f64::from(geometry.width), f64::from(geometry.height));
        Self {
            cx: w / 2.0,
            cy: h / 2.0,
            radius: w.hypot(h),
        }
    }

    pub fn contains(&self, e: &Event) -> bool {
        (f64::from(e.x) - self.cx).hypot(f64::from(e.y) - self.cy) <= self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterParams {
    /// Motion noise on the centre, pixels.
    pub sigma_xy: f64,
    /// Motion noise on the radius, pixels.
    pub sigma_r: f64,
    /// Half-width of the contour band, pixels.
    pub band: f64,
    /// Score subtracted for each event well inside the circle.
    pub inner_penalty: f64,
    /// New events needed to trigger an update.
    pub q_trigger: usize,
    /// Longest window scored, in events.
    pub w_max: usize,
    /// Likelihood floor.
    pub eps_w: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma_xy: 5.0,
            sigma_r: 2.0,
            band: 1.5,
            inner_penalty: 0.5,
            q_trigger: 30,
            w_max: 300,
            eps_w: 1e-6,
            r_min: 10.0,
            r_max: 50.0,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), FilterError> {
        let positive = [
            ("sigma_xy", self.sigma_xy),
            ("sigma_r", self.sigma_r),
            ("band", self.band),
            ("eps_w", self.eps_w),
            ("r_min", self.r_min),
            ("r_max", self.r_max),
        ];
        for (name, v) in positive {
            // Zero motion noise is allowed for scripted runs.
            let ok = if name.starts_with("sigma") {
                v >= 0.0
            } else {
                v > 0.0
            };
            if !(ok && v.is_finite()) {
                return Err(FilterError::InvalidParams(format!("{name} = {v}")));
            }
        }
        if !(self.inner_penalty >= 0.0 && self.inner_penalty.is_finite()) {
            return Err(FilterError::InvalidParams(format!(
                "inner_penalty = {}",
                self.inner_penalty
            )));
        }
        if self.r_min > self.r_max {
            return Err(FilterError::InvalidParams(format!(
                "r_min {} exceeds r_max {}",
                self.r_min, self.r_max
            )));
        }
        if self.q_trigger == 0 || self.q_trigger > self.w_max {
            return Err(FilterError::InvalidParams(format!(
                "q_trigger {} must be in 1..={}",
                self.q_trigger, self.w_max
            )));
        }
        if self.eps_w >= 1.0 {
            return Err(FilterError::InvalidParams(format!(
                "eps_w = {}",
                self.eps_w
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodResult {
    pub value: f64,
    /// Window length (events) that maximized the score; 0 for an empty window.
    pub best_k: usize,
}

pub fn contour_distance(e: &Event, s: &ParticleState) -> f64 {
    ((f64::from(e.x) - s.x).hypot(f64::from(e.y) - s.y) - s.r).abs()
}

pub fn event_score(e: &Event, s: &ParticleState, params: &FilterParams) -> f64 {
    let d = (f64::from(e.x) - s.x).hypot(f64::from(e.y) - s.y);
    if (d - s.r).abs() <= params.band {
        1.0
    } else if d < s.r - params.band {
        -params.inner_penalty
    } else {
        0.0
    }
}

/// Scores a newest-first window in one pass.
///
/// Only the first `w_max` events are considered.
pub fn incremental_likelihood<'a, I>(
    window: I,
    s: &ParticleState,
    params: &FilterParams,
) -> LikelihoodResult
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 0;
    for (i, e) in window.into_iter().take(params.w_max).enumerate() {
        sum += event_score(e, s, params);
        if sum > best {
            best = sum;
            best_k = i + 1;
        }
    }
    if best_k == 0 {
        return LikelihoodResult {
            value: params.eps_w,
            best_k: 0,
        };
    }
    LikelihoodResult {
        value: (best / (TAU * s.r)).clamp(params.eps_w, 1.0),
        best_k,
    }
}

/// Constant-position prediction: Gaussian jitter, no velocity term.
pub fn apply_motion_model<R: Rng + ?Sized>(
    s: &ParticleState,
    params: &FilterParams,
    geometry: SensorGeometry,
    rng: &mut R,
) -> ParticleState {
    let xy = Normal::new(0.0, params.sigma_xy).expect("sigma_xy validated");
    let rr = Normal::new(0.0, params.sigma_r).expect("sigma_r validated");
    let x = s.x + xy.sample(rng);
    let y = s.y + xy.sample(rng);
    let r = s.r + rr.sample(rng);
    clamp_state(ParticleState { x, y, r }, params, geometry)
}

pub fn clamp_state(
    s: ParticleState,
    params: &FilterParams,
    geometry: SensorGeometry,
) -> ParticleState {
    ParticleState {
        x: s.x.clamp(0.0, f64::from(geometry.width) - 1.0),
        y: s.y.clamp(0.0, f64::from(geometry.height) - 1.0),
        r: s.r.clamp(params.r_min, params.r_max),
    }
}

/// Divides every weight by the total. A total below `n · eps_w` resets the
/// population to uniform weights.
pub fn normalize_weights(population: &mut [Particle], eps_w: f64) {
    let n = population.len();
    if n == 0 {
        return;
    }
    let sum: f64 = population.iter().map(|p| p.weight).sum();
    if !(sum >= n as f64 * eps_w) || !sum.is_finite() {
        let uniform = 1.0 / n as f64;
        population.iter_mut().for_each(|p| p.weight = uniform);
    } else {
        population.iter_mut().for_each(|p| p.weight /= sum);
    }
}

const BOUNDARY_SLACK: f64 = 1e-12;

/// Systematic selection of `count` indices from normalized `weights`, using
/// the stratum points `u0 + j / count`.
pub fn systematic_indices(
    weights: &[f64],
    count: usize,
    u0: f64,
) -> Result<Vec<usize>, FilterError> {
    if weights.is_empty() {
        return Err(FilterError::EmptyPopulation);
    }
    let sum: f64 = weights.iter().sum();
    if !((sum - 1.0).abs() <= 1e-6) {
        return Err(FilterError::NotNormalized { sum });
    }
    let step = 1.0 / count as f64;
    if !(0.0..step).contains(&u0) {
        return Err(FilterError::InvalidParams(format!(
            "u0 {u0} outside [0, {step})"
        )));
    }

    let last = weights.len() - 1;
    let mut out = Vec::with_capacity(count);
    let mut i = 0;
    let mut upper = weights[0];
    for j in 0..count {
        let u = u0 + j as f64 * step;
        // Intervals are half-open [C_{i-1}, C_i); the slack absorbs rounding
        // in the cumulative sum so exact boundaries advance.
        while i < last && u >= upper - BOUNDARY_SLACK {
            i += 1;
            upper += weights[i];
        }
        out.push(i);
    }
    Ok(out)
}

/// Resamples `n` particles from a normalized population; survivors keep their
/// input order and every output weight is `1/n`.
pub fn systematic_resample(population: &[Particle], u0: f64) -> Result<Vec<Particle>, FilterError> {
    let weights: Vec<f64> = population.iter().map(|p| p.weight).collect();
    let n = population.len();
    let uniform = 1.0 / n.max(1) as f64;
    Ok(systematic_indices(&weights, n, u0)?
        .into_iter()
        .map(|i| Particle::new(population[i].state, uniform))
        .collect())
}

pub fn mean_state(population: &[Particle]) -> Result<ParticleState, FilterError> {
    if population.is_empty() {
        return Err(FilterError::EmptyPopulation);
    }
    let mut acc = ParticleState::default();
    let mut total = 0.0;
    for p in population {
        acc.x += p.weight * p.state.x;
        acc.y += p.weight * p.state.y;
        acc.r += p.weight * p.state.r;
        total += p.weight;
    }
    if !(total > 0.0) {
        return Err(FilterError::NotNormalized { sum: total });
    }
    Ok(ParticleState::new(
        acc.x / total,
        acc.y / total,
        acc.r / total,
    ))
}

pub fn compute_roi(mean: &ParticleState, roi_gain: f64, roi_margin: f64) -> RoiSpec {
    RoiSpec {
        cx: mean.x,
        cy: mean.y,
        radius: roi_gain * mean.r + roi_margin,
    }
}

/// Initial particle distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prior {
    /// Uniform centre over the frame, uniform radius over `[r_min, r_max]`.
    Uniform,
    /// Uniform box of half-width `spread` around `state` (radius included).
    Around { state: ParticleState, spread: f64 },
}

impl Prior {
    pub fn sample<R: Rng + ?Sized>(
        &self,
        params: &FilterParams,
        geometry: SensorGeometry,
        rng: &mut R,
    ) -> ParticleState {
        match *self {
            Prior::Uniform => ParticleState {
                x: rng.random::<f64>() * (f64::from(geometry.width) - 1.0),
                y: rng.random::<f64>() * (f64::from(geometry.height) - 1.0),
                r: params.r_min + rng.random::<f64>() * (params.r_max - params.r_min),
            },
            Prior::Around { state, spread } => {
                let mut jitter = || (rng.random::<f64>() * 2.0 - 1.0) * spread;
                let s = ParticleState {
                    x: state.x + jitter(),
                    y: state.y + jitter(),
                    r: state.r + jitter(),
                };
                clamp_state(s, params, geometry)
            }
        }
    }
}
