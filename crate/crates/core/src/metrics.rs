//! Tracking accuracy, update rates and the particle-count scaling sweep.

use std::io::{self, Read, Write};
use std::thread;

use crate::error::{EventError, MetricsError};
use crate::event::{read_timed_rows, Event, GroundTruthSample};
use crate::filter::ParticleState;
use crate::graph::{Mode, OutputPacket, SimConfig, SimStats};
use crate::synth::interpolate_truth;

pub const TRACK_HEADER: &str = "t_us,x,y,r";
pub const TRACK_ERROR_HEADER: &str =
    "mean_center_err,p95_center_err,mean_radius_err,lost_fraction,samples_used,samples_excluded";
pub const SCALING_HEADER: &str = "n,mode,rate_hz,period_us";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Centre error above which a sample counts as lost, pixels.
    pub lost_threshold: f64,
    /// Leading fraction of the track duration ignored as burn-in.
    pub settle_fraction: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            lost_threshold: 20.0,
            settle_fraction: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrackError {
    pub mean_center_err: f64,
    pub p95_center_err: f64,
    pub mean_radius_err: f64,
    pub lost_fraction: f64,
    pub samples_used: usize,
    /// Samples outside the ground-truth time span.
    pub samples_excluded: usize,
}

impl TrackError {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.4},{:.4},{:.4},{:.4},{},{}",
            self.mean_center_err,
            self.p95_center_err,
            self.mean_radius_err,
            self.lost_fraction,
            self.samples_used,
            self.samples_excluded
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{TRACK_ERROR_HEADER}\n{}\n", self.csv_row())
    }
}

pub fn compute_tracking_error(
    track: &[OutputPacket],
    truth: &[GroundTruthSample],
    options: EvalOptions,
) -> Result<TrackError, MetricsError> {
    if track.is_empty() {
        return Err(MetricsError::Empty("track"));
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty("ground truth"));
    }
    let first = track.iter().map(|p| p.t_us).min().unwrap_or(0) as f64;
    let last = track.iter().map(|p| p.t_us).max().unwrap_or(0) as f64;
    let settle_until = first + options.settle_fraction * (last - first);

    let mut centre = Vec::new();
    let mut radius = Vec::new();
    let mut excluded = 0;
    for p in track {
        let t = p.t_us as f64;
        let Some(gt) = interpolate_truth(truth, t) else {
            excluded += 1;
            continue;
        };
        if t < settle_until {
            continue;
        }
        centre.push((p.state.x - gt.cx).hypot(p.state.y - gt.cy));
        radius.push((p.state.r - gt.r).abs());
    }

    // Sorting first makes every aggregate independent of sample order.
    centre.sort_by(f64::total_cmp);
    radius.sort_by(f64::total_cmp);
    let used = centre.len();
    if used == 0 {
        return Ok(TrackError {
            samples_excluded: excluded,
            ..TrackError::default()
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rank = ((0.95 * used as f64).ceil() as usize).clamp(1, used);
    let lost = centre
        .iter()
        .filter(|&&d| d > options.lost_threshold)
        .count();
    Ok(TrackError {
        mean_center_err: mean(&centre),
        p95_center_err: centre[rank - 1],
        mean_radius_err: mean(&radius),
        lost_fraction: lost as f64 / used as f64,
        samples_used: used,
        samples_excluded: excluded,
    })
}

/// Output rate in Hz over the track's own timestamps.
pub fn compute_update_rate(track: &[OutputPacket]) -> Result<f64, MetricsError> {
    if track.len() < 2 {
        return Err(MetricsError::TooFewUpdates(track.len()));
    }
    let first = track.first().unwrap().t_us;
    let last = track.last().unwrap().t_us;
    if last <= first {
        return Err(MetricsError::ZeroSpan);
    }
    Ok((track.len() - 1) as f64 / (last - first) as f64 * 1e6)
}

pub fn write_track<W: Write>(track: &[OutputPacket], mut sink: W) -> io::Result<()> {
    writeln!(sink, "{TRACK_HEADER}")?;
    for p in track {
        writeln!(
            sink,
            "{},{:.4},{:.4},{:.4}",
            p.t_us, p.state.x, p.state.y, p.state.r
        )?;
    }
    sink.flush()
}

/// Reads a `t_us,x,y,r` track; a header line is skipped.
pub fn read_track<R: Read>(source: R) -> Result<Vec<OutputPacket>, EventError> {
    Ok(read_timed_rows(source)?
        .into_iter()
        .enumerate()
        .map(|(i, (t, [x, y, r]))| OutputPacket {
            state: ParticleState::new(x, y, r),
            t_us: t,
            seq: i as u64,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub mode: Mode,
    pub rate_hz: f64,
    pub period_us: f64,
    pub stats: SimStats,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn row(&self, n: usize, mode: Mode) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.n == n && r.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SCALING_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.3},{:.3}\n",
                r.n, r.mode, r.rate_hz, r.period_us
            ));
        }
        out
    }
}

/// Runs graph mode and the CPU baseline for every particle count on the same
/// stream and seed. Runs are independent and execute on separate threads.
pub fn scaling_experiment(
    base: &SimConfig,
    n_values: &[usize],
    events: &[Event],
) -> Result<ScalingReport, MetricsError> {
    if n_values.is_empty() || n_values.contains(&0) || n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MetricsError::UnsortedSweep);
    }
    let configs: Vec<SimConfig> = n_values
        .iter()
        .flat_map(|&n| {
            [Mode::Graph, Mode::Cpu].map(|mode| SimConfig {
                n,
                mode,
                ..base.clone()
            })
        })
        .collect();

    let results = thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || cfg.run(events)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Vec<_>>()
    });

    let mut rows = Vec::with_capacity(configs.len());
    for (cfg, result) in configs.iter().zip(results) {
        let out = result?;
        rows.push(ScalingRow {
            n: cfg.n,
            mode: cfg.mode,
            rate_hz: out.stats.modeled_update_rate_hz,
            period_us: out.stats.mean_update_period_us,
            stats: out.stats,
        });
    }
    Ok(ScalingReport { rows })
}
