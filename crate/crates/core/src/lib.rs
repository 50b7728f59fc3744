//! Event-driven particle filter for tracking a circle in an event-camera
//! stream, executed on a simulated many-core vertex graph.
//!
//! * [`event`]: event records, CSV/binary formats, stream merging.
//! * [`synth`]: synthetic moving-circle streams with ground truth.
//! * [`filter`]: likelihood, motion model, normalization, resampling.
//! * [`graph`]: the input/filter/particle network as a discrete-event
//!   simulation, plus the sequential baseline.
//! * [`metrics`]: accuracy against ground truth and the scaling sweep.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod event;
pub mod filter;
pub mod graph;
pub mod metrics;
pub mod streams;
pub mod synth;

pub use error::{EventError, FilterError, MetricsError, SimError};
pub use event::{
    merge_streams, parse_event_csv, read_event_stream, read_ground_truth, write_event_stream,
    write_ground_truth, Event, EventFormat, GroundTruthSample, Polarity, SensorGeometry,
};
pub use filter::{
    apply_motion_model, compute_roi, contour_distance, event_score, incremental_likelihood,
    mean_state, normalize_weights, systematic_indices, systematic_resample, FilterParams,
    LikelihoodResult, Particle, ParticleState, Prior, RoiSpec,
};
pub use graph::{
    build_topology, distribute_event, roi_filter_step, run_cpu_baseline, run_simulation,
    LatencyModel, Mode, OutputPacket, SimConfig, SimOutput, SimStats, Topology, VertexId,
};
pub use metrics::{
    compute_tracking_error, compute_update_rate, read_track, scaling_experiment, write_track,
    EvalOptions, ScalingReport, ScalingRow, TrackError,
};
pub use synth::{generate_circle_events, interpolate_truth, GeneratorParams, Trajectory};
