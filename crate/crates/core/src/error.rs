use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("cannot parse '{line}': {reason}")]
    Parse { line: String, reason: String },
    #[error("timestamp regression at record {index}: {found} after {previous}")]
    Regression {
        index: usize,
        previous: u64,
        found: u64,
    },
    #[error("binary stream of {len} bytes is not a multiple of the {record_len}-byte record")]
    Truncated { len: usize, record_len: usize },
    #[error("invalid sensor geometry {width}x{height}")]
    Geometry { width: u16, height: u16 },
    #[error("invalid generator input: {0}")]
    Generator(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("weights are not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },
    #[error("empty particle population")]
    EmptyPopulation,
    #[error("invalid filter parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid topology: h = {h}, n = {n} (both must be at least 1)")]
    Topology { h: usize, n: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("particle {receiver} received a second state packet from {sender} for update {seq}")]
    DuplicateState {
        receiver: usize,
        sender: usize,
        seq: u64,
    },
    #[error("input events are not time-ordered at index {index}")]
    UnorderedInput { index: usize },
    #[error("input event at index {index} lies outside the sensor")]
    OutOfBounds { index: usize },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("update rate needs at least two output packets, got {0}")]
    TooFewUpdates(usize),
    #[error("track spans zero time")]
    ZeroSpan,
    #[error("{0} sequence is empty")]
    Empty(&'static str),
    #[error("n values must be sorted ascending and non-zero")]
    UnsortedSweep,
    #[error(transparent)]
    Sim(#[from] SimError),
}
