//! Sensor events and their on-disk formats.
//!
//! Two encodings are supported:
//!
//! * CSV: one `t_us,x,y,p` record per LF-terminated line, no header.
//! * Binary: fixed 16-byte little-endian records laid out as
//!   `u64 t_us | u16 x | u16 y | u8 p | 3 zero bytes`.
//!
//! Readers validate coordinates against a [`SensorGeometry`] and reject
//! timestamp regressions, so every stream that comes out of this module
//! satisfies the event invariants.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::error::EventError;

/// Size of one binary event record in bytes.
pub const BIN_RECORD_LEN: usize = 16;

/// Sensor resolution in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self, EventError> {
        if width == 0 || height == 0 {
            return Err(EventError::Geometry { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

impl Default for SensorGeometry {
    /// 304×240, the usual ATIS array.
    fn default() -> Self {
        Self {
            width: 304,
            height: 240,
        }
    }
}

/// Sign of the brightness change that produced an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Decrease = 0,
    Increase = 1,
}

impl Polarity {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Polarity::Decrease),
            1 => Some(Polarity::Increase),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }
}

/// One sensor spike.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.t, self.x, self.y, self.p.bit())
    }
}

/// Ground-truth circle at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruthSample {
    pub t: u64,
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventFormat {
    Csv,
    Bin,
}

impl FromStr for EventFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "bin" => Ok(EventFormat::Bin),
            other => Err(format!(
                "unknown event format '{other}' (expected csv or bin)"
            )),
        }
    }
}

impl fmt::Display for EventFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventFormat::Csv => "csv",
            EventFormat::Bin => "bin",
        })
    }
}

/// Parses a single `t_us,x,y,p` line.
pub fn parse_event_csv(line: &str, geometry: SensorGeometry) -> Result<Event, EventError> {
    let bad = |reason: String| EventError::Parse {
        line: line.to_string(),
        reason,
    };

    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(bad(format!("expected 4 fields, found {}", fields.len())));
    }

    let t: u64 = fields[0].parse().map_err(|_| {
        bad(format!(
            "timestamp '{}' is not an unsigned integer",
            fields[0]
        ))
    })?;
    let x: u16 = fields[1]
        .parse()
        .map_err(|_| bad(format!("x '{}' is not a pixel coordinate", fields[1])))?;
    let y: u16 = fields[2]
        .parse()
        .map_err(|_| bad(format!("y '{}' is not a pixel coordinate", fields[2])))?;
    let p_bit: u8 = fields[3]
        .parse()
        .map_err(|_| bad(format!("polarity '{}' is not 0 or 1", fields[3])))?;

    let p =
        Polarity::from_bit(p_bit).ok_or_else(|| bad(format!("polarity {p_bit} is not 0 or 1")))?;
    check_bounds(x, y, geometry).map_err(bad)?;

    Ok(Event { t, x, y, p })
}

fn check_bounds(x: u16, y: u16, geometry: SensorGeometry) -> Result<(), String> {
    if x >= geometry.width {
        return Err(format!("x {x} out of bounds for width {}", geometry.width));
    }
    if y >= geometry.height {
        return Err(format!(
            "y {y} out of bounds for height {}",
            geometry.height
        ));
    }
    Ok(())
}

/// Decodes one 16-byte binary record.
pub fn decode_bin_record(
    record: &[u8; BIN_RECORD_LEN],
    geometry: SensorGeometry,
) -> Result<Event, EventError> {
    let t = u64::from_le_bytes(record[0..8].try_into().unwrap());
    let x = u16::from_le_bytes([record[8], record[9]]);
    let y = u16::from_le_bytes([record[10], record[11]]);
    let bad = |reason: String| EventError::Parse {
        line: format!("binary record t={t} x={x} y={y} p={}", record[12]),
        reason,
    };
    let p = Polarity::from_bit(record[12])
        .ok_or_else(|| bad(format!("polarity {} is not 0 or 1", record[12])))?;
    check_bounds(x, y, geometry).map_err(bad)?;
    Ok(Event { t, x, y, p })
}

pub fn encode_bin_record(event: &Event) -> [u8; BIN_RECORD_LEN] {
    let mut out = [0u8; BIN_RECORD_LEN];
    out[0..8].copy_from_slice(&event.t.to_le_bytes());
    out[8..10].copy_from_slice(&event.x.to_le_bytes());
    out[10..12].copy_from_slice(&event.y.to_le_bytes());
    out[12] = event.p.bit();
    out
}

/// Reads a whole event stream, enforcing bounds and non-decreasing time.
pub fn read_event_stream<R: Read>(
    source: R,
    format: EventFormat,
    geometry: SensorGeometry,
) -> Result<Vec<Event>, EventError> {
    let mut events = Vec::new();
    match format {
        EventFormat::Csv => {
            let reader = BufReader::new(source);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                push_ordered(&mut events, parse_event_csv(&line, geometry)?)?;
            }
        }
        EventFormat::Bin => {
            let mut bytes = Vec::new();
            let mut source = source;
            source.read_to_end(&mut bytes)?;
            if bytes.len() % BIN_RECORD_LEN != 0 {
                return Err(EventError::Truncated {
                    len: bytes.len(),
                    record_len: BIN_RECORD_LEN,
                });
            }
            events.reserve(bytes.len() / BIN_RECORD_LEN);
            for chunk in bytes.chunks_exact(BIN_RECORD_LEN) {
                let record: &[u8; BIN_RECORD_LEN] = chunk.try_into().unwrap();
                push_ordered(&mut events, decode_bin_record(record, geometry)?)?;
            }
        }
    }
    Ok(events)
}

fn push_ordered(events: &mut Vec<Event>, event: Event) -> Result<(), EventError> {
    if let Some(prev) = events.last() {
        if event.t < prev.t {
            return Err(EventError::Regression {
                index: events.len(),
                previous: prev.t,
                found: event.t,
            });
        }
    }
    events.push(event);
    Ok(())
}

pub fn write_event_stream<W: Write>(
    events: &[Event],
    format: EventFormat,
    mut sink: W,
) -> io::Result<()> {
    match format {
        EventFormat::Csv => {
            for e in events {
                writeln!(sink, "{e}")?;
            }
        }
        EventFormat::Bin => {
            for e in events {
                sink.write_all(&encode_bin_record(e))?;
            }
        }
    }
    sink.flush()
}

/// Stable merge of two time-ordered streams; on equal timestamps `a` wins.
pub fn merge_streams(a: &[Event], b: &[Event]) -> Vec<Event> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if b[j].t < a[i].t {
            out.push(b[j]);
            j += 1;
        } else {
            out.push(a[i]);
            i += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Reads a `t_us,cx,cy,r` file. A leading header line is skipped.
pub fn read_ground_truth<R: Read>(source: R) -> Result<Vec<GroundTruthSample>, EventError> {
    let mut out: Vec<GroundTruthSample> = Vec::new();
    for (t, [cx, cy, r]) in read_timed_rows(source)? {
        if let Some(prev) = out.last() {
            if t < prev.t {
                return Err(EventError::Regression {
                    index: out.len(),
                    previous: prev.t,
                    found: t,
                });
            }
        }
        out.push(GroundTruthSample { t, cx, cy, r });
    }
    Ok(out)
}

pub fn write_ground_truth<W: Write>(samples: &[GroundTruthSample], mut sink: W) -> io::Result<()> {
    writeln!(sink, "t_us,cx,cy,r")?;
    for s in samples {
        writeln!(sink, "{},{:.4},{:.4},{:.4}", s.t, s.cx, s.cy, s.r)?;
    }
    sink.flush()
}

/// Shared reader for the `t_us,a,b,c` CSV files (ground truth and tracks).
pub(crate) fn read_timed_rows<R: Read>(source: R) -> Result<Vec<(u64, [f64; 3])>, EventError> {
    let reader = BufReader::new(source);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if idx == 0 && fields.first().is_some_and(|f| f.parse::<u64>().is_err()) {
            continue;
        }
        let bad = |reason: &str| EventError::Parse {
            line: line.clone(),
            reason: reason.to_string(),
        };
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let t: u64 = fields[0]
            .parse()
            .map_err(|_| bad("timestamp is not an unsigned integer"))?;
        let mut vals = [0.0; 3];
        for (slot, field) in vals.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad("value is not a finite number"))?;
        }
        rows.push((t, vals));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geo() -> SensorGeometry {
        SensorGeometry::default()
    }

    #[test]
    fn parses_plain_line() {
        let e = parse_event_csv("1000,10,20,1", geo()).unwrap();
        assert_eq!(e, Event::new(1000, 10, 20, Polarity::Increase));
        let z = parse_event_csv("0,0,0,0", geo()).unwrap();
        assert_eq!(z, Event::new(0, 0, 0, Polarity::Decrease));
    }

    #[test]
    fn tolerates_whitespace() {
        let e = parse_event_csv(" 7 , 3,\t4 ,0 ", geo()).unwrap();
        assert_eq!(e, Event::new(7, 3, 4, Polarity::Decrease));
    }

    #[test]
    fn rejects_bad_lines() {
        for line in [
            "5,304,0,1",
            "5,0,240,1",
            "1,2,3",
            "1,2,3,4,5",
            "a,1,1,1",
            "1,1,1,2",
            "-1,1,1,1",
        ] {
            let err = parse_event_csv(line, geo()).unwrap_err();
            assert!(err.to_string().contains(line), "{err}");
        }
    }

    #[test]
    fn csv_stream_and_regression() {
        let events =
            read_event_stream(&b"1,1,1,1\n2,2,2,0\n"[..], EventFormat::Csv, geo()).unwrap();
        assert_eq!(events.iter().map(|e| e.t).collect::<Vec<_>>(), vec![1, 2]);

        let err =
            read_event_stream(&b"2,1,1,1\n1,2,2,0\n"[..], EventFormat::Csv, geo()).unwrap_err();
        assert!(
            matches!(err, EventError::Regression { index: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn binary_layout() {
        let bytes = [1u8, 0, 0, 0, 0, 0, 0, 0, 0x0A, 0, 0x14, 0, 1, 0, 0, 0];
        let events = read_event_stream(&bytes[..], EventFormat::Bin, geo()).unwrap();
        assert_eq!(events, vec![Event::new(1, 10, 20, Polarity::Increase)]);
        assert_eq!(encode_bin_record(&events[0]), bytes);
    }

    #[test]
    fn binary_truncated() {
        let bytes = [0u8; 17];
        let err = read_event_stream(&bytes[..], EventFormat::Bin, geo()).unwrap_err();
        assert!(matches!(err, EventError::Truncated { len: 17, .. }));
    }

    #[test]
    fn write_empty_and_single() {
        let mut out = Vec::new();
        write_event_stream(&[], EventFormat::Bin, &mut out).unwrap();
        assert!(out.is_empty());
        write_event_stream(
            &[Event::new(3, 1, 2, Polarity::Decrease)],
            EventFormat::Bin,
            &mut out,
        )
        .unwrap();
        assert_eq!(out.len(), BIN_RECORD_LEN);
    }

    #[test]
    fn merge_tie_prefers_a() {
        let a = [Event::new(1, 1, 1, Polarity::Increase)];
        let b = [Event::new(1, 2, 2, Polarity::Decrease)];
        let m = merge_streams(&a, &b);
        assert_eq!(m, vec![a[0], b[0]]);
        assert_eq!(merge_streams(&a, &[]), a.to_vec());
    }

    #[test]
    fn ground_truth_round_trip() {
        let samples = vec![
            GroundTruthSample {
                t: 0,
                cx: 1.5,
                cy: 2.25,
                r: 15.0,
            },
            GroundTruthSample {
                t: 1000,
                cx: 3.0,
                cy: 4.0,
                r: 15.5,
            },
        ];
        let mut buf = Vec::new();
        write_ground_truth(&samples, &mut buf).unwrap();
        assert!(buf.starts_with(b"t_us,cx,cy,r\n"));
        assert_eq!(read_ground_truth(&buf[..]).unwrap(), samples);
    }

    fn stream_strategy() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec((0u64..50, 0u16..304, 0u16..240, any::<bool>()), 0..200).prop_map(
            |raw| {
                let mut t = 0;
                raw.into_iter()
                    .map(|(dt, x, y, p)| {
                        t += dt;
                        let p = if p {
                            Polarity::Increase
                        } else {
                            Polarity::Decrease
                        };
                        Event::new(t, x, y, p)
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip_both_formats(stream in stream_strategy()) {
            for format in [EventFormat::Csv, EventFormat::Bin] {
                let mut buf = Vec::new();
                write_event_stream(&stream, format, &mut buf).unwrap();
                let back = read_event_stream(&buf[..], format, geo()).unwrap();
                prop_assert_eq!(&back, &stream);
            }
        }

        #[test]
        fn merge_matches_sort_oracle(a in stream_strategy(), b in stream_strategy()) {
            let merged = merge_streams(&a, &b);
            // Stable sort over (a ++ b) keyed by time is the oracle.
            let mut oracle: Vec<Event> = a.iter().chain(b.iter()).copied().collect();
            oracle.sort_by_key(|e| e.t);
            prop_assert_eq!(merged.len(), a.len() + b.len());
            prop_assert_eq!(merged, oracle);
        }
    }
}
