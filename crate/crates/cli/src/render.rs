//! Binary PPM (P6) overlay frames: events since the previous frame in black,
//! the current estimate as a one-pixel red circle on white.

use std::io::{self, Write};
use std::path::Path;

use evtrack_core::{Event, OutputPacket, SensorGeometry};

const WHITE: [u8; 3] = [255, 255, 255];
const BLACK: [u8; 3] = [0, 0, 0];
const RED: [u8; 3] = [255, 0, 0];

pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn blank(geometry: SensorGeometry) -> Self {
        let (width, height) = (usize::from(geometry.width), usize::from(geometry.height));
        Self {
            width,
            height,
            pixels: WHITE.repeat(width * height),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn set(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = 3 * (y as usize * self.width + x as usize);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn plot_event(&mut self, e: &Event) {
        self.set(i64::from(e.x), i64::from(e.y), BLACK);
    }

    /// Pixels whose centre lies within half a pixel of the circle.
    pub fn draw_circle(&mut self, cx: f64, cy: f64, r: f64) {
        if !(cx.is_finite() && cy.is_finite() && r.is_finite()) {
            return;
        }
        let (x0, x1) = ((cx - r - 1.0).floor() as i64, (cx + r + 1.0).ceil() as i64);
        let (y0, y1) = ((cy - r - 1.0).floor() as i64, (cy + r + 1.0).ceil() as i64);
        for y in y0.max(0)..=y1.min(self.height as i64 - 1) {
            for x in x0.max(0)..=x1.min(self.width as i64 - 1) {
                let d = (x as f64 - cx).hypot(y as f64 - cy);
                if (d - r).abs() < 0.5 {
                    self.set(x, y, RED);
                }
            }
        }
    }

    pub fn write_ppm<W: Write>(&self, mut sink: W) -> io::Result<()> {
        write!(sink, "P6\n{} {}\n255\n", self.width, self.height)?;
        sink.write_all(&self.pixels)?;
        sink.flush()
    }
}

/// Renders frames ending at `period_us`, `2 * period_us`, ... until the last
/// event. Returns the number of frames written.
pub fn render_frames(
    dir: &Path,
    events: &[Event],
    track: &[OutputPacket],
    geometry: SensorGeometry,
    period_us: u64,
) -> io::Result<usize> {
    std::fs::create_dir_all(dir)?;
    let Some(last) = events.last() else {
        return Ok(0);
    };
    let period = period_us.max(1);
    let count = (last.t / period + 1) as usize;
    let (mut ei, mut ti) = (0, 0);
    let mut estimate: Option<&OutputPacket> = None;
    for k in 0..count {
        let end = (k as u64 + 1) * period;
        let mut frame = Frame::blank(geometry);
        while ei < events.len() && events[ei].t < end {
            frame.plot_event(&events[ei]);
            ei += 1;
        }
        while ti < track.len() && track[ti].t_us < end {
            estimate = Some(&track[ti]);
            ti += 1;
        }
        if let Some(p) = estimate {
            frame.draw_circle(p.state.x, p.state.y, p.state.r);
        }
        let file = std::fs::File::create(dir.join(format!("frame_{k:06}.ppm")))?;
        frame.write_ppm(io::BufWriter::new(file))?;
    }
    Ok(count)
}
