//! `evtrack`: synthesize event streams, run the tracker, score tracks and
//! sweep particle counts.
//!
//! Exit codes: 0 on success, 1 for I/O or parse failures, 2 for usage and
//! configuration errors.

pub mod config;
pub mod manifest;
pub mod render;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evtrack_core::{
    compute_tracking_error, generate_circle_events, read_event_stream, read_ground_truth,
    read_track, scaling_experiment, write_event_stream, write_ground_truth, write_track,
    EvalOptions, Event, EventError, EventFormat, GeneratorParams, GroundTruthSample, MetricsError,
    SensorGeometry, SimError, Trajectory,
};
use thiserror::Error;

use config::SimFlags;
use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: EventError },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "evtrack",
    version,
    about = "Event-driven circle tracking on a simulated many-core graph"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic event stream and its ground truth.
    Synth(SynthArgs),
    /// Run the tracker over an event file.
    Track(TrackArgs),
    /// Score a track against ground truth.
    Eval(EvalArgs),
    /// Sweep particle counts in graph and cpu mode.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TrajKind {
    Static,
    Linear,
    CircleOrbit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for EventFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => EventFormat::Csv,
            FormatArg::Bin => EventFormat::Bin,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct SceneArgs {
    #[arg(long, value_enum)]
    pub traj: TrajKind,
    #[arg(long, default_value_t = 1000)]
    pub dur_ms: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Contour events per pixel of circumference per second.
    #[arg(long, default_value_t = 100.0)]
    pub event_rate: f64,
    /// Uniform background events per second over the frame.
    #[arg(long, default_value_t = 1000.0)]
    pub clutter_hz: f64,
    /// Radial jitter of contour events, pixels.
    #[arg(long, default_value_t = 0.5)]
    pub contour_sigma: f64,
    #[arg(long, default_value_t = 15.0)]
    pub radius: f64,
    /// Target speed, px/s.
    #[arg(long, default_value_t = 100.0)]
    pub speed: f64,
    /// Orbit radius for circle-orbit, pixels.
    #[arg(long, default_value_t = 50.0)]
    pub orbit: f64,
    /// Scene centre; defaults to the frame centre.
    #[arg(long)]
    pub cx: Option<f64>,
    #[arg(long)]
    pub cy: Option<f64>,
    /// Ground-truth sampling step, µs.
    #[arg(long, default_value_t = 1000)]
    pub step_us: u64,
    #[arg(long, default_value_t = 304)]
    pub width: u16,
    #[arg(long, default_value_t = 240)]
    pub height: u16,
}

impl SceneArgs {
    pub fn geometry(&self) -> Result<SensorGeometry, CliError> {
        SensorGeometry::new(self.width, self.height).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn trajectory(&self) -> Result<Trajectory, CliError> {
        let g = self.geometry()?;
        let cx = self.cx.unwrap_or(f64::from(g.width) / 2.0);
        let cy = self.cy.unwrap_or(f64::from(g.height) / 2.0);
        let r = self.radius;
        Ok(match self.traj {
            TrajKind::Static => Trajectory::Static { cx, cy, r },
            // Centred on (cx, cy) at mid-run, moving along +x.
            TrajKind::Linear => Trajectory::Linear {
                x0: cx - self.speed * self.dur_ms as f64 / 2000.0,
                y0: cy,
                vx: self.speed,
                vy: 0.0,
                r,
            },
            TrajKind::CircleOrbit => Trajectory::CircleOrbit {
                cx,
                cy,
                orbit: self.orbit,
                speed: self.speed,
                r,
            },
        })
    }

    pub fn generate(&self) -> Result<(Vec<Event>, Vec<GroundTruthSample>), CliError> {
        let truth = self.trajectory()?.sample(self.dur_ms * 1000, self.step_us);
        let params = GeneratorParams {
            event_rate: self.event_rate,
            contour_sigma: self.contour_sigma,
            clutter_rate: self.clutter_hz,
            geometry: self.geometry()?,
            seed: self.seed,
        };
        generate_circle_events(&truth, &params).map_err(|e| CliError::Config(e.to_string()))
    }

    fn record(&self, m: &mut RunManifest) {
        let traj = self.traj.to_possible_value().expect("no skipped variants");
        m.set("traj", traj.get_name());
        m.set("dur-ms", self.dur_ms);
        m.set("seed", self.seed);
        m.set("event-rate", self.event_rate);
        m.set("clutter-hz", self.clutter_hz);
        m.set("contour-sigma", self.contour_sigma);
        m.set("radius", self.radius);
        m.set("speed", self.speed);
        m.set("orbit", self.orbit);
        if let Some(cx) = self.cx {
            m.set("cx", cx);
        }
        if let Some(cy) = self.cy {
            m.set("cy", cy);
        }
        m.set("step-us", self.step_us);
        m.set("width", self.width);
        m.set("height", self.height);
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrackArgs {
    /// Event file (csv or bin).
    #[arg(long)]
    pub events: PathBuf,
    /// Event file format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Number of particles.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub sim: SimFlags,
    /// Write PPM overlay frames here.
    #[arg(long)]
    pub render_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub frame_ms: u64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub track: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub lost_threshold: f64,
    /// Leading fraction of the track excluded as burn-in.
    #[arg(long, default_value_t = 0.1)]
    pub settle_fraction: f64,
    /// Also write the CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Particle counts, ascending.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    pub n: Vec<usize>,
    /// Event file; a high-rate circle-orbit stream is synthesized if omitted.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Duration of the synthesized stream.
    #[arg(long, default_value_t = 500)]
    pub dur_ms: u64,
    /// Contour event rate of the synthesized stream.
    #[arg(long, default_value_t = 600.0)]
    pub event_rate: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub sim: SimFlags,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn format_for(path: &Path, flag: Option<FormatArg>) -> EventFormat {
    match flag {
        Some(f) => f.into(),
        None if path.extension().is_some_and(|e| e == "bin") => EventFormat::Bin,
        None => EventFormat::Csv,
    }
}

pub fn load_events(
    path: &Path,
    format: EventFormat,
    geometry: SensorGeometry,
) -> Result<Vec<Event>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_event_stream(io::BufReader::new(file), format, geometry).map_err(|source| {
        CliError::Input {
            path: path.to_path_buf(),
            source,
        }
    })
}

fn event_file_name(format: EventFormat) -> &'static str {
    match format {
        EventFormat::Csv => "events.csv",
        EventFormat::Bin => "events.bin",
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let (events, truth) = args.scene.generate()?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let format: EventFormat = args.format.into();
    let events_path = dir.join(event_file_name(format));
    let truth_path = dir.join("truth.csv");
    write_event_stream(&events, format, create(&events_path)?).map_err(io_err(&events_path))?;
    write_ground_truth(&truth, create(&truth_path)?).map_err(io_err(&truth_path))?;

    let mut m = RunManifest::new("synth");
    args.scene.record(&mut m);
    m.set("format", format);
    m.output("events", &events_path)?;
    m.output("truth", &truth_path)?;
    m.write(&dir.join("manifest.txt"))?;
    println!(
        "{} events, {} truth samples -> {}",
        events.len(),
        truth.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_track(args: &TrackArgs) -> Result<(), CliError> {
    let cfg = args.sim.resolve(args.n)?;
    let format = format_for(&args.events, args.format);
    let events = load_events(&args.events, format, cfg.geometry)?;
    let out = cfg.run(&events)?;

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let track_path = dir.join("track.csv");
    let stats_path = dir.join("stats.txt");
    write_track(&out.track, create(&track_path)?).map_err(io_err(&track_path))?;
    std::fs::write(&stats_path, out.stats.to_kv()).map_err(io_err(&stats_path))?;
    if let Some(render_dir) = &args.render_dir {
        let period = args.frame_ms.max(1) * 1000;
        render::render_frames(render_dir, &events, &out.track, cfg.geometry, period)
            .map_err(io_err(render_dir))?;
    }

    let mut m = RunManifest::new("track");
    for (k, v) in config::to_pairs(&cfg) {
        m.set(k, v);
    }
    m.input("events", &args.events)?;
    m.inputs.push(("events_format".into(), format.to_string()));
    m.output("track", &track_path)?;
    m.output("stats", &stats_path)?;
    m.write(&dir.join("manifest.txt"))?;
    println!(
        "{} updates, {:.1} Hz modeled -> {}",
        out.stats.updates_total,
        out.stats.modeled_update_rate_hz,
        track_path.display()
    );
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<String, CliError> {
    let input =
        |path: &PathBuf| -> Result<File, CliError> { File::open(path).map_err(io_err(path)) };
    let track = read_track(input(&args.track)?).map_err(|source| CliError::Input {
        path: args.track.clone(),
        source,
    })?;
    let truth = read_ground_truth(input(&args.truth)?).map_err(|source| CliError::Input {
        path: args.truth.clone(),
        source,
    })?;
    let options = EvalOptions {
        lost_threshold: args.lost_threshold,
        settle_fraction: args.settle_fraction,
    };
    if !(options.lost_threshold >= 0.0 && (0.0..1.0).contains(&options.settle_fraction)) {
        return Err(CliError::Config(
            "lost-threshold must be >= 0 and settle-fraction in [0, 1)".into(),
        ));
    }
    let csv = compute_tracking_error(&track, &truth, options)?.to_csv();
    if let Some(out) = &args.out {
        std::fs::write(out, &csv).map_err(io_err(out))?;
    }
    Ok(csv)
}

/// The default bench stream: a circle orbiting the frame centre.
pub fn bench_stream(dur_ms: u64, event_rate: f64, seed: u64) -> Result<Vec<Event>, CliError> {
    let scene = SceneArgs {
        traj: TrajKind::CircleOrbit,
        dur_ms,
        seed,
        event_rate,
        clutter_hz: 1000.0,
        contour_sigma: 0.5,
        radius: 15.0,
        speed: 100.0,
        orbit: 50.0,
        cx: None,
        cy: None,
        step_us: 1000,
        width: 304,
        height: 240,
    };
    Ok(scene.generate()?.0)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<String, CliError> {
    let base = args.sim.resolve(None)?;
    if args.n.is_empty() || args.n.contains(&0) || args.n.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(
            "--n must be a strictly ascending list of positive counts".into(),
        ));
    }
    let events = match &args.events {
        Some(path) => load_events(path, format_for(path, args.format), base.geometry)?,
        None => bench_stream(args.dur_ms, args.event_rate, base.seed)?,
    };
    let report = scaling_experiment(&base, &args.n, &events)?;
    let csv = report.to_csv();

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("scaling.csv");
    std::fs::write(&path, &csv).map_err(io_err(&path))?;
    let mut m = RunManifest::new("bench");
    for (k, v) in config::to_pairs(&base) {
        if k != "n" {
            m.set(k, v);
        }
    }
    let list: Vec<String> = args.n.iter().map(usize::to_string).collect();
    m.set("n-values", list.join(","));
    match &args.events {
        Some(path) => m.input("events", path)?,
        None => {
            m.set("dur-ms", args.dur_ms);
            m.set("event-rate", args.event_rate);
        }
    }
    m.output("scaling", &path)?;
    m.write(&dir.join("manifest.txt"))?;
    Ok(csv)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => {
            print!("{}", cmd_eval(a)?);
            Ok(())
        }
        Command::Bench(a) => {
            print!("{}", cmd_bench(a)?);
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, reporting errors on stderr.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("evtrack: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
