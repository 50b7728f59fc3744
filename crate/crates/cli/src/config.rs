//! Flat `key=value` run configuration.
//!
//! Keys share their names with the command-line flags (`sigma-xy`,
//! `t-particle-hop`, ...). Blank lines and `#` comments are ignored, as are
//! the metadata keys a manifest adds, so a manifest can be fed back in with
//! `--config`.

use std::path::PathBuf;

use clap::Args;
use evtrack_core::{Mode, ParticleState, Prior, SensorGeometry, SimConfig};

use crate::CliError;

/// Keys a manifest writes that carry no configuration.
const METADATA_KEYS: &[&str] = &["tool_version", "command"];
const METADATA_PREFIXES: &[&str] = &["input.", "output."];

/// Every configuration key, in serialization order.
pub const CONFIG_KEYS: &[&str] = &[
    "n",
    "h",
    "mode",
    "seed",
    "q-trigger",
    "w-max",
    "band",
    "inner-penalty",
    "sigma-xy",
    "sigma-r",
    "eps-w",
    "r-min",
    "r-max",
    "t-particle-hop",
    "t-event-hop",
    "t-score-per-event",
    "t-cpu-overhead",
    "roi-gain",
    "roi-margin",
    "width",
    "height",
    "prior",
];

/// Simulation flags shared by `track` and `bench`. Unset flags fall back to
/// the config file, then to the built-in defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct SimFlags {
    /// Flat key=value config file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of ROI filter vertices.
    #[arg(long)]
    pub h: Option<usize>,
    /// Execution model: graph or cpu.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Events consumed per filter update.
    #[arg(long)]
    pub q_trigger: Option<usize>,
    #[arg(long)]
    pub w_max: Option<usize>,
    /// Half-width of the contour band, pixels.
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long)]
    pub inner_penalty: Option<f64>,
    #[arg(long)]
    pub sigma_xy: Option<f64>,
    #[arg(long)]
    pub sigma_r: Option<f64>,
    /// Particle-to-particle hop latency, µs.
    #[arg(long)]
    pub t_particle_hop: Option<f64>,
    /// Input/filter hop latency, µs.
    #[arg(long)]
    pub t_event_hop: Option<f64>,
    #[arg(long)]
    pub t_score_per_event: Option<f64>,
    #[arg(long)]
    pub t_cpu_overhead: Option<f64>,
    #[arg(long)]
    pub roi_gain: Option<f64>,
    #[arg(long)]
    pub roi_margin: Option<f64>,
    #[arg(long)]
    pub width: Option<u16>,
    #[arg(long)]
    pub height: Option<u16>,
    /// Initial particles: `uniform` or `around:X,Y,R,SPREAD`.
    #[arg(long)]
    pub prior: Option<String>,
}

impl SimFlags {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(
            out: &mut Vec<(&'static str, String)>,
            key: &'static str,
            v: &Option<T>,
        ) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        put(&mut out, "h", &self.h);
        put(&mut out, "mode", &self.mode);
        put(&mut out, "seed", &self.seed);
        put(&mut out, "q-trigger", &self.q_trigger);
        put(&mut out, "w-max", &self.w_max);
        put(&mut out, "band", &self.band);
        put(&mut out, "inner-penalty", &self.inner_penalty);
        put(&mut out, "sigma-xy", &self.sigma_xy);
        put(&mut out, "sigma-r", &self.sigma_r);
        put(&mut out, "t-particle-hop", &self.t_particle_hop);
        put(&mut out, "t-event-hop", &self.t_event_hop);
        put(&mut out, "t-score-per-event", &self.t_score_per_event);
        put(&mut out, "t-cpu-overhead", &self.t_cpu_overhead);
        put(&mut out, "roi-gain", &self.roi_gain);
        put(&mut out, "roi-margin", &self.roi_margin);
        put(&mut out, "width", &self.width);
        put(&mut out, "height", &self.height);
        put(&mut out, "prior", &self.prior);
        out
    }

    /// Defaults, then the config file, then explicit flags. The result is
    /// validated. `n` is passed separately because `bench` takes a list.
    pub fn resolve(&self, n: Option<usize>) -> Result<SimConfig, CliError> {
        let mut cfg = SimConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            for (key, value) in parse_pairs(&text)? {
                if !is_metadata(&key) {
                    apply(&mut cfg, &key, &value)?;
                }
            }
        }
        for (key, value) in self.pairs() {
            apply(&mut cfg, key, &value)?;
        }
        if let Some(n) = n {
            cfg.n = n;
        }
        cfg.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

fn is_metadata(key: &str) -> bool {
    METADATA_KEYS.contains(&key) || METADATA_PREFIXES.iter().any(|p| key.starts_with(p))
}

/// Splits `key=value` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected key=value, got '{line}'",
                i + 1
            )));
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

pub fn apply(cfg: &mut SimConfig, key: &str, value: &str) -> Result<(), CliError> {
    match key {
        "n" => cfg.n = num(key, value)?,
        "h" => cfg.h = num(key, value)?,
        "mode" => cfg.mode = value.parse::<Mode>().map_err(CliError::Config)?,
        "seed" => cfg.seed = num(key, value)?,
        "q-trigger" => cfg.filter.q_trigger = num(key, value)?,
        "w-max" => cfg.filter.w_max = num(key, value)?,
        "band" => cfg.filter.band = num(key, value)?,
        "inner-penalty" => cfg.filter.inner_penalty = num(key, value)?,
        "sigma-xy" => cfg.filter.sigma_xy = num(key, value)?,
        "sigma-r" => cfg.filter.sigma_r = num(key, value)?,
        "eps-w" => cfg.filter.eps_w = num(key, value)?,
        "r-min" => cfg.filter.r_min = num(key, value)?,
        "r-max" => cfg.filter.r_max = num(key, value)?,
        "t-particle-hop" => cfg.latency.t_particle_hop = num(key, value)?,
        "t-event-hop" => cfg.latency.t_event_hop = num(key, value)?,
        "t-score-per-event" => cfg.latency.t_score_per_event = num(key, value)?,
        "t-cpu-overhead" => cfg.latency.t_cpu_overhead = num(key, value)?,
        "roi-gain" => cfg.roi_gain = num(key, value)?,
        "roi-margin" => cfg.roi_margin = num(key, value)?,
        "width" | "height" => {
            let v: u16 = num(key, value)?;
            let (w, h) = if key == "width" {
                (v, cfg.geometry.height)
            } else {
                (cfg.geometry.width, v)
            };
            cfg.geometry =
                SensorGeometry::new(w, h).map_err(|e| CliError::Config(e.to_string()))?;
        }
        "prior" => cfg.prior = parse_prior(value)?,
        other => return Err(CliError::Config(format!("unknown key '{other}'"))),
    }
    Ok(())
}

fn parse_prior(value: &str) -> Result<Prior, CliError> {
    if value == "uniform" {
        return Ok(Prior::Uniform);
    }
    let bad = || {
        CliError::Config(format!(
            "prior: expected 'uniform' or 'around:X,Y,R,SPREAD', got '{value}'"
        ))
    };
    let rest = value.strip_prefix("around:").ok_or_else(bad)?;
    let v: Vec<f64> = rest
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [x, y, r, spread] = v[..] else {
        return Err(bad());
    };
    Ok(Prior::Around {
        state: ParticleState::new(x, y, r),
        spread,
    })
}

fn prior_value(prior: &Prior) -> String {
    match prior {
        Prior::Uniform => "uniform".into(),
        Prior::Around { state, spread } => {
            format!("around:{},{},{},{}", state.x, state.y, state.r, spread)
        }
    }
}

/// Serializes every key. Floats use the shortest exact representation, so
/// reading the text back gives an identical config.
pub fn to_pairs(cfg: &SimConfig) -> Vec<(&'static str, String)> {
    let f = &cfg.filter;
    let l = &cfg.latency;
    let values = [
        cfg.n.to_string(),
        cfg.h.to_string(),
        cfg.mode.to_string(),
        cfg.seed.to_string(),
        f.q_trigger.to_string(),
        f.w_max.to_string(),
        f.band.to_string(),
        f.inner_penalty.to_string(),
        f.sigma_xy.to_string(),
        f.sigma_r.to_string(),
        f.eps_w.to_string(),
        f.r_min.to_string(),
        f.r_max.to_string(),
        l.t_particle_hop.to_string(),
        l.t_event_hop.to_string(),
        l.t_score_per_event.to_string(),
        l.t_cpu_overhead.to_string(),
        cfg.roi_gain.to_string(),
        cfg.roi_margin.to_string(),
        cfg.geometry.width.to_string(),
        cfg.geometry.height.to_string(),
        prior_value(&cfg.prior),
    ];
    CONFIG_KEYS.iter().copied().zip(values).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut cfg = SimConfig {
            n: 37,
            mode: Mode::Cpu,
            seed: 99,
            prior: Prior::Around {
                state: ParticleState::new(1.5, 2.25, 13.0),
                spread: 0.1,
            },
            ..Default::default()
        };
        cfg.filter.sigma_xy = 0.1 + 0.2;
        cfg.latency.t_particle_hop = 4.6;
        let text: String = to_pairs(&cfg)
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        let mut back = SimConfig::default();
        for (k, v) in parse_pairs(&text).unwrap() {
            apply(&mut back, &k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn every_key_is_accepted() {
        let cfg = SimConfig::default();
        for (k, v) in to_pairs(&cfg) {
            let mut c = SimConfig::default();
            apply(&mut c, k, &v).unwrap();
            assert_eq!(c, cfg, "{k}");
        }
    }

    #[test]
    fn rejects_unknown_key_and_bad_value() {
        let mut cfg = SimConfig::default();
        assert!(matches!(
            apply(&mut cfg, "sigma", "1"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            apply(&mut cfg, "n", "ten"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            apply(&mut cfg, "prior", "around:1,2"),
            Err(CliError::Config(_))
        ));
        assert!(parse_pairs("n 10").is_err());
    }

    #[test]
    fn comments_and_metadata_skipped() {
        let pairs = parse_pairs("# header\n\nn = 12\ntool_version=0.1.0\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(is_metadata("tool_version"));
        assert!(is_metadata("input.events"));
        assert!(!is_metadata("n"));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "n=12\nh=3\nseed=4\n").unwrap();
        let flags = SimFlags {
            config: Some(path),
            h: Some(5),
            ..Default::default()
        };
        let cfg = flags.resolve(Some(20)).unwrap();
        assert_eq!((cfg.n, cfg.h, cfg.seed), (20, 5, 4));
    }

    #[test]
    fn invalid_config_is_a_config_error() {
        let flags = SimFlags {
            band: Some(-1.0),
            ..Default::default()
        };
        assert!(matches!(flags.resolve(None), Err(CliError::Config(_))));
        assert!(matches!(
            SimFlags::default().resolve(Some(0)),
            Err(CliError::Config(_))
        ));
    }
}
