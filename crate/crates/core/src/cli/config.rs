//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored, except that `# config: key = value` lines (as written into every
//! artifact header) are read as config lines. So an artifact can be passed
//! back as `--config` to reproduce it.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::classifiers::Family;
use crate::error::{Error, Result};
use crate::features::ExtractionConfig;
use crate::sim::SimConfig;

pub const HEADER_CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub omega_ms: u32,
    pub subsamples: usize,
    pub family: Family,
    pub cv_folds: usize,
    pub train_fraction: f64,
    pub n_repeats: usize,
    pub synth_duration_ms: u64,
    pub bg_loads_mbps: Vec<f64>,
    pub sim: SimConfig,
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            omega_ms: 500,
            subsamples: 20,
            family: Family::Rf,
            cv_folds: 3,
            train_fraction: 0.7,
            n_repeats: crate::select::DEFAULT_REPEATS,
            synth_duration_ms: 60_000,
            bg_loads_mbps: vec![200.0, 300.0, 400.0],
            sim: SimConfig::default(),
            model: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        // An artifact: only its leading header block is config.
        let artifact = text.starts_with(&format!("# {} ", env!("CARGO_PKG_NAME")));
        let lines = text.lines().enumerate().take_while(|(_, l)| !artifact || l.starts_with('#'));
        for (i, raw) in lines {
            let line = match raw.strip_prefix(HEADER_CONFIG_PREFIX) {
                Some(rest) => rest.trim(),
                None => raw.trim(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let sim = &mut self.sim;
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "omega_ms" => self.omega_ms = parse_value(key, value)?,
            "subsamples" => self.subsamples = parse_value(key, value)?,
            "family" => self.family = parse_value(key, value)?,
            "cv_folds" => self.cv_folds = parse_value(key, value)?,
            "train_fraction" => self.train_fraction = parse_value(key, value)?,
            "n_repeats" => self.n_repeats = parse_value(key, value)?,
            "synth_duration_ms" => self.synth_duration_ms = parse_value(key, value)?,
            "bg_loads_mbps" => self.bg_loads_mbps = parse_list(key, value)?,
            "model" => self.model = (!value.is_empty()).then(|| PathBuf::from(value)),
            "vr_fps" => sim.vr_profile.fps = parse_value(key, value)?,
            "vr_bitrate_mbps" => sim.vr_profile.bitrate_mbps = parse_value(key, value)?,
            "bg_load_mbps" => sim.bg_load_mbps = parse_value(key, value)?,
            "bg_on_mean_ms" => sim.bg_on_mean_ms = parse_value(key, value)?,
            "bg_off_mean_ms" => sim.bg_off_mean_ms = parse_value(key, value)?,
            "bg_packet_bytes" => sim.bg_packet_bytes = parse_value(key, value)?,
            "phy_rate_vr_mbps" => sim.phy_rate_vr_mbps = parse_value(key, value)?,
            "phy_rate_bg_mbps" => sim.phy_rate_bg_mbps = parse_value(key, value)?,
            "per_frame_overhead_us" => sim.per_frame_overhead_us = parse_value(key, value)?,
            "aggregation_limit_packets" => sim.aggregation_limit_packets = parse_value(key, value)?,
            "scheduler" => sim.scheduler = parse_value(key, value)?,
            "classify_after_ms" => sim.classify_after_ms = parse_value(key, value)?,
            "sim_duration_s" => sim.duration_s = parse_value(key, value)?,
            "warmup_s" => sim.warmup_s = parse_value(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.extraction()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be >= 2".into()));
        }
        if self.synth_duration_ms == 0 {
            return Err(Error::Config("synth_duration_ms must be > 0".into()));
        }
        if self.bg_loads_mbps.is_empty() {
            return Err(Error::Config("bg_loads_mbps must list at least one load".into()));
        }
        Ok(())
    }

    pub fn extraction(&self) -> Result<ExtractionConfig> {
        ExtractionConfig::new(self.omega_ms, self.subsamples).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            ..self.sim.clone()
        }
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.sim;
        vec![
            ("seed", self.seed.to_string()),
            ("omega_ms", self.omega_ms.to_string()),
            ("subsamples", self.subsamples.to_string()),
            ("family", self.family.to_string()),
            ("cv_folds", self.cv_folds.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("n_repeats", self.n_repeats.to_string()),
            ("synth_duration_ms", self.synth_duration_ms.to_string()),
            ("bg_loads_mbps", join(&self.bg_loads_mbps)),
            (
                "model",
                self.model.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("vr_fps", s.vr_profile.fps.to_string()),
            ("vr_bitrate_mbps", s.vr_profile.bitrate_mbps.to_string()),
            ("bg_load_mbps", s.bg_load_mbps.to_string()),
            ("bg_on_mean_ms", s.bg_on_mean_ms.to_string()),
            ("bg_off_mean_ms", s.bg_off_mean_ms.to_string()),
            ("bg_packet_bytes", s.bg_packet_bytes.to_string()),
            ("phy_rate_vr_mbps", s.phy_rate_vr_mbps.to_string()),
            ("phy_rate_bg_mbps", s.phy_rate_bg_mbps.to_string()),
            ("per_frame_overhead_us", s.per_frame_overhead_us.to_string()),
            ("aggregation_limit_packets", s.aggregation_limit_packets.to_string()),
            ("scheduler", s.scheduler.as_str().to_string()),
            ("classify_after_ms", s.classify_after_ms.to_string()),
            ("sim_duration_s", s.duration_s.to_string()),
            ("warmup_s", s.warmup_s.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

/// Lines that vary between otherwise identical runs.
pub const TIMESTAMP_PREFIX: &str = "# generated_at: ";

/// `#`-prefixed provenance block: tool and version, command, timestamp,
/// then the full resolved config.
pub fn provenance_header(command: &str, config: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {} {command}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(s, "{TIMESTAMP_PREFIX}{now}");
    for (k, v) in extra {
        let _ = writeln!(s, "# {k}: {v}");
    }
    for (k, v) in config.entries() {
        let _ = writeln!(s, "{HEADER_CONFIG_PREFIX}{k} = {v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let mut c = RunConfig::default();
        c.set("seed", "42").unwrap();
        c.set("bg_loads_mbps", "100, 250.5").unwrap();
        c.set("scheduler", "fifo").unwrap();
        c.set("model", "m.json").unwrap();
        let back = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn header_is_a_valid_config() {
        let mut c = RunConfig::default();
        c.set("omega_ms", "250").unwrap();
        let header = provenance_header("extract", &c, &[("inputs", "a.csv".into())]);
        let body = format!("{header}f1,f2\n1,2\nx = 3\n");
        assert_eq!(RunConfig::parse(&body).unwrap(), c);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("seed = 1\nsede = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("sede"));
        assert!(RunConfig::parse("omega_ms = abc").is_err());
        assert!(RunConfig::parse("just words").is_err());
        assert!(RunConfig::parse("subsamples = 1").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse("# a comment\n\n  family = dt  \n").unwrap();
        assert_eq!(c.family, Family::Dt);
    }
}
