//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # 5 x 1 Gb/s bundle, conservative scheduling
//! n_ports = 5
//! port_capacity = 1e9
//! algorithm = conservative
//! margin = 0.2
//! sampling_period = 0.5
//! buffer_size = 10000
//! duration = 60
//! ```
//!
//! Unset keys keep their [`ExperimentConfig::default`] values. Setting
//! `trace_file` replaces the synthetic workload with a trace read from disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flowkey::MaskSpec;
use crate::linksim::EeeTimings;
use crate::scheduling::{Algorithm, BundleConfig};
use crate::traffic::{SyntheticProfile, TraceFormat};

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    File { path: PathBuf, format: TraceFormat },
    Synthetic(SyntheticProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: TraceSource,
    /// Inter-arrival times are divided by this factor.
    pub scale_factor: f64,
    pub mask: MaskSpec,
    pub bundle: BundleConfig,
    pub t_sleep: f64,
    pub t_wake: f64,
    pub sigma_off: f64,
    pub algorithm: Algorithm,
    /// Seconds between controller polls.
    pub sampling_period: f64,
    /// Per-port buffer, packets.
    pub buffer_size: usize,
    /// Simulated horizon, seconds.
    pub duration: f64,
    pub seed: u64,
    pub exclude_first_interval: bool,
}

/// Reserve used by bounded-greedy when none is configured, as a fraction of
/// port capacity.
pub const DEFAULT_BOUND_FRACTION: f64 = 0.2;
pub const DEFAULT_MARGIN: f64 = 0.2;

impl Default for ExperimentConfig {
    /// Five 1 Gb/s ports at 65% mean load for 60 s: a tenfold slow-down of a
    /// 5 x 1 Gb/s bundle at 65% load, with EEE transition times stretched to match.
    fn default() -> Self {
        let bundle = BundleConfig {
            n_ports: 5,
            port_capacity: 1e9,
        };
        let timings = EeeTimings::time_scaled(bundle.port_capacity);
        Self {
            source: TraceSource::Synthetic(SyntheticProfile {
                mean_aggregate_rate: 0.65 * bundle.total_capacity(),
                duration: 60.0,
                ..SyntheticProfile::default()
            }),
            scale_factor: 1.0,
            mask: MaskSpec::default(),
            bundle,
            t_sleep: timings.t_sleep,
            t_wake: timings.t_wake,
            sigma_off: timings.sigma_off,
            algorithm: Algorithm::Conservative {
                margin: DEFAULT_MARGIN,
            },
            sampling_period: 0.5,
            buffer_size: 10_000,
            duration: 60.0,
            seed: 1,
            exclude_first_interval: true,
        }
    }
}

impl ExperimentConfig {
    pub fn timings(&self) -> EeeTimings {
        EeeTimings {
            t_sleep: self.t_sleep,
            t_wake: self.t_wake,
            sigma_off: self.sigma_off,
            capacity: self.bundle.port_capacity,
        }
    }

    /// Number of whole sampling intervals in the horizon.
    pub fn n_intervals(&self) -> usize {
        (self.duration / self.sampling_period + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sampling_period > 0.0 && self.sampling_period.is_finite()) {
            return bad(format!("sampling_period must be positive, got {}", self.sampling_period));
        }
        if !(self.duration >= self.sampling_period && self.duration.is_finite()) {
            return bad("duration must cover at least one sampling period".into());
        }
        if self.exclude_first_interval && self.n_intervals() < 2 {
            return bad("duration must be at least two sampling periods when the first interval is excluded".into());
        }
        if self.buffer_size == 0 {
            return bad("buffer_size must be at least 1".into());
        }
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return bad(format!("scale_factor must be positive, got {}", self.scale_factor));
        }
        self.bundle.validate()?;
        self.mask.validate()?;
        self.timings().validate()?;
        match self.algorithm {
            Algorithm::BoundedGreedy { bound } if !(0.0..=self.bundle.port_capacity).contains(&bound) => {
                return bad(format!("bound {bound} outside [0, port_capacity]"));
            }
            Algorithm::Conservative { margin } if !(margin >= 0.0) => {
                return bad(format!("margin must be non-negative, got {margin}"));
            }
            _ => {}
        }
        if let TraceSource::Synthetic(p) = &self.source {
            p.validate()?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_pairs(kv)
    }

    fn from_pairs(mut kv: BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut profile = match &cfg.source {
            TraceSource::Synthetic(p) => p.clone(),
            TraceSource::File { .. } => unreachable!(),
        };
        let mut take = |key: &str| kv.remove(key);

        fn num<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
        }
        fn flag(key: &str, v: String) -> Result<bool> {
            match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("bad boolean `{v}` for `{key}`"))),
            }
        }

        if let Some(v) = take("n_ports") {
            cfg.bundle.n_ports = num("n_ports", v)?;
        }
        if let Some(v) = take("port_capacity") {
            cfg.bundle.port_capacity = num("port_capacity", v)?;
            let t = EeeTimings::time_scaled(cfg.bundle.port_capacity);
            cfg.t_sleep = t.t_sleep;
            cfg.t_wake = t.t_wake;
        }
        profile.mean_aggregate_rate = 0.65 * cfg.bundle.total_capacity();
        if let Some(v) = take("t_sleep") {
            cfg.t_sleep = num("t_sleep", v)?;
        }
        if let Some(v) = take("t_wake") {
            cfg.t_wake = num("t_wake", v)?;
        }
        if let Some(v) = take("sigma_off") {
            cfg.sigma_off = num("sigma_off", v)?;
        }
        if let Some(v) = take("scale_factor") {
            cfg.scale_factor = num("scale_factor", v)?;
        }
        if let Some(v) = take("sampling_period") {
            cfg.sampling_period = num("sampling_period", v)?;
        }
        if let Some(v) = take("buffer_size") {
            cfg.buffer_size = num("buffer_size", v)?;
        }
        if let Some(v) = take("duration") {
            cfg.duration = num("duration", v)?;
        }
        if let Some(v) = take("seed") {
            cfg.seed = num("seed", v)?;
        }
        if let Some(v) = take("exclude_first_interval") {
            cfg.exclude_first_interval = flag("exclude_first_interval", v)?;
        }

        if let Some(v) = take("mask_field") {
            cfg.mask.field = v.parse()?;
        }
        if let Some(v) = take("mask_offset_bits") {
            cfg.mask.offset_bits = num("mask_offset_bits", v)?;
        }
        if let Some(v) = take("mask_length_bits") {
            cfg.mask.length_bits = num("mask_length_bits", v)?;
        }
        if let Some(v) = take("mask_combine_with_mac") {
            cfg.mask.combine_with_mac = flag("mask_combine_with_mac", v)?;
        }

        let bound = match take("bound") {
            Some(v) => num("bound", v)?,
            None => DEFAULT_BOUND_FRACTION * cfg.bundle.port_capacity,
        };
        let margin = match take("margin") {
            Some(v) => num("margin", v)?,
            None => DEFAULT_MARGIN,
        };
        let algorithm = take("algorithm").unwrap_or_else(|| "conservative".into());
        cfg.algorithm = match algorithm.as_str() {
            "equitable" => Algorithm::Equitable,
            "greedy" => Algorithm::Greedy,
            "bounded-greedy" | "bounded_greedy" => Algorithm::BoundedGreedy { bound },
            "conservative" => Algorithm::Conservative { margin },
            other => return Err(Error::Config(format!("unknown algorithm `{other}`"))),
        };

        if let Some(v) = take("n_end_to_end_flows") {
            profile.n_end_to_end_flows = num("n_end_to_end_flows", v)?;
        }
        if let Some(v) = take("mean_aggregate_rate") {
            profile.mean_aggregate_rate = num("mean_aggregate_rate", v)?;
        }
        if let Some(v) = take("packet_size") {
            profile.packet_size = v.parse()?;
        }
        if let Some(v) = take("dst_popularity") {
            profile.dst_popularity = num("dst_popularity", v)?;
        }
        let format = match take("trace_format") {
            Some(v) => v.parse()?,
            None => TraceFormat::Csv,
        };
        cfg.source = match take("trace_file") {
            Some(path) => TraceSource::File {
                path: path.into(),
                format,
            },
            None => TraceSource::Synthetic(profile),
        };
        cfg.sync_synthetic();

        if let Some(unknown) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key `{unknown}`")));
        }
        Ok(cfg)
    }

    /// Keeps the synthetic workload long enough to cover the horizon after
    /// scaling and ties its seed to the experiment seed.
    pub fn sync_synthetic(&mut self) {
        if let TraceSource::Synthetic(p) = &mut self.source {
            p.duration = self.duration * self.scale_factor;
            p.seed = self.seed;
        }
    }

    /// Overrides the experiment seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sync_synthetic();
        self
    }
}
