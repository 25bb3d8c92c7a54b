//! Experiment runner: replays a trace through the periodic controller loop
//! (poll counters, estimate, reassign) on top of the bundle simulation.

mod config;
mod report;

use rayon::prelude::*;

pub use config::{ExperimentConfig, TraceSource, DEFAULT_BOUND_FRACTION, DEFAULT_MARGIN};
pub use report::{
    emit_csv, parse_csv, write_report_csv, write_sweep_csv, CsvRow, ExperimentReport, IntervalRow, CSV_HEADER,
};

use crate::energy::{bundle_lower_bound, EnergyParams};
use crate::error::{Error, Result};
use crate::estimation::FlowCounters;
use crate::flowkey::flow_key;
use crate::linksim::BundleSim;
use crate::scheduling::Algorithm;
use crate::traffic::{generate_synthetic, read_trace, Packet};

/// Packet size assumed for the energy model when an interval carries no traffic.
const FALLBACK_PACKET_BYTES: f64 = 1500.0;

/// Mixes the experiment seed into the simulator's seed so that random port
/// choices are not correlated with the synthetic trace.
const SIM_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

type PacketStream = Box<dyn Iterator<Item = Result<Packet>> + Send>;

fn open_stream(cfg: &ExperimentConfig) -> Result<PacketStream> {
    let factor = cfg.scale_factor;
    Ok(match &cfg.source {
        TraceSource::File { path, format } => {
            Box::new(read_trace(path, *format)?.map(move |r| r.map(|p| p.time_scaled(factor))))
        }
        TraceSource::Synthetic(profile) => {
            Box::new(generate_synthetic(profile)?.map(move |p| Ok(p.time_scaled(factor))))
        }
    })
}

fn lower_bound(cfg: &ExperimentConfig, bytes: u64, packets: u64, seconds: f64) -> Result<f64> {
    let mean_size = if packets > 0 {
        bytes as f64 / packets as f64
    } else {
        FALLBACK_PACKET_BYTES
    };
    let params = EnergyParams::for_link(
        cfg.bundle.port_capacity,
        mean_size,
        cfg.t_sleep,
        cfg.t_wake,
        cfg.sigma_off,
    );
    let load = (bytes as f64 * 8.0 / seconds).min(cfg.bundle.total_capacity());
    bundle_lower_bound(load, &cfg.bundle, &params)
}

struct Controller<'a> {
    cfg: &'a ExperimentConfig,
    sim: BundleSim,
    counters: FlowCounters,
    rows: Vec<IntervalRow>,
    n_intervals: usize,
}

impl Controller<'_> {
    fn boundary(&self, k: usize) -> f64 {
        k as f64 * self.cfg.sampling_period
    }

    /// Closes interval `k - 1` at time `k * period`, then installs the next
    /// assignment unless this was the last interval.
    fn close_interval(&mut self, k: usize) -> Result<()> {
        let (from, to) = (self.boundary(k - 1), self.boundary(k));
        self.sim.run_until(to)?;
        let links = self.sim.interval_metrics(from, to)?;

        let mut row = IntervalRow {
            index: k - 1,
            start: from,
            end: to,
            included: !(self.cfg.exclude_first_interval && k == 1),
            ..IntervalRow::default()
        };
        for m in &links {
            row.port_energy.push(m.energy_fraction);
            row.port_loss.push(m.loss_count);
            row.packets_offered += m.delta.packets_offered;
            row.bytes_offered += m.delta.bytes_offered;
            row.packets_dropped += m.delta.packets_dropped;
            row.packets_sent += m.delta.packets_sent;
            row.sum_delay += m.delta.sum_delay;
        }
        row.energy_fraction = row.port_energy.iter().sum::<f64>() / links.len() as f64;
        row.lower_bound = lower_bound(self.cfg, row.bytes_offered, row.packets_offered, to - from)?;
        self.rows.push(row);

        if k < self.n_intervals {
            let demands = self.counters.estimate_rates(from, to)?;
            let assignment = self.cfg.algorithm.assign(&demands, &self.cfg.bundle)?;
            self.sim.apply_assignment(&assignment, to)?;
        }
        Ok(())
    }
}

/// Runs one experiment end to end.
///
/// Flows get a random port on their first packet; at every multiple of the
/// sampling period the controller estimates rates from the counters of the
/// interval just ended and installs a new assignment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let stream = open_stream(cfg)?;
    let n_intervals = cfg.n_intervals();
    let mut ctl = Controller {
        cfg,
        sim: BundleSim::new(cfg.bundle.n_ports, cfg.timings(), cfg.buffer_size, cfg.seed ^ SIM_SEED_SALT)?,
        counters: FlowCounters::new(),
        rows: Vec::with_capacity(n_intervals),
        n_intervals,
    };
    let end = ctl.boundary(n_intervals);
    let mut k = 1;
    for packet in stream {
        let packet = packet?;
        if packet.timestamp >= end {
            break;
        }
        while packet.timestamp >= ctl.boundary(k) {
            ctl.close_interval(k)?;
            k += 1;
        }
        let key = flow_key(&packet, &cfg.mask);
        ctl.counters.record_packet(key, packet.size, packet.timestamp);
        ctl.sim.offer_packet(packet, key)?;
    }
    while k <= n_intervals {
        ctl.close_interval(k)?;
        k += 1;
    }
    ExperimentReport::assemble(cfg, ctl.rows, |bytes, packets, secs| {
        lower_bound(cfg, bytes, packets, secs)
    })
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SamplingPeriod,
    BufferSize,
    Margin,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SamplingPeriod => "sampling_period",
            SweepAxis::BufferSize => "buffer_size",
            SweepAxis::Margin => "margin",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::SamplingPeriod => cfg.sampling_period = value,
            SweepAxis::BufferSize => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("buffer size must be a positive integer, got {value}")));
                }
                cfg.buffer_size = value as usize;
            }
            SweepAxis::Margin => match &mut cfg.algorithm {
                Algorithm::Conservative { margin } => *margin = value,
                other => {
                    return Err(Error::Config(format!(
                        "margin sweep needs the conservative algorithm, not {other}"
                    )))
                }
            },
        }
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling_period" => Ok(SweepAxis::SamplingPeriod),
            "buffer_size" => Ok(SweepAxis::BufferSize),
            "margin" => Ok(SweepAxis::Margin),
            other => Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// One independent run per value, executed in parallel; reports come back in
/// input order.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<ExperimentReport>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    configs.par_iter().map(run_experiment).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::SyntheticProfile;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            duration: 2.0,
            sampling_period: 0.5,
            ..Default::default()
        };
        if let TraceSource::Synthetic(p) = &mut cfg.source {
            p.mean_aggregate_rate = 1e9;
            p.n_end_to_end_flows = 200;
        }
        cfg.sync_synthetic();
        cfg
    }

    #[test]
    fn one_row_per_interval() {
        let r = run_experiment(&small()).unwrap();
        assert_eq!(r.intervals.len(), 4);
        assert!(!r.intervals[0].included);
        assert!(r.intervals[1..].iter().all(|i| i.included));
        assert!(r.packets_offered > 0);
        let offered: u64 = r.intervals[1..].iter().map(|i| i.packets_offered).sum();
        assert_eq!(offered, r.packets_offered);
    }

    #[test]
    fn sweep_axis_application() {
        let base = small();
        assert_eq!(SweepAxis::BufferSize.apply(&base, 100.0).unwrap().buffer_size, 100);
        assert!(SweepAxis::BufferSize.apply(&base, 10.5).is_err());
        assert_eq!(SweepAxis::SamplingPeriod.apply(&base, 0.1).unwrap().sampling_period, 0.1);
        let greedy = ExperimentConfig {
            algorithm: Algorithm::Greedy,
            ..base.clone()
        };
        assert!(SweepAxis::Margin.apply(&greedy, 0.5).is_err());
        assert!(sweep(&base, SweepAxis::Margin, &[]).is_err());
        assert_eq!("margin".parse::<SweepAxis>().unwrap(), SweepAxis::Margin);
    }

    #[test]
    fn synthetic_profile_follows_seed() {
        let cfg = small().with_seed(77);
        match cfg.source {
            TraceSource::Synthetic(SyntheticProfile { seed, .. }) => assert_eq!(seed, 77),
            _ => panic!(),
        }
    }
}
