use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use eee_bundle::energy::{sigma, EnergyParams};
use eee_bundle::flowkey::{flow_distribution, histogram_variance, write_histogram_csv, AddressField, MaskSpec};
use eee_bundle::harness::{
    emit_csv, run_experiment, sweep, write_report_csv, write_sweep_csv, ExperimentConfig, SweepAxis,
};
use eee_bundle::traffic::{generate_synthetic, read_trace, write_trace, PacketSizeDist, SyntheticProfile, TraceFormat};

#[derive(Parser)]
#[command(name = "eee-bundle", version, about = "Energy-aware flow scheduling over EEE link bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print per-interval and aggregate metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an experiment over values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// sampling_period, buffer_size or margin.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the analytic consumption curve as `rho,sigma` at step 0.01.
    SigmaCurve {
        /// Link capacity, bits/s.
        #[arg(long, default_value_t = 10e9)]
        capacity: f64,
        #[arg(long, default_value_t = 1500.0)]
        packet_bytes: f64,
        #[arg(long, default_value_t = eee_bundle::energy::T_SLEEP_10G)]
        t_sleep: f64,
        #[arg(long, default_value_t = eee_bundle::energy::T_WAKE_10G)]
        t_wake: f64,
        #[arg(long, default_value_t = eee_bundle::energy::SIGMA_OFF)]
        sigma_off: f64,
    },
    /// Histogram of end-to-end flows per aggregated flow for a trace.
    Histogram {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "dst_ip")]
        field: AddressField,
        #[arg(long, default_value_t = 0)]
        offset: u32,
        #[arg(long, default_value_t = 8)]
        length: u32,
        /// Split buckets by destination MAC as well.
        #[arg(long)]
        with_mac: bool,
    },
    /// Write a synthetic trace in the text trace format.
    Generate {
        #[arg(long, default_value_t = 5000)]
        flows: usize,
        /// Mean aggregate rate, bits/s.
        #[arg(long, default_value_t = 3.25e9)]
        rate: f64,
        #[arg(long, default_value = "1500")]
        packet_size: PacketSizeDist,
        #[arg(long, default_value_t = 1.0)]
        zipf: f64,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_file(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let report = run_experiment(&cfg)?;
            match &out {
                Some(path) => emit_csv(path, std::slice::from_ref(&report), None)?,
                None => write_report_csv(&report, output(&out)?)?,
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            seed,
            out,
        } => {
            let cfg = load_config(&config, seed)?;
            let reports = sweep(&cfg, axis, &values)?;
            match &out {
                Some(path) => emit_csv(path, &reports, Some(&values))?,
                None => write_sweep_csv(&values, &reports, output(&out)?)?,
            }
        }
        Command::SigmaCurve {
            capacity,
            packet_bytes,
            t_sleep,
            t_wake,
            sigma_off,
        } => {
            let params = EnergyParams::for_link(capacity, packet_bytes, t_sleep, t_wake, sigma_off);
            params.validate()?;
            let mut out = output(&None)?;
            writeln!(out, "rho,sigma")?;
            for i in 0..=100 {
                let rho = f64::from(i) / 100.0;
                writeln!(out, "{rho:.2},{:.9}", sigma(rho, &params)?)?;
            }
            out.flush()?;
        }
        Command::Histogram {
            trace,
            field,
            offset,
            length,
            with_mac,
        } => {
            let spec = MaskSpec::new(field, offset, length, with_mac)?;
            let packets = read_trace(&trace, TraceFormat::Csv)?.collect::<eee_bundle::Result<Vec<_>>>()?;
            let hist = flow_distribution(packets, &spec);
            // buckets split by MAC may outnumber the bit key space
            let variance = match histogram_variance(&hist, spec.key_space()) {
                Ok(v) => v,
                Err(_) if with_mac => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            let mut out = output(&None)?;
            write_histogram_csv(&hist, variance, &mut out)?;
            out.flush()?;
        }
        Command::Generate {
            flows,
            rate,
            packet_size,
            zipf,
            duration,
            seed,
            out,
        } => {
            let profile = SyntheticProfile {
                n_end_to_end_flows: flows,
                mean_aggregate_rate: rate,
                packet_size,
                dst_popularity: zipf,
                duration,
                seed,
            };
            let mut w = output(&out)?;
            writeln!(w, "# timestamp_seconds,src_ipv4,dst_ipv4,dst_mac,size_bytes")?;
            write_trace(generate_synthetic(&profile)?, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
