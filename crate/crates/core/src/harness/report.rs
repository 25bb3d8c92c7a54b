use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use super::ExperimentConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "axis_value,algorithm,sampling_period_s,buffer_pkts,energy_fraction,loss_percent,mean_delay_us,lower_bound";

/// Statistics of one sampling interval, summed over ports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalRow {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    /// Whether the interval counts towards the aggregates.
    pub included: bool,
    pub port_energy: Vec<f64>,
    pub port_loss: Vec<u64>,
    /// Mean of `port_energy`.
    pub energy_fraction: f64,
    pub packets_offered: u64,
    pub bytes_offered: u64,
    pub packets_dropped: u64,
    pub packets_sent: u64,
    pub sum_delay: f64,
    pub lower_bound: f64,
}

impl IntervalRow {
    pub fn loss_percent(&self) -> f64 {
        percent(self.packets_dropped, self.packets_offered)
    }

    pub fn mean_delay(&self) -> Option<f64> {
        (self.packets_sent > 0).then(|| self.sum_delay / self.packets_sent as f64)
    }
}

fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub algorithm: String,
    pub sampling_period: f64,
    pub buffer_size: usize,
    pub intervals: Vec<IntervalRow>,
    /// Mean normalised consumption over included intervals.
    pub energy_fraction: f64,
    pub loss_percent: f64,
    /// Seconds; absent when no packet departed.
    pub mean_delay: Option<f64>,
    /// Water-filling bound for the mean offered load of included intervals.
    pub lower_bound: f64,
    pub packets_offered: u64,
    pub packets_dropped: u64,
    pub packets_sent: u64,
}

impl ExperimentReport {
    pub(crate) fn assemble(
        cfg: &ExperimentConfig,
        intervals: Vec<IntervalRow>,
        bound: impl Fn(u64, u64, f64) -> Result<f64>,
    ) -> Result<Self> {
        let included: Vec<&IntervalRow> = intervals.iter().filter(|r| r.included).collect();
        let seconds: f64 = included.iter().map(|r| r.end - r.start).sum();
        let energy = included
            .iter()
            .map(|r| r.energy_fraction * (r.end - r.start))
            .sum::<f64>()
            / seconds;
        let offered: u64 = included.iter().map(|r| r.packets_offered).sum();
        let bytes: u64 = included.iter().map(|r| r.bytes_offered).sum();
        let dropped: u64 = included.iter().map(|r| r.packets_dropped).sum();
        let sent: u64 = included.iter().map(|r| r.packets_sent).sum();
        let sum_delay: f64 = included.iter().map(|r| r.sum_delay).sum();
        Ok(Self {
            algorithm: cfg.algorithm.name().to_string(),
            sampling_period: cfg.sampling_period,
            buffer_size: cfg.buffer_size,
            energy_fraction: energy,
            loss_percent: percent(dropped, offered),
            mean_delay: (sent > 0).then(|| sum_delay / sent as f64),
            lower_bound: bound(bytes, offered, seconds)?,
            packets_offered: offered,
            packets_dropped: dropped,
            packets_sent: sent,
            intervals,
        })
    }
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn delay_us(d: Option<f64>) -> String {
    d.map(|s| sig9(s * 1e6)).unwrap_or_default()
}

#[allow(clippy::too_many_arguments)]
fn write_row<W: Write>(
    out: &mut W,
    axis: &str,
    report: &ExperimentReport,
    energy: f64,
    loss: f64,
    delay: Option<f64>,
    bound: f64,
) -> std::io::Result<()> {
    writeln!(
        out,
        "{axis},{},{},{},{},{},{},{}",
        report.algorithm,
        sig9(report.sampling_period),
        report.buffer_size,
        sig9(energy),
        sig9(loss),
        delay_us(delay),
        sig9(bound)
    )
}

/// One row per interval (axis value = interval index) plus an `all` row with
/// the aggregates.
pub fn write_report_csv<W: Write>(report: &ExperimentReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &report.intervals {
        write_row(
            &mut out,
            &row.index.to_string(),
            report,
            row.energy_fraction,
            row.loss_percent(),
            row.mean_delay(),
            row.lower_bound,
        )?;
    }
    write_row(
        &mut out,
        "all",
        report,
        report.energy_fraction,
        report.loss_percent,
        report.mean_delay,
        report.lower_bound,
    )
}

/// One aggregate row per sweep point, keyed by its axis value.
pub fn write_sweep_csv<W: Write>(values: &[f64], reports: &[ExperimentReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (v, r) in values.iter().zip(reports) {
        write_row(
            &mut out,
            &v.to_string(),
            r,
            r.energy_fraction,
            r.loss_percent,
            r.mean_delay,
            r.lower_bound,
        )?;
    }
    Ok(())
}

/// Writes a single report (`axis_values` = `None`) or a sweep to `path`.
pub fn emit_csv(path: impl AsRef<Path>, reports: &[ExperimentReport], axis_values: Option<&[f64]>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    match axis_values {
        Some(values) => write_sweep_csv(values, reports, &mut out).map_err(io)?,
        None => {
            for r in reports {
                write_report_csv(r, &mut out).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// A parsed output row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub axis_value: String,
    pub algorithm: String,
    pub sampling_period_s: f64,
    pub buffer_pkts: usize,
    pub energy_fraction: f64,
    pub loss_percent: f64,
    pub mean_delay_us: Option<f64>,
    pub lower_bound: f64,
}

pub fn parse_csv<R: BufRead>(input: R) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if line == CSV_HEADER || line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("expected 8 columns"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        rows.push(CsvRow {
            axis_value: f[0].to_string(),
            algorithm: f[1].to_string(),
            sampling_period_s: num(f[2])?,
            buffer_pkts: f[3].parse().map_err(|_| bad("bad buffer size"))?,
            energy_fraction: num(f[4])?,
            loss_percent: num(f[5])?,
            mean_delay_us: if f[6].is_empty() { None } else { Some(num(f[6])?) },
            lower_bound: num(f[7])?,
        });
    }
    Ok(rows)
}
