//! Packet streams: plain-text trace ingestion, rate rescaling and a synthetic
//! open-loop workload generator.
//!
//! A trace file holds one packet per line:
//!
//! ```text
//! # timestamp_seconds,src_ipv4,dst_ipv4,dst_mac,size_bytes
//! 0.000001,10.0.0.1,192.168.1.7,00:11:22:33:44:55,1500
//! ```
//!
//! Lines starting with `#` and blank lines are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

pub const MIN_PACKET_BYTES: u32 = 64;
pub const MAX_PACKET_BYTES: u32 = 9000;

/// Number of distinct destination addresses the synthetic generator draws from.
const DST_POOL_SIZE: usize = 4096;

/// Next-hop MAC address stamped on synthetic packets.
const SYNTHETIC_DST_MAC: u64 = 0x02_00_00_00_00_01;

/// One trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    /// Arrival time in seconds.
    pub timestamp: f64,
    pub src_ip: u32,
    pub dst_ip: u32,
    /// 48-bit destination MAC in the low bits.
    pub dst_mac: u64,
    /// Frame size in bytes.
    pub size: u32,
}

impl Packet {
    /// Transmission time of this packet on a link of `capacity` bits/s.
    pub fn service_time(&self, capacity: f64) -> f64 {
        f64::from(self.size) * 8.0 / capacity
    }

    pub fn time_scaled(mut self, factor: f64) -> Self {
        self.timestamp /= factor;
        self
    }
}

/// Supported on-disk trace encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    /// `timestamp,src,dst,mac,size` text records.
    #[default]
    Csv,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            other => Err(Error::arg(format!("unknown trace format `{other}`"))),
        }
    }
}

pub fn parse_mac(s: &str) -> Option<u64> {
    let mut mac = 0u64;
    let mut n = 0;
    for part in s.split(':') {
        if part.len() != 2 {
            return None;
        }
        mac = (mac << 8) | u64::from(u8::from_str_radix(part, 16).ok()?);
        n += 1;
    }
    (n == 6).then_some(mac)
}

pub fn format_mac(mac: u64) -> String {
    let b = mac.to_be_bytes();
    format!(
        "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
        b[2], b[3], b[4], b[5], b[6], b[7]
    )
}

fn parse_record(line: &str) -> std::result::Result<Packet, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let timestamp: f64 = fields[0]
        .parse()
        .map_err(|_| format!("bad timestamp `{}`", fields[0]))?;
    if !timestamp.is_finite() || timestamp < 0.0 {
        return Err(format!("timestamp must be finite and non-negative, got {timestamp}"));
    }
    let src: Ipv4Addr = fields[1]
        .parse()
        .map_err(|_| format!("bad source address `{}`", fields[1]))?;
    let dst: Ipv4Addr = fields[2]
        .parse()
        .map_err(|_| format!("bad destination address `{}`", fields[2]))?;
    let dst_mac = parse_mac(fields[3]).ok_or_else(|| format!("bad MAC address `{}`", fields[3]))?;
    let size: u32 = fields[4]
        .parse()
        .map_err(|_| format!("bad size `{}`", fields[4]))?;
    if !(MIN_PACKET_BYTES..=MAX_PACKET_BYTES).contains(&size) {
        return Err(format!(
            "size {size} outside {MIN_PACKET_BYTES}..={MAX_PACKET_BYTES}"
        ));
    }
    Ok(Packet {
        timestamp,
        src_ip: src.into(),
        dst_ip: dst.into(),
        dst_mac,
        size,
    })
}

/// Streaming reader over a text trace. Yields packets in file order and fails
/// on the first malformed line or timestamp regression.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    last_ts: f64,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            last_ts: 0.0,
            failed: false,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<Packet>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(Error::Parse {
                        line: self.line_no + 1,
                        msg: e.to_string(),
                    }));
                }
            };
            self.line_no += 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let res = match parse_record(line) {
                Err(msg) => Err(Error::Parse {
                    line: self.line_no,
                    msg,
                }),
                Ok(p) if p.timestamp < self.last_ts => Err(Error::Validation(format!(
                    "line {}: timestamp {} precedes previous {}",
                    self.line_no, p.timestamp, self.last_ts
                ))),
                Ok(p) => {
                    self.last_ts = p.timestamp;
                    Ok(p)
                }
            };
            self.failed = res.is_err();
            return Some(res);
        }
    }
}

/// Opens a trace file for streaming.
pub fn read_trace(path: impl AsRef<Path>, format: TraceFormat) -> Result<TraceReader<BufReader<File>>> {
    let path = path.as_ref();
    let TraceFormat::Csv = format;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(TraceReader::new(BufReader::new(file)))
}

/// Writes packets in the text trace format. Timestamps use the shortest
/// representation that parses back to the same `f64`.
pub fn write_trace<W: Write>(
    packets: impl IntoIterator<Item = Packet>,
    mut out: W,
) -> std::io::Result<()> {
    for p in packets {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.timestamp,
            Ipv4Addr::from(p.src_ip),
            Ipv4Addr::from(p.dst_ip),
            format_mac(p.dst_mac),
            p.size
        )?;
    }
    Ok(())
}

/// Divides every inter-arrival time by `factor`, multiplying the mean rate by
/// the same amount.
pub fn scale_trace<I>(stream: I, factor: f64) -> Result<impl Iterator<Item = Packet>>
where
    I: IntoIterator<Item = Packet>,
{
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::arg(format!("scale factor must be positive, got {factor}")));
    }
    Ok(stream.into_iter().map(move |p| p.time_scaled(factor)))
}

/// Frame size distribution for synthetic traffic.
#[derive(Debug, Clone, PartialEq)]
pub enum PacketSizeDist {
    Constant(u32),
    /// `(size, weight)` pairs; weights need not be normalised.
    Mixture(Vec<(u32, f64)>),
}

impl Default for PacketSizeDist {
    fn default() -> Self {
        PacketSizeDist::Constant(1500)
    }
}

impl PacketSizeDist {
    pub fn mean(&self) -> f64 {
        match self {
            PacketSizeDist::Constant(s) => f64::from(*s),
            PacketSizeDist::Mixture(parts) => {
                let w: f64 = parts.iter().map(|(_, w)| w).sum();
                parts.iter().map(|(s, p)| f64::from(*s) * p).sum::<f64>() / w
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let sizes: Vec<u32> = match self {
            PacketSizeDist::Constant(s) => vec![*s],
            PacketSizeDist::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::arg("empty packet size mixture"));
                }
                if parts.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite()))
                    || parts.iter().map(|(_, w)| w).sum::<f64>() <= 0.0
                {
                    return Err(Error::arg("mixture weights must be non-negative with a positive sum"));
                }
                parts.iter().map(|(s, _)| *s).collect()
            }
        };
        match sizes
            .iter()
            .find(|s| !(MIN_PACKET_BYTES..=MAX_PACKET_BYTES).contains(s))
        {
            Some(s) => Err(Error::arg(format!("packet size {s} out of range"))),
            None => Ok(()),
        }
    }
}

impl std::str::FromStr for PacketSizeDist {
    type Err = Error;

    /// `1500` or `64:0.4,576:0.2,1500:0.4`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("bad packet size distribution `{s}`"));
        if !s.contains(':') {
            return s.trim().parse().map(PacketSizeDist::Constant).map_err(|_| bad());
        }
        s.split(',')
            .map(|part| {
                let (size, w) = part.split_once(':').ok_or_else(bad)?;
                Ok((
                    size.trim().parse().map_err(|_| bad())?,
                    w.trim().parse().map_err(|_| bad())?,
                ))
            })
            .collect::<Result<Vec<_>>>()
            .map(PacketSizeDist::Mixture)
    }
}

/// Parameters of the synthetic stand-in workload.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProfile {
    pub n_end_to_end_flows: usize,
    /// Mean offered rate in bits/s.
    pub mean_aggregate_rate: f64,
    pub packet_size: PacketSizeDist,
    /// Zipf exponent of destination popularity.
    pub dst_popularity: f64,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            n_end_to_end_flows: 5000,
            mean_aggregate_rate: 3.25e9,
            packet_size: PacketSizeDist::default(),
            dst_popularity: 1.0,
            duration: 60.0,
            seed: 1,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        if self.n_end_to_end_flows == 0 {
            return Err(Error::arg("n_end_to_end_flows must be at least 1"));
        }
        if !(self.mean_aggregate_rate > 0.0 && self.mean_aggregate_rate.is_finite()) {
            return Err(Error::arg("mean_aggregate_rate must be positive"));
        }
        if !(self.dst_popularity >= 0.0 && self.dst_popularity.is_finite()) {
            return Err(Error::arg("dst_popularity must be non-negative"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::arg("duration must be non-negative"));
        }
        self.packet_size.validate()
    }
}

#[derive(Debug, Clone, Copy)]
struct EndToEndFlow {
    src_ip: u32,
    dst_ip: u32,
}

enum SizeSampler {
    Constant(u32),
    Mixture(Vec<u32>, WeightedAliasIndex<f64>),
}

/// Lazily generated synthetic trace.
///
/// Every end-to-end flow is an independent Poisson process. The superposition
/// is generated as one Poisson process at the aggregate packet rate, with each
/// arrival attributed to a flow in proportion to the flow's rate.
pub struct SyntheticTrace {
    rng: ChaCha8Rng,
    flows: Vec<EndToEndFlow>,
    flow_picker: WeightedAliasIndex<f64>,
    sizes: SizeSampler,
    gap: Exp<f64>,
    now: f64,
    duration: f64,
}

impl Iterator for SyntheticTrace {
    type Item = Packet;

    fn next(&mut self) -> Option<Packet> {
        self.now += self.gap.sample(&mut self.rng);
        if self.now >= self.duration {
            self.now = f64::INFINITY;
            return None;
        }
        let flow = self.flows[self.flow_picker.sample(&mut self.rng)];
        let size = match &self.sizes {
            SizeSampler::Constant(s) => *s,
            SizeSampler::Mixture(sizes, idx) => sizes[idx.sample(&mut self.rng)],
        };
        Some(Packet {
            timestamp: self.now,
            src_ip: flow.src_ip,
            dst_ip: flow.dst_ip,
            dst_mac: SYNTHETIC_DST_MAC,
            size,
        })
    }
}

fn unicast_address(rng: &mut ChaCha8Rng) -> u32 {
    // first octet in 1..=223
    let first = rng.random_range(1u32..=223);
    (first << 24) | rng.random_range(0..1u32 << 24)
}

/// Builds a reproducible synthetic trace from `profile`.
pub fn generate_synthetic(profile: &SyntheticProfile) -> Result<SyntheticTrace> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);

    let dst_pool: Vec<u32> = (0..DST_POOL_SIZE).map(|_| unicast_address(&mut rng)).collect();
    let popularity: Vec<f64> = (1..=DST_POOL_SIZE)
        .map(|rank| (rank as f64).powf(-profile.dst_popularity))
        .collect();
    let dst_picker = WeightedAliasIndex::new(popularity).expect("positive weights");

    let unit_exp = Exp::new(1.0).expect("valid rate");
    let mut flows = Vec::with_capacity(profile.n_end_to_end_flows);
    let mut rates = Vec::with_capacity(profile.n_end_to_end_flows);
    for _ in 0..profile.n_end_to_end_flows {
        flows.push(EndToEndFlow {
            src_ip: unicast_address(&mut rng),
            dst_ip: dst_pool[dst_picker.sample(&mut rng)],
        });
        // strictly positive so the alias table never sees an all-zero vector
        rates.push(unit_exp.sample(&mut rng) + f64::MIN_POSITIVE);
    }
    let flow_picker = WeightedAliasIndex::new(rates).expect("positive weights");

    let sizes = match &profile.packet_size {
        PacketSizeDist::Constant(s) => SizeSampler::Constant(*s),
        PacketSizeDist::Mixture(parts) => SizeSampler::Mixture(
            parts.iter().map(|(s, _)| *s).collect(),
            WeightedAliasIndex::new(parts.iter().map(|(_, w)| *w).collect())
                .map_err(|e| Error::arg(format!("packet size mixture: {e}")))?,
        ),
    };
    let packet_rate = profile.mean_aggregate_rate / (8.0 * profile.packet_size.mean());
    Ok(SyntheticTrace {
        rng,
        flows,
        flow_picker,
        sizes,
        gap: Exp::new(packet_rate).map_err(|e| Error::arg(format!("packet rate: {e}")))?,
        now: 0.0,
        duration: profile.duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# header\n\
        0.000001,10.0.0.1,192.168.1.7,00:11:22:33:44:55,1500\n\
        \n\
        0.5,10.0.0.2,192.168.1.8,00:11:22:33:44:55,64\n\
        1.0,10.0.0.3,192.168.1.9,aa:bb:cc:dd:ee:ff,9000\n";

    fn read_str(s: &str) -> Vec<Result<Packet>> {
        TraceReader::new(s.as_bytes()).collect()
    }

    #[test]
    fn reads_valid_lines_in_order() {
        let pkts: Vec<Packet> = read_str(SAMPLE).into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(pkts.len(), 3);
        assert_eq!(pkts[0].timestamp, 1e-6);
        assert_eq!(pkts[0].size, 1500);
        assert_eq!(pkts[0].src_ip, u32::from(Ipv4Addr::new(10, 0, 0, 1)));
        assert_eq!(pkts[0].dst_ip, u32::from(Ipv4Addr::new(192, 168, 1, 7)));
        assert_eq!(pkts[0].dst_mac, 0x0011_2233_4455);
        assert_eq!(pkts[2].dst_mac, 0xaabb_ccdd_eeff);
    }

    #[test]
    fn rejects_timestamp_regression() {
        let res = read_str(
            "2.0,10.0.0.1,10.0.0.2,00:00:00:00:00:01,100\n1.0,10.0.0.1,10.0.0.2,00:00:00:00:00:01,100\n",
        );
        assert!(res[0].is_ok());
        assert!(matches!(res[1], Err(Error::Validation(_))));
        assert_eq!(res.len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let res = read_str("# c\n0.1,10.0.0.1,10.0.0.2,00:00:00:00:00:01,100\n0.2,10.0.0.1,oops,00:00:00:00:00:01,100\n");
        match &res[1] {
            Err(Error::Parse { line, .. }) => assert_eq!(*line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_size() {
        let res = read_str("0.1,10.0.0.1,10.0.0.2,00:00:00:00:00:01,63\n");
        assert!(matches!(res[0], Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn mac_round_trip() {
        assert_eq!(format_mac(parse_mac("00:11:22:33:44:55").unwrap()), "00:11:22:33:44:55");
        assert!(parse_mac("00:11:22:33:44").is_none());
        assert!(parse_mac("00:11:22:33:44:5g").is_none());
    }

    fn at(ts: &[f64]) -> Vec<Packet> {
        ts.iter()
            .map(|&timestamp| Packet {
                timestamp,
                src_ip: 1,
                dst_ip: 2,
                dst_mac: 3,
                size: 100,
            })
            .collect()
    }

    #[test]
    fn scaling_divides_timestamps() {
        let out: Vec<f64> = scale_trace(at(&[0.0, 10.0, 20.0]), 10.0)
            .unwrap()
            .map(|p| p.timestamp)
            .collect();
        assert_eq!(out, vec![0.0, 1.0, 2.0]);

        let out: Vec<f64> = scale_trace(at(&[0.0, 1.0]), 0.5)
            .unwrap()
            .map(|p| p.timestamp)
            .collect();
        assert_eq!(out, vec![0.0, 2.0]);

        let same: Vec<Packet> = scale_trace(at(&[0.0, 0.3, 7.0]), 1.0).unwrap().collect();
        assert_eq!(same, at(&[0.0, 0.3, 7.0]));
    }

    #[test]
    fn scaling_rejects_non_positive_factor() {
        assert!(scale_trace(at(&[0.0]), 0.0).is_err());
        assert!(scale_trace(at(&[0.0]), -2.0).is_err());
    }

    #[test]
    fn size_distribution_parsing() {
        assert_eq!("1500".parse::<PacketSizeDist>().unwrap(), PacketSizeDist::Constant(1500));
        let mix: PacketSizeDist = "64:0.5,1500:0.5".parse().unwrap();
        assert_eq!(mix, PacketSizeDist::Mixture(vec![(64, 0.5), (1500, 0.5)]));
        assert_eq!(mix.mean(), 782.0);
        assert!("64:x".parse::<PacketSizeDist>().is_err());
    }

    #[test]
    fn zero_duration_is_empty() {
        let profile = SyntheticProfile {
            duration: 0.0,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&profile).unwrap().count(), 0);
    }

    #[test]
    fn synthetic_is_reproducible() {
        let profile = SyntheticProfile {
            duration: 0.05,
            packet_size: "64:1,1500:3".parse().unwrap(),
            ..Default::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trace(generate_synthetic(&profile).unwrap(), &mut a).unwrap();
        write_trace(generate_synthetic(&profile).unwrap(), &mut b).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);

        let other = SyntheticProfile { seed: 2, ..profile };
        let mut c = Vec::new();
        write_trace(generate_synthetic(&other).unwrap(), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_rejects_bad_profiles() {
        let bad = SyntheticProfile {
            n_end_to_end_flows: 0,
            ..Default::default()
        };
        assert!(generate_synthetic(&bad).is_err());
        let bad = SyntheticProfile {
            mean_aggregate_rate: 0.0,
            ..Default::default()
        };
        assert!(generate_synthetic(&bad).is_err());
    }
}
