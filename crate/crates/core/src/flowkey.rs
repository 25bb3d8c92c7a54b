//! Aggregated flow identity.
//!
//! Switches cannot hold one rule per source/destination pair, so packets are
//! grouped by a contiguous bit range of one IP address, optionally combined
//! with the destination MAC. Offsets count from the most significant bit, so
//! `offset 0, length 8` selects the first octet and `offset 24, length 8` the
//! last one.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::traffic::{format_mac, Packet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddressField {
    Dst,
    Src,
}

impl std::str::FromStr for AddressField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dst_ip" | "dst" => Ok(AddressField::Dst),
            "src_ip" | "src" => Ok(AddressField::Src),
            other => Err(Error::arg(format!("unknown address field `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaskSpec {
    pub field: AddressField,
    pub offset_bits: u32,
    pub length_bits: u32,
    pub combine_with_mac: bool,
}

impl Default for MaskSpec {
    /// First 8 bits of the destination address within each destination MAC.
    fn default() -> Self {
        Self {
            field: AddressField::Dst,
            offset_bits: 0,
            length_bits: 8,
            combine_with_mac: true,
        }
    }
}

impl MaskSpec {
    pub fn new(field: AddressField, offset_bits: u32, length_bits: u32, combine_with_mac: bool) -> Result<Self> {
        let spec = Self {
            field,
            offset_bits,
            length_bits,
            combine_with_mac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset_bits > 31 || !(1..=32).contains(&self.length_bits) || self.offset_bits + self.length_bits > 32 {
            return Err(Error::arg(format!(
                "mask offset {} / length {} does not fit a 32-bit address",
                self.offset_bits, self.length_bits
            )));
        }
        Ok(())
    }

    /// Number of distinct values of the masked bit range.
    pub fn key_space(&self) -> u64 {
        1u64 << self.length_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub mac_part: Option<u64>,
    pub bits_part: u32,
}

impl FlowKey {
    pub fn bits(bits_part: u32) -> Self {
        Self {
            mac_part: None,
            bits_part,
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mac_part {
            Some(mac) => write!(f, "{}/{}", format_mac(mac), self.bits_part),
            None => write!(f, "{}", self.bits_part),
        }
    }
}

pub fn extract_bits(addr: u32, offset_bits: u32, length_bits: u32) -> u32 {
    let shifted = addr >> (32 - offset_bits - length_bits);
    if length_bits == 32 {
        shifted
    } else {
        shifted & ((1u32 << length_bits) - 1)
    }
}

/// Aggregated flow of `packet` under `spec`. `spec` must be valid.
pub fn flow_key(packet: &Packet, spec: &MaskSpec) -> FlowKey {
    let addr = match spec.field {
        AddressField::Dst => packet.dst_ip,
        AddressField::Src => packet.src_ip,
    };
    FlowKey {
        mac_part: spec.combine_with_mac.then_some(packet.dst_mac),
        bits_part: extract_bits(addr, spec.offset_bits, spec.length_bits),
    }
}

/// How many distinct end-to-end (src, dst) pairs fall into each aggregated flow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowHistogram {
    pub counts: BTreeMap<FlowKey, u64>,
    pub total_original_flows: u64,
}

/// Incremental builder for [`FlowHistogram`]; partial builders over disjoint
/// stream partitions can be merged.
#[derive(Debug, Clone)]
pub struct FlowHistogramBuilder {
    spec: MaskSpec,
    pairs: HashMap<(u32, u32), FlowKey>,
}

impl FlowHistogramBuilder {
    pub fn new(spec: MaskSpec) -> Self {
        Self {
            spec,
            pairs: HashMap::new(),
        }
    }

    pub fn observe(&mut self, packet: &Packet) {
        let spec = self.spec;
        self.pairs
            .entry((packet.src_ip, packet.dst_ip))
            .or_insert_with(|| flow_key(packet, &spec));
    }

    pub fn merge(&mut self, other: FlowHistogramBuilder) {
        for (pair, key) in other.pairs {
            self.pairs.entry(pair).or_insert(key);
        }
    }

    pub fn finish(self) -> FlowHistogram {
        let mut counts = BTreeMap::new();
        for key in self.pairs.values() {
            *counts.entry(*key).or_insert(0) += 1;
        }
        FlowHistogram {
            counts,
            total_original_flows: self.pairs.len() as u64,
        }
    }
}

/// Counts each distinct (src, dst) pair once, in the bucket of its key.
///
/// A pair is bucketed by its first packet; with `combine_with_mac` a pair whose
/// MAC changes mid-trace stays in its original bucket.
pub fn flow_distribution(stream: impl IntoIterator<Item = Packet>, spec: &MaskSpec) -> FlowHistogram {
    let mut builder = FlowHistogramBuilder::new(*spec);
    for p in stream {
        builder.observe(&p);
    }
    builder.finish()
}

/// Population variance of per-bucket counts over all `key_space` buckets, with
/// unobserved keys counting as empty buckets.
pub fn histogram_variance(hist: &FlowHistogram, key_space: u64) -> Result<f64> {
    if key_space == 0 {
        return Err(Error::arg("key space must be positive"));
    }
    if let Some(max) = hist.counts.keys().map(|k| k.bits_part).max() {
        if u64::from(max) >= key_space {
            return Err(Error::arg(format!(
                "key {max} does not fit a key space of {key_space}"
            )));
        }
    }
    if hist.counts.len() as u64 > key_space {
        return Err(Error::arg(format!(
            "{} buckets exceed a key space of {key_space}",
            hist.counts.len()
        )));
    }
    let n = key_space as f64;
    let mean = hist.counts.values().sum::<u64>() as f64 / n;
    let empty = (key_space - hist.counts.len() as u64) as f64;
    let ss: f64 = hist
        .counts
        .values()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        + empty * mean * mean;
    Ok(ss / n)
}

/// Writes `key,count` rows followed by `#variance,<value>`.
pub fn write_histogram_csv<W: Write>(hist: &FlowHistogram, variance: f64, mut out: W) -> std::io::Result<()> {
    writeln!(out, "key,count")?;
    for (key, count) in &hist.counts {
        writeln!(out, "{key},{count}")?;
    }
    writeln!(out, "#variance,{variance}")
}
