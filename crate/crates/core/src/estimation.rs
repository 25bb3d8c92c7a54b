//! Per-interval demand estimation from cumulative byte counters, the way a
//! controller polling flow-rule statistics sees them.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::flowkey::FlowKey;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCounter {
    pub cumulative_bytes: u64,
    pub first_seen: f64,
    /// Value of `cumulative_bytes` at the previous estimate.
    pub last_cumulative: u64,
    /// Consecutive estimates with no traffic.
    idle_intervals: u32,
}

/// Byte counters keyed by aggregated flow.
#[derive(Debug, Clone, Default)]
pub struct FlowCounters {
    flows: HashMap<FlowKey, FlowCounter>,
}

/// Estimated rate of each aggregated flow, in bits/s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemandMap(pub BTreeMap<FlowKey, f64>);

impl DemandMap {
    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, key: &FlowKey) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FlowKey, &f64)> {
        self.0.iter()
    }
}

impl FromIterator<(FlowKey, f64)> for DemandMap {
    fn from_iter<T: IntoIterator<Item = (FlowKey, f64)>>(iter: T) -> Self {
        DemandMap(iter.into_iter().collect())
    }
}

impl FlowCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &FlowKey) -> Option<&FlowCounter> {
        self.flows.get(key)
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn record_packet(&mut self, key: FlowKey, size: u32, now: f64) {
        let c = self.flows.entry(key).or_insert(FlowCounter {
            cumulative_bytes: 0,
            first_seen: now,
            last_cumulative: 0,
            idle_intervals: 0,
        });
        c.cumulative_bytes += u64::from(size);
    }

    /// Rates over `[interval_start, interval_end)` from counter deltas.
    ///
    /// Flows first seen inside the interval are scaled by the part of the
    /// interval they were active for. A flow with no traffic is reported at
    /// rate 0 for two consecutive intervals and evicted after the second.
    pub fn estimate_rates(&mut self, interval_start: f64, interval_end: f64) -> Result<DemandMap> {
        if !(interval_end > interval_start) {
            return Err(Error::arg(format!(
                "empty estimation interval [{interval_start}, {interval_end})"
            )));
        }
        let mut demands = BTreeMap::new();
        self.flows.retain(|key, c| {
            let delta = c.cumulative_bytes - c.last_cumulative;
            c.last_cumulative = c.cumulative_bytes;
            let active_from = if c.first_seen >= interval_start {
                c.first_seen
            } else {
                interval_start
            };
            let rate = if delta == 0 {
                c.idle_intervals += 1;
                0.0
            } else {
                c.idle_intervals = 0;
                delta as f64 * 8.0 / (interval_end - active_from)
            };
            demands.insert(*key, rate);
            c.idle_intervals < 2
        });
        Ok(DemandMap(demands))
    }
}
