//! Flow-to-port assignment.
//!
//! Every algorithm places whole aggregated flows (flows are never split).
//! Flows are handled in order of decreasing estimated demand, ties broken by
//! ascending [`FlowKey`], so the output is a pure function of its inputs.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimation::DemandMap;
use crate::flowkey::FlowKey;

/// Relative slack on capacity comparisons, absorbs float rounding in sums.
const FIT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleConfig {
    pub n_ports: usize,
    /// Bits/s, identical for all ports.
    pub port_capacity: f64,
}

impl BundleConfig {
    pub fn new(n_ports: usize, port_capacity: f64) -> Result<Self> {
        let b = Self {
            n_ports,
            port_capacity,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ports == 0 {
            return Err(Error::arg("bundle needs at least one port"));
        }
        if !(self.port_capacity > 0.0 && self.port_capacity.is_finite()) {
            return Err(Error::arg("port capacity must be positive"));
        }
        Ok(())
    }

    pub fn total_capacity(&self) -> f64 {
        self.n_ports as f64 * self.port_capacity
    }
}

/// Placement of every demanded flow on a port.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub ports: BTreeMap<FlowKey, usize>,
    /// Estimated load per port, bits/s.
    pub loads: Vec<f64>,
    /// Flows per port.
    pub flow_counts: Vec<usize>,
    /// Ports the algorithm considered usable this interval.
    pub active_ports: usize,
}

impl Assignment {
    fn empty(n_ports: usize) -> Self {
        Self {
            ports: BTreeMap::new(),
            loads: vec![0.0; n_ports],
            flow_counts: vec![0; n_ports],
            active_ports: 0,
        }
    }

    fn place(&mut self, key: FlowKey, demand: f64, port: usize) {
        self.ports.insert(key, port);
        self.loads[port] += demand;
        self.flow_counts[port] += 1;
    }

    pub fn port_of(&self, key: &FlowKey) -> Option<usize> {
        self.ports.get(key).copied()
    }

    /// Ports carrying at least one flow.
    pub fn used_ports(&self) -> usize {
        self.flow_counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn flows_on(&self, port: usize) -> impl Iterator<Item = &FlowKey> {
        self.ports
            .iter()
            .filter(move |(_, &p)| p == port)
            .map(|(k, _)| k)
    }
}

/// Demands sorted by decreasing rate, ties by ascending key.
pub fn sorted_demands(demands: &DemandMap) -> Vec<(FlowKey, f64)> {
    let mut v: Vec<(FlowKey, f64)> = demands.iter().map(|(k, d)| (*k, *d)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

fn least_loaded(loads: &[f64]) -> usize {
    let mut best = 0;
    for (i, l) in loads.iter().enumerate().skip(1) {
        if *l < loads[best] {
            best = i;
        }
    }
    best
}

/// Uniformly random port for a flow the controller has no history for.
pub fn assign_random<R: Rng + ?Sized>(_key: &FlowKey, bundle: &BundleConfig, rng: &mut R) -> usize {
    rng.random_range(0..bundle.n_ports)
}

/// Load balancing over every port: each flow goes to the currently
/// least-loaded port.
pub fn assign_equitable(demands: &DemandMap, bundle: &BundleConfig) -> Assignment {
    spread(demands, bundle, bundle.n_ports)
}

fn spread(demands: &DemandMap, bundle: &BundleConfig, active: usize) -> Assignment {
    let mut out = Assignment::empty(bundle.n_ports);
    out.active_ports = active;
    for (key, demand) in sorted_demands(demands) {
        let port = least_loaded(&out.loads[..active]);
        out.place(key, demand, port);
    }
    out
}

fn fill<F>(demands: &DemandMap, bundle: &BundleConfig, fits: F) -> Assignment
where
    F: Fn(f64, usize, f64) -> bool,
{
    let mut out = Assignment::empty(bundle.n_ports);
    let mut order: Vec<usize> = (0..bundle.n_ports).collect();
    for (key, demand) in sorted_demands(demands) {
        // most occupied first, lower index on ties
        order.sort_by(|&a, &b| out.loads[b].total_cmp(&out.loads[a]).then(a.cmp(&b)));
        let port = order
            .iter()
            .copied()
            .find(|&p| fits(out.loads[p], out.flow_counts[p], demand))
            .unwrap_or_else(|| least_loaded(&out.loads));
        out.place(key, demand, port);
    }
    out.active_ports = out.used_ports();
    out
}

/// Greedy packing: each flow goes to the most occupied port that still has
/// room for it, opening a new port only when none does. Flows that fit
/// nowhere go to the least-loaded port.
pub fn assign_greedy(demands: &DemandMap, bundle: &BundleConfig) -> Assignment {
    let cap = bundle.port_capacity * (1.0 + FIT_EPS);
    fill(demands, bundle, |load, _, d| load + d <= cap)
}

/// Greedy packing with headroom: a port already holding `k` flows accepts
/// another only if the result stays below `capacity - bound / (k + 1)`.
pub fn assign_bounded_greedy(demands: &DemandMap, bundle: &BundleConfig, bound: f64) -> Result<Assignment> {
    if !(0.0..=bundle.port_capacity).contains(&bound) {
        return Err(Error::arg(format!(
            "bound {bound} outside [0, {}]",
            bundle.port_capacity
        )));
    }
    let c = bundle.port_capacity;
    Ok(fill(demands, bundle, |load, k, d| {
        load + d <= (c - bound / (k as f64 + 1.0)) + c * FIT_EPS
    }))
}

/// Number of ports the conservative algorithm keeps active for a total
/// estimated demand.
pub fn conservative_active_ports(total_demand: f64, bundle: &BundleConfig, margin: f64) -> usize {
    let needed = total_demand * (1.0 + margin) / bundle.port_capacity;
    let needed = (needed - 1e-9).ceil();
    (needed.max(1.0) as usize).min(bundle.n_ports)
}

/// Sizes the active port set from total demand plus a safety margin, then
/// balances flows evenly across it.
pub fn assign_conservative(demands: &DemandMap, bundle: &BundleConfig, margin: f64) -> Result<Assignment> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::arg(format!("margin must be non-negative, got {margin}")));
    }
    let active = conservative_active_ports(demands.total(), bundle, margin);
    Ok(spread(demands, bundle, active))
}

/// Scheduling policy selected for an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Equitable,
    Greedy,
    BoundedGreedy { bound: f64 },
    Conservative { margin: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Equitable => "equitable",
            Algorithm::Greedy => "greedy",
            Algorithm::BoundedGreedy { .. } => "bounded-greedy",
            Algorithm::Conservative { .. } => "conservative",
        }
    }

    pub fn assign(&self, demands: &DemandMap, bundle: &BundleConfig) -> Result<Assignment> {
        match *self {
            Algorithm::Equitable => Ok(assign_equitable(demands, bundle)),
            Algorithm::Greedy => Ok(assign_greedy(demands, bundle)),
            Algorithm::BoundedGreedy { bound } => assign_bounded_greedy(demands, bundle, bound),
            Algorithm::Conservative { margin } => assign_conservative(demands, bundle, margin),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
