//! Analytic 802.3az consumption under frame transmission mode, and the
//! water-filling lower bound for a bundle.
//!
//! Consumption is normalised to an always-active port: 1.0 means full power,
//! `sigma_off` is the fraction drawn while in Low Power Idle.

use crate::error::{Error, Result};
use crate::scheduling::BundleConfig;

/// Sleep transition duration from the 10GBASE-T standard, seconds.
pub const T_SLEEP_10G: f64 = 2.28e-6;
/// Wake transition duration from the 10GBASE-T standard, seconds.
pub const T_WAKE_10G: f64 = 4.48e-6;
/// LPI power as a fraction of active power.
pub const SIGMA_OFF: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Packet service rate (1 / mean transmission time), packets/s.
    pub mu: f64,
    pub t_sleep: f64,
    pub t_wake: f64,
    pub sigma_off: f64,
}

impl EnergyParams {
    /// Parameters for a link of `capacity` bits/s carrying packets of
    /// `mean_packet_bytes` on average.
    pub fn for_link(capacity: f64, mean_packet_bytes: f64, t_sleep: f64, t_wake: f64, sigma_off: f64) -> Self {
        Self {
            mu: capacity / (8.0 * mean_packet_bytes),
            t_sleep,
            t_wake,
            sigma_off,
        }
    }

    /// 10 Gb/s link with standard transition times and `sigma_off = 0.1`.
    pub fn standard_10g(mean_packet_bytes: f64) -> Self {
        Self::for_link(10e9, mean_packet_bytes, T_SLEEP_10G, T_WAKE_10G, SIGMA_OFF)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.mu.is_finite()
            && self.t_sleep >= 0.0
            && self.t_wake >= 0.0
            && self.sigma_off > 0.0
            && self.sigma_off <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid energy parameters {self:?}")))
        }
    }
}

/// Expected LPI dwell per idle period for Poisson arrivals: the link only
/// reaches LPI if nothing arrives during the sleep transition, then waits an
/// exponential time for the next arrival.
pub fn expected_toff(rho: f64, params: &EnergyParams) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::arg(format!("load {rho} outside (0, 1]")));
    }
    let lambda = params.mu * rho;
    Ok((-lambda * params.t_sleep).exp() / lambda)
}

/// Normalised consumption of one link at load `rho`.
pub fn sigma(rho: f64, params: &EnergyParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::arg(format!("load {rho} outside [0, 1]")));
    }
    if rho == 0.0 {
        return Ok(params.sigma_off);
    }
    let toff = expected_toff(rho, params)?;
    let lpi_share = toff / (toff + params.t_sleep + params.t_wake);
    Ok(1.0 - (1.0 - params.sigma_off) * (1.0 - rho) * lpi_share)
}

/// Sequential water-filling: fill each port to capacity before opening the
/// next one.
pub fn waterfill(total_load: f64, bundle: &BundleConfig) -> Result<Vec<f64>> {
    bundle.validate()?;
    let cap = bundle.port_capacity;
    if !(total_load >= 0.0) || total_load > bundle.total_capacity() * (1.0 + 1e-12) {
        return Err(Error::arg(format!(
            "load {total_load} outside [0, {}]",
            bundle.total_capacity()
        )));
    }
    let mut remaining = total_load.min(bundle.total_capacity());
    Ok((0..bundle.n_ports)
        .map(|_| {
            let l = remaining.min(cap);
            remaining -= l;
            l
        })
        .collect())
}

/// Mean per-port consumption of the water-filling allocation of `total_load`.
pub fn bundle_lower_bound(total_load: f64, bundle: &BundleConfig, params: &EnergyParams) -> Result<f64> {
    let loads = waterfill(total_load, bundle)?;
    mean_sigma(&loads, bundle.port_capacity, params)
}

/// Mean consumption over ports carrying the given loads.
pub fn mean_sigma(loads: &[f64], capacity: f64, params: &EnergyParams) -> Result<f64> {
    let mut sum = 0.0;
    for l in loads {
        sum += sigma((l / capacity).min(1.0), params)?;
    }
    Ok(sum / loads.len() as f64)
}

/// Time spent in each link mode over some observation window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModeTimes {
    pub active: f64,
    pub going_to_sleep: f64,
    pub lpi: f64,
    pub waking: f64,
}

impl ModeTimes {
    pub fn total(&self) -> f64 {
        self.active + self.going_to_sleep + self.lpi + self.waking
    }
}

/// Time-averaged consumption: transitions draw full power, LPI draws
/// `sigma_off`.
pub fn measured_consumption(t: &ModeTimes, sigma_off: f64) -> Result<f64> {
    if [t.active, t.going_to_sleep, t.lpi, t.waking].iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::arg("negative mode time"));
    }
    let total = t.total();
    if total <= 0.0 {
        return Err(Error::arg("zero observation time"));
    }
    Ok((t.active + t.going_to_sleep + t.waking + sigma_off * t.lpi) / total)
}
