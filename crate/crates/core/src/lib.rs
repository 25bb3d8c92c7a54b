//! Energy-aware scheduling of traffic flows over a bundle of IEEE 802.3az
//! (Energy Efficient Ethernet) links.
//!
//! The crate is organised bottom-up:
//!
//! * [`traffic`] reads, rescales and synthesises packet traces.
//! * [`flowkey`] maps packets onto aggregated flows using IP address bit masks.
//! * [`estimation`] turns cumulative per-flow byte counters into rate estimates.
//! * [`scheduling`] assigns aggregated flows to bundle ports.
//! * [`linksim`] is a discrete-event model of the bundle with LPI state machines.
//! * [`energy`] holds the analytic consumption model and the water-filling bound.
//! * [`harness`] wires everything into a periodic controller loop and parameter sweeps.

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod estimation;
pub mod flowkey;
pub mod harness;
pub mod linksim;
pub mod scheduling;
pub mod traffic;

pub use error::{Error, Result};
