//! Simulation and analysis of a unified down/up-link MU-MIMO MAC for
//! 802.11ac-style WLANs.
//!
//! The crate is split along the same lines as the protocol itself:
//!
//! - [`timing`]: airtimes, preambles and protocol timers. Every duration used
//!   by the simulator or the saturation model comes from here.
//! - [`frames`]: the MAC frame taxonomy and group addressing.
//! - [`protocol`]: AP and STA state machines for the two-round scheme.
//! - [`limac`]: the parallel-control-frame reference scheme used for comparison.
//! - [`des`]: the event-driven kernel, traffic, queues and metrics.
//! - [`analytic`]: the saturation throughput model and the Monte-Carlo
//!   estimator for the second contention round.
//! - [`experiment`]: scenarios, sweeps, analytic/simulation comparison and
//!   tabular output.

pub mod analytic;
pub mod des;
pub mod error;
pub mod experiment;
pub mod frames;
pub mod limac;
pub mod parallel;
pub mod protocol;
pub mod time;
pub mod timing;

pub use error::{Error, Result};
pub use time::SimTime;
