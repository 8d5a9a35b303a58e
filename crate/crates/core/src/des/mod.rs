//! Event-driven simulation of one WLAN cell: an AP and `M` STAs sharing a
//! single collision domain.
//!
//! Time advances through a priority queue of events. Transmissions that start
//! at the same instant form one burst; a burst with two or more RTS/MU-RTS
//! frames is a collision. Saturated runs keep every queue full, otherwise
//! frames arrive as Poisson processes and overflow is tail-dropped.

pub mod config;
mod kernel;
pub mod metrics;
pub mod queue;
pub mod trace;

use std::io::Write;

pub use config::{Horizon, Scheme, SimConfig, Traffic};
pub use metrics::{Conservation, Metrics, Report};

use crate::error::Result;
use kernel::Kernel;
use trace::Tracer;

/// Runs one simulation to its horizon.
pub fn run(cfg: &SimConfig) -> Result<Report> {
    Kernel::new(cfg, Tracer::new(None))?.run()
}

/// Like [`run`], also writing one JSON object per channel event to `trace`.
pub fn run_traced(cfg: &SimConfig, trace: &mut dyn Write) -> Result<Report> {
    Kernel::new(cfg, Tracer::new(Some(trace)))?.run()
}
