//! Photon-count models and error exponents for covert quantum sensing.
//!
//! Alice probes a weakly reflecting target hidden in one of `m` range slots
//! while Eve, tapping the same thermal channel, tries to tell whether any
//! probe was sent at all. The crate computes both parties' Chernoff
//! exponents from exact truncated count distributions, the resulting
//! covertness trade-off, and a Monte Carlo check of the exponents.

pub mod bottleneck;
pub mod chernoff;
pub mod error;
pub mod montecarlo;
pub mod photon_stats;
pub mod sensing;

pub use error::{Error, Result};
