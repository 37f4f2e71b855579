//! Availability-aware routing, spectrum assignment and protection for
//! flexible-grid optical networks.
//!
//! Working paths are found with a breadth-first consecutive-slot search
//! ([`rsa::candidate_paths`]) and the most available candidate is chosen.
//! Paths whose availability falls below a threshold are protected either by
//! shared backup paths ([`dsbpss`]) or by dynamically built protection cycles
//! ([`dcycle`]). [`sim`] drives the whole thing with Poisson traffic and
//! [`metrics`] turns the counters into blocking, utilization, protection
//! capacity and restorability figures.

pub mod availability;
pub mod dcycle;
pub mod dsbpss;
pub mod error;
pub mod fault;
pub mod metrics;
pub mod rsa;
pub mod sim;
pub mod spectrum;
pub mod state;
pub mod topology;

pub use error::{Error, Result};
pub use rsa::{CandidatePath, LightpathRequest, ProtectionMode};
pub use spectrum::{SlotBlock, SpectrumBitmap};
pub use state::{ConnId, NetworkState};
pub use topology::{AvailabilityPolicy, LinkId, NetworkGraph, NodeId};
