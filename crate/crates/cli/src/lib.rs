//! Sweeps of the flexprot simulator over availability, threshold, load and
//! protection mode, with CSV and JSON output.

pub mod config;
pub mod output;
pub mod sweep;
