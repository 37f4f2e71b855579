//! Run counters and the five ratios derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub blocked: u64,
    pub arrived: u64,
    pub slots_blocked: u64,
    pub slots_requested: u64,
    /// Busy link-slot seconds, working and protection.
    pub slot_time_used: f64,
    /// Link-slot seconds available over the measured window.
    pub slot_time_capacity: f64,
    /// Link-slot seconds held by backup groups and cycles; a shared slot
    /// counts once.
    pub protection_slot_time: f64,
    pub protected_count: u64,
    pub needing_protection: u64,
}

impl MetricsReport {
    /// Sums the counters of independent runs.
    pub fn merge(&self, other: &MetricsReport) -> MetricsReport {
        MetricsReport {
            blocked: self.blocked + other.blocked,
            arrived: self.arrived + other.arrived,
            slots_blocked: self.slots_blocked + other.slots_blocked,
            slots_requested: self.slots_requested + other.slots_requested,
            slot_time_used: self.slot_time_used + other.slot_time_used,
            slot_time_capacity: self.slot_time_capacity + other.slot_time_capacity,
            protection_slot_time: self.protection_slot_time + other.protection_slot_time,
            protected_count: self.protected_count + other.protected_count,
            needing_protection: self.needing_protection + other.needing_protection,
        }
    }
}

pub fn blocking_probability(r: &MetricsReport) -> Result<f64> {
    if r.arrived == 0 {
        return Err(Error::NoArrivals);
    }
    Ok(r.blocked as f64 / r.arrived as f64)
}

/// Blocked slots over requested slots, guard band included in both.
pub fn bandwidth_blocking_probability(r: &MetricsReport) -> Result<f64> {
    if r.slots_requested == 0 {
        return Err(Error::NoDemand);
    }
    Ok(r.slots_blocked as f64 / r.slots_requested as f64)
}

/// Time-averaged fraction of busy slots; 0 for an empty window.
pub fn spectrum_utilization(r: &MetricsReport) -> f64 {
    if r.slot_time_capacity <= 0.0 {
        return 0.0;
    }
    r.slot_time_used / r.slot_time_capacity
}

/// Total link-slot seconds reserved for protection.
pub fn capacity_used_for_protection(r: &MetricsReport) -> f64 {
    r.protection_slot_time
}

/// Share of paths below threshold that were lifted to it; `None` when no
/// path needed protection.
pub fn restorability(r: &MetricsReport) -> Option<f64> {
    (r.needing_protection > 0).then(|| r.protected_count as f64 / r.needing_protection as f64)
}

/// Accumulates a [`MetricsReport`] while a run progresses.
///
/// Slot levels are piecewise constant between events; the caller reports the
/// level in force *before* each event via [`advance`](Self::advance). Only
/// time after `window_start` is integrated.
#[derive(Debug, Clone)]
pub struct MetricsCollector {
    window_start: f64,
    capacity_slots: usize,
    last_t: f64,
    report: MetricsReport,
}

impl MetricsCollector {
    pub fn new(window_start: f64, capacity_slots: usize) -> Self {
        Self { window_start, capacity_slots, last_t: 0.0, report: MetricsReport::default() }
    }

    pub fn window_start(&self) -> f64 {
        self.window_start
    }

    pub fn in_window(&self, t: f64) -> bool {
        t >= self.window_start
    }

    /// Integrates `busy` and `protection` link-slots from the last call up to `t`.
    pub fn advance(&mut self, t: f64, busy: usize, protection: usize) {
        let from = self.last_t.max(self.window_start);
        if t > from {
            let dt = t - from;
            self.report.slot_time_used += busy as f64 * dt;
            self.report.protection_slot_time += protection as f64 * dt;
            self.report.slot_time_capacity += self.capacity_slots as f64 * dt;
        }
        self.last_t = self.last_t.max(t);
    }

    pub fn record_blocked(&mut self, slots: usize) {
        self.report.arrived += 1;
        self.report.blocked += 1;
        self.report.slots_requested += slots as u64;
        self.report.slots_blocked += slots as u64;
    }

    pub fn record_admitted(&mut self, slots: usize, needs_protection: bool, protected: bool) {
        self.report.arrived += 1;
        self.report.slots_requested += slots as u64;
        self.report.needing_protection += needs_protection as u64;
        self.report.protected_count += protected as u64;
    }

    pub fn report(&self) -> MetricsReport {
        self.report
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(blocked: u64, arrived: u64) -> MetricsReport {
        MetricsReport { blocked, arrived, ..Default::default() }
    }

    #[test]
    fn blocking_examples() {
        assert_eq!(blocking_probability(&counts(0, 100)), Ok(0.0));
        assert_eq!(blocking_probability(&counts(100, 100)), Ok(1.0));
        assert!((blocking_probability(&counts(7, 200)).unwrap() - 0.035).abs() < 1e-15);
        assert_eq!(blocking_probability(&counts(0, 0)), Err(Error::NoArrivals));
    }

    #[test]
    fn bandwidth_blocking_examples() {
        let r = MetricsReport { slots_requested: 90, ..Default::default() };
        assert_eq!(bandwidth_blocking_probability(&r), Ok(0.0));
        let r = MetricsReport { slots_requested: 90, slots_blocked: 9, ..Default::default() };
        assert!((bandwidth_blocking_probability(&r).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(bandwidth_blocking_probability(&MetricsReport::default()), Err(Error::NoDemand));
    }

    #[test]
    fn large_blocks_push_bbp_above_bp() {
        // Ten 2-slot admits, two 9-slot blocks.
        let mut c = MetricsCollector::new(0.0, 1);
        for _ in 0..10 {
            c.record_admitted(2, false, false);
        }
        c.record_blocked(9);
        c.record_blocked(9);
        let r = c.report();
        let bp = blocking_probability(&r).unwrap();
        let bbp = bandwidth_blocking_probability(&r).unwrap();
        assert!((bp - 2.0 / 12.0).abs() < 1e-15);
        assert!((bbp - 18.0 / 38.0).abs() < 1e-15);
        assert!(bbp > bp);
    }

    #[test]
    fn restorability_examples() {
        assert_eq!(restorability(&MetricsReport::default()), None);
        let r = MetricsReport { protected_count: 5, needing_protection: 5, ..Default::default() };
        assert_eq!(restorability(&r), Some(1.0));
        let r = MetricsReport { protected_count: 3, needing_protection: 4, ..Default::default() };
        assert_eq!(restorability(&r), Some(0.75));
    }

    #[test]
    fn utilization_of_one_slot_over_window() {
        let capacity = 22 * 320;
        let mut c = MetricsCollector::new(10.0, capacity);
        c.advance(5.0, 1, 0);
        c.advance(50.0, 1, 0);
        let r = c.report();
        assert!((spectrum_utilization(&r) - 1.0 / capacity as f64).abs() < 1e-15);
        assert_eq!(spectrum_utilization(&MetricsCollector::new(0.0, capacity).report()), 0.0);
    }

    #[test]
    fn warm_up_is_not_integrated() {
        let mut c = MetricsCollector::new(10.0, 4);
        c.advance(8.0, 4, 2);
        c.advance(12.0, 2, 1);
        let r = c.report();
        assert_eq!(r.slot_time_used, 4.0);
        assert_eq!(r.protection_slot_time, 2.0);
        assert_eq!(r.slot_time_capacity, 8.0);
        assert_eq!(capacity_used_for_protection(&r), 2.0);
    }

    #[test]
    fn merge_is_associative() {
        let a = MetricsReport { blocked: 1, arrived: 3, slot_time_used: 0.5, ..Default::default() };
        let b = MetricsReport { blocked: 2, arrived: 5, protected_count: 1, needing_protection: 2, ..Default::default() };
        let c = MetricsReport { arrived: 7, slots_requested: 11, slot_time_capacity: 2.0, ..Default::default() };
        assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        assert_eq!(a.merge(&MetricsReport::default()), a);
    }
}
