//! Discrete-event driver: Poisson arrivals, exponential holding times,
//! provisioning on arrival and teardown on departure.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{MetricsCollector, MetricsReport};
use crate::rsa::{LightpathRequest, Outcome, ProtectionMode, DEFAULT_K};
use crate::spectrum::demand_to_slots;
use crate::state::{ConnId, NetworkState};
use crate::topology::{
    build_nsfnet, load_topology, AvailabilityPolicy, NetworkGraph, NodeId, DEFAULT_SLOT_COUNT,
};

const TRAFFIC_STREAM: u64 = 0;
const AVAILABILITY_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologySource {
    Nsfnet,
    /// Topology file contents.
    Inline(String),
}

/// Whether `load_erlang` is per source node or for the whole network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadBasis {
    PerNode,
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub topology: TopologySource,
    pub load_erlang: f64,
    pub load_basis: LoadBasis,
    pub mean_holding_s: f64,
    pub b_max_gbps: u32,
    pub slot_ghz: f64,
    pub guard_ghz: f64,
    pub k: usize,
    pub a_th: f64,
    pub mode: ProtectionMode,
    pub avg_link_availability: f64,
    /// Spread link availabilities around the average instead of using it
    /// for every link.
    pub jitter: bool,
    pub n_requests: u64,
    pub seed: u64,
    pub slot_count: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            topology: TopologySource::Nsfnet,
            load_erlang: 15.0,
            load_basis: LoadBasis::PerNode,
            mean_holding_s: 1.0,
            b_max_gbps: 100,
            slot_ghz: 12.5,
            guard_ghz: 10.0,
            k: DEFAULT_K,
            a_th: 0.99,
            mode: ProtectionMode::Dsbpss,
            avg_link_availability: 0.99,
            jitter: true,
            n_requests: 100_000,
            seed: 1,
            slot_count: DEFAULT_SLOT_COUNT,
        }
    }
}

fn unit_interval(x: f64) -> bool {
    x > 0.0 && x <= 1.0
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidScenario(what.to_string()));
        if !(self.load_erlang > 0.0 && self.load_erlang.is_finite()) {
            return bad("load_erlang must be positive");
        }
        if !(self.mean_holding_s > 0.0 && self.mean_holding_s.is_finite()) {
            return bad("mean_holding_s must be positive");
        }
        if self.b_max_gbps == 0 {
            return bad("b_max_gbps must be at least 1");
        }
        if !(self.slot_ghz > 0.0) || !(self.guard_ghz >= 0.0) {
            return bad("slot width must be positive and guard band non-negative");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !unit_interval(self.a_th) || !unit_interval(self.avg_link_availability) {
            return bad("availabilities must lie in (0, 1]");
        }
        if self.n_requests == 0 {
            return bad("n_requests must be at least 1");
        }
        if self.slot_count == 0 {
            return bad("slot_count must be at least 1");
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn availability_policy(&self) -> AvailabilityPolicy {
        if self.jitter {
            AvailabilityPolicy::jittered(self.avg_link_availability, self.rng(AVAILABILITY_STREAM).next_u64())
        } else {
            AvailabilityPolicy::uniform(self.avg_link_availability)
        }
    }

    pub fn build_graph(&self) -> Result<NetworkGraph> {
        let policy = self.availability_policy();
        match &self.topology {
            TopologySource::Nsfnet => build_nsfnet(self.slot_count, &policy),
            TopologySource::Inline(text) => load_topology(text, self.slot_count, &policy),
        }
    }

    /// Network-wide arrival rate `λ = ρ·μ`, times the node count for a
    /// per-node load.
    pub fn arrival_rate(&self, node_count: usize) -> f64 {
        let per = match self.load_basis {
            LoadBasis::PerNode => node_count as f64,
            LoadBasis::Network => 1.0,
        };
        self.load_erlang * per / self.mean_holding_s
    }

    /// End of the warm-up period: three mean holding times.
    pub fn warm_up_s(&self) -> f64 {
        3.0 * self.mean_holding_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub request: LightpathRequest,
    pub rate_gbps: u32,
}

/// The arrival sequence of a scenario, lazily generated from its seed.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    rng: ChaCha8Rng,
    inter: Exp<f64>,
    holding: Exp<f64>,
    node_count: usize,
    b_max: u32,
    slot_ghz: f64,
    guard_ghz: f64,
    k: usize,
    remaining: u64,
    clock: f64,
}

impl Iterator for ArrivalStream {
    type Item = Arrival;

    fn next(&mut self) -> Option<Arrival> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.clock += self.inter.sample(&mut self.rng);
        let holding_s = self.holding.sample(&mut self.rng);
        let s = self.rng.random_range(0..self.node_count);
        let mut d = self.rng.random_range(0..self.node_count - 1);
        if d >= s {
            d += 1;
        }
        let rate_gbps = self.rng.random_range(1..=self.b_max);
        let slots = demand_to_slots(rate_gbps as f64, self.slot_ghz, self.guard_ghz);
        let mut request = LightpathRequest::new(NodeId(s), NodeId(d), slots, self.k);
        request.arrival_s = self.clock;
        request.holding_s = holding_s;
        Some(Arrival { request, rate_gbps })
    }
}

pub fn generate_arrivals(sc: &Scenario, node_count: usize) -> Result<ArrivalStream> {
    sc.validate()?;
    if node_count < 2 {
        return Err(Error::InvalidScenario("need at least two nodes".into()));
    }
    let rate = sc.arrival_rate(node_count);
    Ok(ArrivalStream {
        rng: sc.rng(TRAFFIC_STREAM),
        inter: Exp::new(rate).map_err(|e| Error::InvalidScenario(e.to_string()))?,
        holding: Exp::new(1.0 / sc.mean_holding_s).map_err(|e| Error::InvalidScenario(e.to_string()))?,
        node_count,
        b_max: sc.b_max_gbps,
        slot_ghz: sc.slot_ghz,
        guard_ghz: sc.guard_ghz,
        k: sc.k,
        remaining: sc.n_requests,
        clock: 0.0,
    })
}

#[derive(Debug, Clone, Copy)]
struct Departure {
    time: f64,
    seq: u64,
    conn: ConnId,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Departure {}

impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

/// A run that can be paused between events, e.g. to inspect or fault-test
/// the network mid-way.
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: Scenario,
    state: NetworkState,
    arrivals: std::iter::Peekable<ArrivalStream>,
    departures: BinaryHeap<Reverse<Departure>>,
    collector: MetricsCollector,
    seq: u64,
    arrivals_done: u64,
    audit: bool,
}

impl Simulator {
    pub fn new(sc: &Scenario) -> Result<Self> {
        sc.validate()?;
        let graph = sc.build_graph()?;
        let arrivals = generate_arrivals(sc, graph.node_count())?.peekable();
        let collector = MetricsCollector::new(sc.warm_up_s(), graph.total_slots());
        Ok(Self {
            scenario: sc.clone(),
            state: NetworkState::new(graph),
            arrivals,
            departures: BinaryHeap::new(),
            collector,
            seq: 0,
            arrivals_done: 0,
            audit: false,
        })
    }

    /// Audit slot ownership after every event. Slow; for tests.
    pub fn with_audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn arrivals_done(&self) -> u64 {
        self.arrivals_done
    }

    pub fn live_connections(&self) -> usize {
        self.departures.len()
    }

    /// Processes the next event; `false` once nothing is left.
    pub fn step(&mut self) -> Result<bool> {
        let next_arrival = self.arrivals.peek().map(|a| a.request.arrival_s);
        let next_departure = self.departures.peek().map(|d| d.0.time);
        match (next_arrival, next_departure) {
            (None, None) => return Ok(false),
            (Some(ta), Some(td)) if td <= ta => self.depart()?,
            (None, Some(_)) => self.depart()?,
            (Some(_), _) => self.arrive(),
        }
        if self.audit {
            self.state.audit().map_err(Error::InvalidScenario)?;
        }
        Ok(true)
    }

    fn integrate_to(&mut self, t: f64) {
        // The measured window closes with the last arrival.
        if self.arrivals.peek().is_some() {
            let busy = self.state.graph.busy_slots();
            self.collector.advance(t, busy, busy - self.state.working_slots());
        }
    }

    fn depart(&mut self) -> Result<()> {
        let Reverse(d) = self.departures.pop().expect("peeked");
        self.integrate_to(d.time);
        self.state.release(d.conn)
    }

    fn arrive(&mut self) {
        let t = self.arrivals.peek().expect("peeked").request.arrival_s;
        self.integrate_to(t);
        let a = self.arrivals.next().expect("peeked");
        self.arrivals_done += 1;
        let lr = &a.request;
        let outcome = self.state.provision(lr, self.scenario.a_th, self.scenario.mode);
        let counted = self.collector.in_window(t);
        match outcome {
            Outcome::Blocked => {
                if counted {
                    self.collector.record_blocked(lr.slots_needed);
                }
            }
            Outcome::Provisioned(p) => {
                if counted {
                    self.collector.record_admitted(lr.slots_needed, p.needs_protection, p.protected);
                }
                self.departures.push(Reverse(Departure { time: t + lr.holding_s, seq: self.seq, conn: p.conn }));
                self.seq += 1;
            }
        }
    }

    /// Runs until `n` arrivals in total have been processed (or the stream ends).
    pub fn run_until_arrivals(&mut self, n: u64) -> Result<()> {
        while self.arrivals_done < n && self.arrivals.peek().is_some() {
            self.step()?;
        }
        Ok(())
    }

    /// Processes every remaining event, departures included.
    pub fn finish(&mut self) -> Result<MetricsReport> {
        while self.step()? {}
        Ok(self.collector.report())
    }

    pub fn report(&self) -> MetricsReport {
        self.collector.report()
    }

    pub fn into_state(self) -> NetworkState {
        self.state
    }
}

/// Runs a scenario to completion.
pub fn run(sc: &Scenario) -> Result<MetricsReport> {
    Simulator::new(sc)?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: u64) -> Scenario {
        Scenario { n_requests: n, ..Scenario::default() }
    }

    #[test]
    fn stream_is_deterministic() {
        let sc = small(200);
        let a: Vec<_> = generate_arrivals(&sc, 14).unwrap().collect();
        let b: Vec<_> = generate_arrivals(&sc, 14).unwrap().collect();
        assert_eq!(a, b);
        let other: Vec<_> = generate_arrivals(&Scenario { seed: 2, ..sc }, 14).unwrap().collect();
        assert_ne!(a, other);
    }

    #[test]
    fn stream_statistics() {
        let sc = small(100_000);
        let arrivals: Vec<_> = generate_arrivals(&sc, 14).unwrap().collect();
        let rate = sc.arrival_rate(14);
        let mean_gap = arrivals.last().unwrap().request.arrival_s / arrivals.len() as f64;
        assert!((mean_gap * rate - 1.0).abs() < 0.01, "mean gap {mean_gap} vs {}", 1.0 / rate);
        let mean_hold: f64 = arrivals.iter().map(|a| a.request.holding_s).sum::<f64>() / arrivals.len() as f64;
        assert!((mean_hold - sc.mean_holding_s).abs() < 0.01 * sc.mean_holding_s);
        for a in &arrivals {
            let r = &a.request;
            assert_ne!(r.source, r.dest);
            assert!(r.source.0 < 14 && r.dest.0 < 14);
            assert!((1..=100).contains(&a.rate_gbps));
            assert!((2..=9).contains(&r.slots_needed));
        }
        assert!(arrivals.iter().any(|a| a.request.slots_needed == 2));
        assert!(arrivals.iter().any(|a| a.request.slots_needed == 9));
    }

    #[test]
    fn per_node_load_scales_rate() {
        let sc = Scenario { load_erlang: 20.0, mean_holding_s: 2.0, ..Scenario::default() };
        assert_eq!(sc.arrival_rate(14), 140.0);
        let net = Scenario { load_basis: LoadBasis::Network, ..sc };
        assert_eq!(net.arrival_rate(14), 10.0);
    }

    #[test]
    fn tiny_load_never_blocks() {
        let sc = Scenario { load_erlang: 0.001, n_requests: 50, ..Scenario::default() };
        let r = run(&sc).unwrap();
        assert_eq!(r.blocked, 0);
    }

    #[test]
    fn runs_are_reproducible_and_conserve_spectrum() {
        for mode in [ProtectionMode::None, ProtectionMode::Dsbpss, ProtectionMode::Dcycles] {
            let sc = Scenario { mode, n_requests: 1500, a_th: 0.999, ..Scenario::default() };
            let mut sim = Simulator::new(&sc).unwrap().with_audit(true);
            let r1 = sim.finish().unwrap();
            assert!(sim.state().is_idle(), "{mode}: resources left after draining");
            let r2 = run(&sc).unwrap();
            assert_eq!(r1, r2);
            assert!(r1.arrived > 0 && r1.blocked <= r1.arrived);
            assert!(r1.protected_count <= r1.needing_protection);
        }
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        for sc in [
            Scenario { load_erlang: 0.0, ..Scenario::default() },
            Scenario { a_th: 1.5, ..Scenario::default() },
            Scenario { n_requests: 0, ..Scenario::default() },
            Scenario { k: 0, ..Scenario::default() },
        ] {
            assert!(matches!(run(&sc), Err(Error::InvalidScenario(_))));
        }
    }

    #[test]
    fn scenario_round_trips_through_json() {
        let sc = Scenario { mode: ProtectionMode::Dcycles, ..Scenario::default() };
        let text = serde_json::to_string(&sc).unwrap();
        assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), sc);
    }
}
