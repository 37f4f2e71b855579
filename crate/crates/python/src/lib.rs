//! Python bindings: availability math, topologies with live provisioning,
//! and full simulation runs.

use flexprot_core::availability as av;
use flexprot_core::fault::inject_single_failures;
use flexprot_core::metrics::{self, MetricsReport};
use flexprot_core::rsa::{candidate_paths, Outcome};
use flexprot_core::sim::{self, TopologySource};
use flexprot_core::spectrum::demand_to_slots;
use flexprot_core::topology::{build_nsfnet, load_topology, AvailabilityPolicy, NodeId};
use flexprot_core::{ConnId, LightpathRequest, NetworkGraph, NetworkState, ProtectionMode};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_mode(mode: &str) -> PyResult<ProtectionMode> {
    mode.parse().map_err(value_err)
}

fn policy(avg_availability: f64, jitter: bool, seed: u64) -> AvailabilityPolicy {
    if jitter {
        AvailabilityPolicy::jittered(avg_availability, seed)
    } else {
        AvailabilityPolicy::uniform(avg_availability)
    }
}

#[pyfunction]
fn link_availability(mttf_h: f64, mttr_h: f64) -> f64 {
    av::link_availability(mttf_h, mttr_h)
}

#[pyfunction]
fn series_availability(links: Vec<f64>) -> f64 {
    av::series_availability(&links)
}

#[pyfunction]
fn parallel_availability(paths: Vec<f64>) -> f64 {
    av::parallel_availability(&paths)
}

/// `protected` holds (link, backup) availability pairs.
#[pyfunction]
fn series_parallel_availability(protected: Vec<(f64, f64)>, unprotected: Vec<f64>) -> f64 {
    av::series_parallel_availability(&protected, &unprotected)
}

#[pyfunction]
fn ava_dsbpss_update(a_pp: f64, a_bp: f64) -> f64 {
    av::ava_dsbpss_update(a_pp, a_bp)
}

/// Returns `(a_pp, a_pl)`.
#[pyfunction]
fn ava_dcyc_update(a_pp: f64, a_l: f64, a_bp: f64) -> PyResult<(f64, f64)> {
    av::ava_dcyc_update(a_pp, a_l, a_bp).map_err(value_err)
}

/// Sampled availability of a series path; returns `(estimate, stderr)`.
#[pyfunction]
#[pyo3(signature = (links, samples=100_000, seed=0))]
fn sample_series_availability(links: Vec<f64>, samples: u64, seed: u64) -> (f64, f64) {
    let est = av::monte_carlo_availability(&av::System::series_of(&links), samples, seed);
    (est.estimate, est.stderr)
}

#[pyfunction(name = "demand_to_slots")]
#[pyo3(signature = (rate_gbps, slot_ghz=12.5, guard_ghz=10.0))]
fn py_demand_to_slots(rate_gbps: f64, slot_ghz: f64, guard_ghz: f64) -> usize {
    demand_to_slots(rate_gbps, slot_ghz, guard_ghz)
}

/// A topology plus the live connections, backups and cycles on it.
#[pyclass(module = "flexprot")]
struct Network {
    state: NetworkState,
}

impl Network {
    fn node(&self, name: &str) -> PyResult<NodeId> {
        self.state
            .graph
            .node_id(name)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown node `{name}`")))
    }

    fn names(&self, vertices: &[NodeId]) -> Vec<String> {
        vertices.iter().map(|&v| self.state.graph.node_name(v).to_string()).collect()
    }

    fn wrap(graph: NetworkGraph) -> Self {
        Self { state: NetworkState::new(graph) }
    }
}

#[pymethods]
impl Network {
    #[staticmethod]
    #[pyo3(signature = (avg_availability=0.99, jitter=true, seed=1, slots=320))]
    fn nsfnet(avg_availability: f64, jitter: bool, seed: u64, slots: usize) -> PyResult<Self> {
        build_nsfnet(slots, &policy(avg_availability, jitter, seed)).map(Self::wrap).map_err(value_err)
    }

    /// Parses `node NAME` / `link A B KM [AVAILABILITY]` lines.
    #[staticmethod]
    #[pyo3(signature = (text, avg_availability=0.99, jitter=false, seed=1, slots=320))]
    fn from_text(text: &str, avg_availability: f64, jitter: bool, seed: u64, slots: usize) -> PyResult<Self> {
        load_topology(text, slots, &policy(avg_availability, jitter, seed)).map(Self::wrap).map_err(value_err)
    }

    fn nodes(&self) -> Vec<String> {
        self.state.graph.nodes().map(|n| self.state.graph.node_name(n).to_string()).collect()
    }

    /// `(a, b, length_km, availability, free_slots)` per link.
    fn links(&self) -> Vec<(String, String, f64, f64, usize)> {
        let g = &self.state.graph;
        g.links()
            .map(|l| {
                (
                    g.node_name(l.endpoints.0).to_string(),
                    g.node_name(l.endpoints.1).to_string(),
                    l.length_km,
                    l.availability(),
                    l.bitmap.count_free(),
                )
            })
            .collect()
    }

    #[pyo3(signature = (source, dest, slots, k=5))]
    fn candidate_paths<'py>(
        &self,
        py: Python<'py>,
        source: &str,
        dest: &str,
        slots: usize,
        k: usize,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let lr = LightpathRequest::new(self.node(source)?, self.node(dest)?, slots, k);
        candidate_paths(&self.state.graph, &lr)
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("nodes", self.names(&p.vertices))?;
                d.set_item("availability", p.availability)?;
                d.set_item("free_slots", p.bitmap.count_free())?;
                Ok(d)
            })
            .collect()
    }

    /// Provisions one request. Returns None when it is blocked.
    #[pyo3(signature = (source, dest, rate_gbps, a_th, mode="dsbpss", k=5))]
    fn provision<'py>(
        &mut self,
        py: Python<'py>,
        source: &str,
        dest: &str,
        rate_gbps: f64,
        a_th: f64,
        mode: &str,
        k: usize,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let slots = demand_to_slots(rate_gbps, 12.5, 10.0);
        let lr = LightpathRequest::new(self.node(source)?, self.node(dest)?, slots, k);
        let Outcome::Provisioned(p) = self.state.provision(&lr, a_th, parse_mode(mode)?) else {
            return Ok(None);
        };
        let conn = self.state.connection(p.conn).expect("just provisioned");
        let d = PyDict::new(py);
        d.set_item("id", p.conn.0)?;
        d.set_item("nodes", self.names(&conn.vertices))?;
        d.set_item("first_slot", p.block.start)?;
        d.set_item("slots", p.block.len)?;
        d.set_item("a_p", p.a_p_max)?;
        d.set_item("a_pp", p.a_pp_max)?;
        d.set_item("needs_protection", p.needs_protection)?;
        d.set_item("protected", p.protected)?;
        d.set_item("backups", p.backups.iter().map(|b| self.names(&b.vertices)).collect::<Vec<_>>())?;
        d.set_item("cycles", p.cycle_protections.iter().map(|c| c.cycle).collect::<Vec<_>>())?;
        Ok(Some(d))
    }

    fn release(&mut self, conn: u64) -> PyResult<()> {
        self.state.release(ConnId(conn)).map_err(value_err)
    }

    fn connection_count(&self) -> usize {
        self.state.connection_count()
    }

    fn working_slots(&self) -> usize {
        self.state.working_slots()
    }

    fn protection_slots(&self) -> usize {
        self.state.protection_slots()
    }

    fn is_idle(&self) -> bool {
        self.state.is_idle()
    }

    /// Raises ValueError if spectrum ownership is inconsistent.
    fn audit(&self) -> PyResult<()> {
        self.state.audit().map_err(PyValueError::new_err)
    }

    /// Fails each link in turn and tries to recover the affected paths.
    fn single_failures<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = inject_single_failures(&self.state);
        let d = PyDict::new(py);
        d.set_item("sound", r.is_sound())?;
        d.set_item("conflicts", r.total_conflicts)?;
        d.set_item("affected", r.per_link.iter().map(|l| l.affected).sum::<usize>())?;
        d.set_item("restored", r.per_link.iter().map(|l| l.restored).sum::<usize>())?;
        d.set_item("protected_unrestorable", r.protected_unrestorable.len())?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, links={}, connections={})",
            self.state.graph.node_count(),
            self.state.graph.link_count(),
            self.state.connection_count()
        )
    }
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("bp", metrics::blocking_probability(r).ok())?;
    d.set_item("bbp", metrics::bandwidth_blocking_probability(r).ok())?;
    d.set_item("utilization", metrics::spectrum_utilization(r))?;
    d.set_item("protection_capacity", metrics::capacity_used_for_protection(r))?;
    d.set_item("restorability", metrics::restorability(r))?;
    d.set_item("arrived", r.arrived)?;
    d.set_item("blocked", r.blocked)?;
    d.set_item("needing_protection", r.needing_protection)?;
    d.set_item("protected", r.protected_count)?;
    Ok(d)
}

/// Runs one simulation and returns its metrics as a dict. `topology` is
/// topology file text; NSFNET when omitted.
#[pyfunction]
#[pyo3(signature = (
    mode="dsbpss", load_erlang=15.0, a_th=0.99, avg_availability=0.99,
    n_requests=100_000, seed=1, k=5, jitter=true, topology=None,
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    mode: &str,
    load_erlang: f64,
    a_th: f64,
    avg_availability: f64,
    n_requests: u64,
    seed: u64,
    k: usize,
    jitter: bool,
    topology: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let sc = sim::Scenario {
        mode: parse_mode(mode)?,
        load_erlang,
        a_th,
        avg_link_availability: avg_availability,
        n_requests,
        seed,
        k,
        jitter,
        topology: topology.map_or(TopologySource::Nsfnet, TopologySource::Inline),
        ..sim::Scenario::default()
    };
    let r = py.detach(|| sim::run(&sc)).map_err(value_err)?;
    report_dict(py, &r)
}

#[pymodule]
fn flexprot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(link_availability, m)?)?;
    m.add_function(wrap_pyfunction!(series_availability, m)?)?;
    m.add_function(wrap_pyfunction!(parallel_availability, m)?)?;
    m.add_function(wrap_pyfunction!(series_parallel_availability, m)?)?;
    m.add_function(wrap_pyfunction!(ava_dsbpss_update, m)?)?;
    m.add_function(wrap_pyfunction!(ava_dcyc_update, m)?)?;
    m.add_function(wrap_pyfunction!(sample_series_availability, m)?)?;
    m.add_function(wrap_pyfunction!(py_demand_to_slots, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<Network>()?;
    Ok(())
}
