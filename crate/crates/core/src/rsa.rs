//! Consecutive-slot routing and spectrum assignment.
//!
//! [`candidate_paths`] grows loop-free paths from the source one hop at a
//! time, keeping only those whose running slot intersection still holds a
//! long enough free run. The first `k` paths to reach the destination are
//! returned in hop order, each with its availability product.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::availability::meets_threshold;
use crate::dcycle::{self, CycleProtection};
use crate::dsbpss::{self, BackupPath};
use crate::error::{Error, Result};
use crate::spectrum::{SlotBlock, SpectrumBitmap};
use crate::state::{ConnId, Connection, NetworkState};
use crate::topology::{LinkId, NetworkGraph, NodeId};

/// Number of candidate paths computed per request unless configured.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct LightpathRequest {
    pub source: NodeId,
    pub dest: NodeId,
    /// Contiguous slots required, guard band included.
    pub slots_needed: usize,
    pub k: usize,
    pub arrival_s: f64,
    pub holding_s: f64,
}

impl LightpathRequest {
    pub fn new(source: NodeId, dest: NodeId, slots_needed: usize, k: usize) -> Self {
        Self { source, dest, slots_needed, k, arrival_s: 0.0, holding_s: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub vertices: Vec<NodeId>,
    pub links: Vec<LinkId>,
    /// Slots free on every link of the path.
    pub bitmap: SpectrumBitmap,
    pub availability: f64,
}

impl CandidatePath {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    fn start(source: NodeId, slots: usize) -> Self {
        Self {
            vertices: vec![source],
            links: Vec::new(),
            bitmap: SpectrumBitmap::all_free(slots),
            availability: 1.0,
        }
    }

    fn end(&self) -> NodeId {
        *self.vertices.last().expect("paths are never empty")
    }
}

/// Up to `lr.k` feasible loop-free paths from source to destination, in
/// breadth-first order. Empty when nothing fits.
pub fn candidate_paths(g: &NetworkGraph, lr: &LightpathRequest) -> Vec<CandidatePath> {
    let mut found = Vec::new();
    if lr.k == 0 || lr.source == lr.dest || lr.slots_needed > g.slot_count() {
        return found;
    }
    let mut frontier = vec![CandidatePath::start(lr.source, g.slot_count())];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for path in &frontier {
            let u = path.end();
            for &(v, link_id) in g.neighbors(u) {
                if path.vertices.contains(&v) {
                    continue;
                }
                let link = g.link(link_id).expect("adjacency only lists present links");
                let bitmap = path.bitmap.intersect(&link.bitmap).expect("uniform slot count");
                if !bitmap.is_feasible(lr.slots_needed) {
                    continue;
                }
                let mut vertices = path.vertices.clone();
                vertices.push(v);
                let mut links = path.links.clone();
                links.push(link_id);
                let extended = CandidatePath {
                    vertices,
                    links,
                    bitmap,
                    availability: path.availability * link.availability(),
                };
                if v == lr.dest {
                    found.push(extended);
                    if found.len() == lr.k {
                        return found;
                    }
                } else {
                    next.push(extended);
                }
            }
        }
        frontier = next;
    }
    found
}

/// Highest availability first, then fewer hops, then lexicographic vertices.
pub fn path_order(a: &CandidatePath, b: &CandidatePath) -> Ordering {
    b.availability
        .total_cmp(&a.availability)
        .then(a.hops().cmp(&b.hops()))
        .then_with(|| a.vertices.cmp(&b.vertices))
}

pub fn select_best(paths: &[CandidatePath]) -> Result<&CandidatePath> {
    paths.iter().min_by(|a, b| path_order(a, b)).ok_or(Error::NoCandidates)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtectionMode {
    #[default]
    None,
    Dsbpss,
    Dcycles,
}

impl fmt::Display for ProtectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtectionMode::None => "none",
            ProtectionMode::Dsbpss => "dsbpss",
            ProtectionMode::Dcycles => "dcycles",
        })
    }
}

impl FromStr for ProtectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ProtectionMode::None),
            "dsbpss" => Ok(ProtectionMode::Dsbpss),
            "dcycles" | "dcycle" | "d-cycles" => Ok(ProtectionMode::Dcycles),
            other => Err(Error::InvalidScenario(format!("unknown protection mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provisioned {
    pub conn: ConnId,
    pub block: SlotBlock,
    pub a_p_max: f64,
    /// Availability after protection; equals `a_p_max` when none was added.
    pub a_pp_max: f64,
    pub needs_protection: bool,
    /// The threshold was reached through protection.
    pub protected: bool,
    pub backups: Vec<BackupPath>,
    pub cycle_protections: Vec<CycleProtection>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Blocked,
    Provisioned(Provisioned),
}

impl Outcome {
    pub fn is_blocked(&self) -> bool {
        matches!(self, Outcome::Blocked)
    }

    pub fn provisioned(&self) -> Option<&Provisioned> {
        match self {
            Outcome::Provisioned(p) => Some(p),
            Outcome::Blocked => None,
        }
    }
}

/// Routes a request, assigns its working slots and, when the best path is
/// below `a_th`, tries to protect it with the selected mode.
///
/// The working path stays provisioned even when protection fails; a failed
/// protection attempt leaves no reservation behind.
pub fn rsacs_with_protection(
    state: &mut NetworkState,
    lr: &LightpathRequest,
    a_th: f64,
    mode: ProtectionMode,
) -> Outcome {
    let all_paths = candidate_paths(&state.graph, lr);
    let Ok(best) = select_best(&all_paths) else {
        return Outcome::Blocked;
    };
    let best = best.clone();
    let block = best
        .bitmap
        .first_fit(lr.slots_needed)
        .expect("candidate paths are feasible");
    state
        .graph
        .allocate(&best.links, block)
        .expect("intersection bitmap guarantees the block is free");
    let conn = state.next_conn_id();
    let a_p_max = best.availability;
    let needs_protection = !meets_threshold(a_p_max, a_th);
    let mut a_pp_max = a_p_max;
    let mut backups = Vec::new();
    let mut cycle_protections = Vec::new();

    if needs_protection {
        match mode {
            ProtectionMode::None => {}
            ProtectionMode::Dsbpss => {
                let res = dsbpss::dsbpss(
                    &mut state.graph,
                    &mut state.backups,
                    lr,
                    conn,
                    &best,
                    a_pp_max,
                    a_th,
                );
                if !res.backups.is_empty() {
                    a_pp_max = res.a_pp_max;
                    backups = res.backups;
                }
            }
            ProtectionMode::Dcycles => {
                if let Some(res) = dcycle::dcyc(
                    &mut state.graph,
                    &mut state.cycles,
                    lr,
                    conn,
                    &best,
                    a_pp_max,
                    a_th,
                ) {
                    a_pp_max = res.a_pp_max;
                    cycle_protections = res.protections;
                }
            }
        }
    }
    let protected = needs_protection && meets_threshold(a_pp_max, a_th);
    state.insert_connection(Connection {
        id: conn,
        request: lr.clone(),
        vertices: best.vertices.clone(),
        links: best.links.clone(),
        block,
        a_p_max,
        a_pp_max,
        needs_protection,
        protected,
        mode,
    });
    Outcome::Provisioned(Provisioned {
        conn,
        block,
        a_p_max,
        a_pp_max,
        needs_protection,
        protected,
        backups,
        cycle_protections,
    })
}
