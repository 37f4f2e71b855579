//! Live network state: spectrum, connections and protection resources.

use std::collections::BTreeMap;
use std::fmt;

use crate::dcycle::{self, DCycleSet};
use crate::dsbpss::{self, BackupRegistry};
use crate::error::{Error, Result};
use crate::rsa::{rsacs_with_protection, LightpathRequest, Outcome, ProtectionMode};
use crate::spectrum::SlotBlock;
use crate::topology::{LinkId, NetworkGraph, NodeId};

/// Identifies a provisioned working path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConnId(pub u64);

impl fmt::Display for ConnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "wp{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub id: ConnId,
    pub request: LightpathRequest,
    pub vertices: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub block: SlotBlock,
    pub a_p_max: f64,
    pub a_pp_max: f64,
    pub needs_protection: bool,
    pub protected: bool,
    pub mode: ProtectionMode,
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub graph: NetworkGraph,
    pub backups: BackupRegistry,
    pub cycles: DCycleSet,
    connections: BTreeMap<ConnId, Connection>,
    next_conn: u64,
    working_slots: usize,
}

impl NetworkState {
    pub fn new(graph: NetworkGraph) -> Self {
        Self {
            graph,
            backups: BackupRegistry::default(),
            cycles: DCycleSet::default(),
            connections: BTreeMap::new(),
            next_conn: 0,
            working_slots: 0,
        }
    }

    pub fn provision(&mut self, lr: &LightpathRequest, a_th: f64, mode: ProtectionMode) -> Outcome {
        rsacs_with_protection(self, lr, a_th, mode)
    }

    pub(crate) fn next_conn_id(&mut self) -> ConnId {
        let id = ConnId(self.next_conn);
        self.next_conn += 1;
        id
    }

    pub(crate) fn insert_connection(&mut self, c: Connection) {
        self.working_slots += c.block.len * c.links.len();
        self.connections.insert(c.id, c);
    }

    /// Tears down a connection with its backups and cycle protections.
    pub fn release(&mut self, id: ConnId) -> Result<()> {
        let c = self.connections.remove(&id).ok_or(Error::UnknownWorkingPath(id.0))?;
        self.graph.release(&c.links, c.block)?;
        self.working_slots -= c.block.len * c.links.len();
        if self.backups.has_wp(id) {
            dsbpss::release_backups(&mut self.graph, &mut self.backups, id)?;
        }
        if self.cycles.release_wp(id) > 0 {
            dcycle::dismantle_unused(&mut self.graph, &mut self.cycles)?;
        }
        Ok(())
    }

    pub fn connection(&self, id: ConnId) -> Option<&Connection> {
        self.connections.get(&id)
    }

    pub fn connections(&self) -> impl Iterator<Item = &Connection> {
        self.connections.values()
    }

    pub fn connection_count(&self) -> usize {
        self.connections.len()
    }

    /// Link-slots held by working paths.
    pub fn working_slots(&self) -> usize {
        self.working_slots
    }

    /// Link-slots held by backup groups and protection cycles.
    pub fn protection_slots(&self) -> usize {
        self.graph.busy_slots() - self.working_slots
    }

    /// No connection, reservation or busy slot remains.
    pub fn is_idle(&self) -> bool {
        self.connections.is_empty()
            && self.backups.is_empty()
            && self.cycles.is_empty()
            && self.graph.busy_slots() == 0
    }

    /// Checks that every busy slot has exactly one owner (a working path,
    /// a backup share group or a cycle) and that owners account for every
    /// busy slot.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let mut owner: BTreeMap<(LinkId, usize), String> = BTreeMap::new();
        let mut claim = |link: LinkId, block: SlotBlock, who: String| -> std::result::Result<(), String> {
            for s in block.range() {
                if let Some(prev) = owner.insert((link, s), who.clone()) {
                    return Err(format!("slot {s} on {link} held by both {prev} and {who}"));
                }
            }
            Ok(())
        };
        for c in self.connections.values() {
            for &l in &c.links {
                claim(l, c.block, c.id.to_string())?;
            }
        }
        for g in self.backups.groups() {
            claim(g.backup_link, g.block, format!("group {}", g.id))?;
        }
        for c in self.cycles.cycles() {
            for (&l, &b) in c.links.iter().zip(&c.blocks) {
                claim(l, b, format!("cycle {}", c.id))?;
            }
        }
        for link in self.graph.links() {
            for s in 0..link.bitmap.len() {
                let held = owner.contains_key(&(link.id, s));
                if held == link.bitmap.is_free(s) {
                    return Err(format!(
                        "slot {s} on {} is {} but {}",
                        link.id,
                        if held { "free" } else { "busy" },
                        if held { "owned" } else { "unowned" }
                    ));
                }
            }
        }
        self.backups.check_invariants()?;
        self.cycles.check_invariants(&self.graph)?;
        Ok(())
    }
}
