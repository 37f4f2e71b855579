//! Single-link failure injection against a network snapshot.
//!
//! For each link in turn, every live working path crossing it must switch to
//! its reserved recovery: a backup path avoiding the link, or the arc(s) of a
//! cycle protecting it. Recoveries of paths hit by the same failure must not
//! claim the same slot on the same link.

use std::collections::BTreeMap;

use crate::dcycle::DCycle;
use crate::dsbpss::BackupPath;
use crate::rsa::ProtectionMode;
use crate::state::{ConnId, Connection, NetworkState};
use crate::topology::LinkId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRestoration {
    pub link: LinkId,
    pub affected: usize,
    pub restored: usize,
    pub unrestored: Vec<ConnId>,
    /// Slots claimed by two or more recoveries at once.
    pub conflicts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RestorationReport {
    pub per_link: Vec<LinkRestoration>,
    pub total_conflicts: usize,
    /// Paths that met the threshold through protection yet lack a recovery
    /// for a failure they were protected against.
    pub protected_unrestorable: Vec<(LinkId, ConnId)>,
}

impl RestorationReport {
    pub fn is_sound(&self) -> bool {
        self.total_conflicts == 0 && self.protected_unrestorable.is_empty()
    }
}

type Cell = (LinkId, usize);

/// A backup usable after `failed` goes down: avoids it, and every slot it
/// needs is held by a share group covering `wp`.
fn usable_backup<'a>(state: &'a NetworkState, wp: ConnId, failed: LinkId) -> Option<&'a BackupPath> {
    state.backups.backups_of(wp).iter().find(|b| {
        !b.links.contains(&failed)
            && b.links.iter().all(|&l| {
                b.block.range().all(|s| {
                    state
                        .backups
                        .groups_on(l)
                        .any(|g| g.block.range().contains(&s) && g.protected_wps.contains(&wp))
                })
            })
            && b.links.iter().all(|&l| state.graph.link(l).is_some_and(|x| x.bitmap.block_is_busy(b.block)))
    })
}

/// Cells a cycle spends on `failed`'s traffic, if it protects `failed` for `wp`.
fn cycle_recovery(state: &NetworkState, cycle: &DCycle, wp: ConnId, failed: LinkId) -> Option<Vec<Cell>> {
    let entry = cycle.protected.iter().find(|p| p.link == failed && p.wp == wp)?;
    let role = cycle.role_of(&state.graph, failed)?;
    if !crate::dcycle::fits(role, entry.demand, cycle.capacity_slots) {
        return None;
    }
    let mut cells = Vec::new();
    for arc in cycle.backup_routes(&state.graph, failed) {
        for l in arc {
            let i = cycle.links.iter().position(|&x| x == l)?;
            let block = cycle.blocks[i];
            if !state.graph.link(l)?.bitmap.block_is_busy(block) {
                return None;
            }
            cells.extend(block.range().map(|s| (l, s)));
        }
    }
    Some(cells)
}

fn recovery_cells(state: &NetworkState, c: &Connection, failed: LinkId) -> Option<Vec<Cell>> {
    match c.mode {
        ProtectionMode::None => None,
        ProtectionMode::Dsbpss => usable_backup(state, c.id, failed)
            .map(|b| b.links.iter().flat_map(|&l| b.block.range().map(move |s| (l, s))).collect()),
        ProtectionMode::Dcycles => state.cycles.cycles().find_map(|cy| cycle_recovery(state, cy, c.id, failed)),
    }
}

/// Whether `c` was protected against the loss of `l`: a threshold-protected
/// backup-path connection covers all its links, a cycle-protected one only
/// the links it chose to protect.
fn owes_recovery(state: &NetworkState, c: &Connection, l: LinkId) -> bool {
    c.protected
        && match c.mode {
            ProtectionMode::None => false,
            ProtectionMode::Dsbpss => true,
            ProtectionMode::Dcycles => state.cycles.protections_of(c.id).iter().any(|(_, p)| p.link == l),
        }
}

pub fn inject_single_failures(state: &NetworkState) -> RestorationReport {
    let mut report = RestorationReport::default();
    for link in state.graph.links() {
        let failed = link.id;
        let mut row = LinkRestoration { link: failed, affected: 0, restored: 0, unrestored: Vec::new(), conflicts: 0 };
        let mut claims: BTreeMap<Cell, usize> = BTreeMap::new();
        for c in state.connections().filter(|c| c.links.contains(&failed)) {
            row.affected += 1;
            match recovery_cells(state, c, failed) {
                Some(cells) => {
                    row.restored += 1;
                    for cell in cells {
                        *claims.entry(cell).or_default() += 1;
                    }
                }
                None => {
                    row.unrestored.push(c.id);
                    if owes_recovery(state, c, failed) {
                        report.protected_unrestorable.push((failed, c.id));
                    }
                }
            }
        }
        row.conflicts = claims.values().filter(|&&n| n > 1).count();
        report.total_conflicts += row.conflicts;
        report.per_link.push(row);
    }
    report
}
