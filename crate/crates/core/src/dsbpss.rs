//! Shared backup path protection with slot sharing.
//!
//! Backups are link-disjoint from their own working path and use one slot
//! block end to end. Backup slots on a link are organized in share groups:
//! a group is a run of slots on one link together with the working paths it
//! protects. A new working path may join a group only if it is link-disjoint
//! from every working path already in it, so that no single link failure can
//! activate two claims on the same slot.

use std::collections::{BTreeMap, BTreeSet};

use crate::availability::{ava_dsbpss_update, meets_threshold};
use crate::error::{Error, Result};
use crate::rsa::{candidate_paths, path_order, CandidatePath, LightpathRequest};
use crate::spectrum::{SlotBlock, SpectrumBitmap};
use crate::state::ConnId;
use crate::topology::{LinkId, NetworkGraph, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct ShareGroup {
    pub id: u64,
    pub backup_link: LinkId,
    pub block: SlotBlock,
    pub protected_wps: BTreeSet<ConnId>,
    pub owner_backups: BTreeSet<u64>,
    /// Union of the working links of `protected_wps`.
    pub working_mask: LinkMask,
}

/// A set of links as a bit mask, for cheap disjointness tests.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkMask(Vec<u64>);

impl LinkMask {
    pub fn from_links(links: &[LinkId]) -> Self {
        let mut m = LinkMask::default();
        for l in links {
            m.insert(*l);
        }
        m
    }

    pub fn insert(&mut self, l: LinkId) {
        let (w, b) = (l.0 / 64, l.0 % 64);
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        self.0[w] |= 1 << b;
    }

    pub fn union_with(&mut self, other: &LinkMask) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    pub fn intersects(&self, other: &LinkMask) -> bool {
        self.0.iter().zip(&other.0).any(|(a, b)| a & b != 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackupPath {
    pub id: u64,
    pub wp: ConnId,
    pub vertices: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub block: SlotBlock,
    pub availability: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackupRegistry {
    /// Groups by backup link, then id.
    by_link: BTreeMap<LinkId, BTreeMap<u64, ShareGroup>>,
    group_count: usize,
    by_wp: BTreeMap<ConnId, Vec<BackupPath>>,
    wp_links: BTreeMap<ConnId, Vec<LinkId>>,
    next_group: u64,
    next_backup: u64,
}

pub fn links_disjoint(a: &[LinkId], b: &[LinkId]) -> bool {
    a.iter().all(|l| !b.contains(l))
}

impl BackupRegistry {
    pub fn is_empty(&self) -> bool {
        self.group_count == 0 && self.by_wp.is_empty()
    }

    pub fn has_wp(&self, wp: ConnId) -> bool {
        self.by_wp.contains_key(&wp)
    }

    pub fn groups(&self) -> impl Iterator<Item = &ShareGroup> {
        self.by_link.values().flat_map(|m| m.values())
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn groups_on(&self, link: LinkId) -> impl Iterator<Item = &ShareGroup> {
        self.by_link.get(&link).into_iter().flat_map(|m| m.values())
    }

    pub fn backups_of(&self, wp: ConnId) -> &[BackupPath] {
        self.by_wp.get(&wp).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn working_links(&self, wp: ConnId) -> Option<&[LinkId]> {
        self.wp_links.get(&wp).map(Vec::as_slice)
    }

    /// Slots held by backup groups, each group counted once.
    pub fn reserved_slots(&self) -> usize {
        self.groups().map(|g| g.block.len).sum()
    }

    /// Records the working links of `wp` so later sharing checks see them.
    pub fn register_working(&mut self, wp: ConnId, links: &[LinkId]) {
        self.wp_links.insert(wp, links.to_vec());
    }

    fn forget_working(&mut self, wp: ConnId) {
        self.wp_links.remove(&wp);
    }

    fn mask_of(&self, wps: &BTreeSet<ConnId>) -> LinkMask {
        let mut m = LinkMask::default();
        for wp in wps {
            m.union_with(&LinkMask::from_links(self.wp_links.get(wp).map(Vec::as_slice).unwrap_or(&[])));
        }
        m
    }

    /// [`shareable_bitmap`](Self::shareable_bitmap) with the new path given as a mask.
    fn shareable_bitmap_given(&self, link: LinkId, bitmap: &SpectrumBitmap, new_wp: &LinkMask) -> SpectrumBitmap {
        let mut out = bitmap.clone();
        for g in self.groups_on(link) {
            if !g.working_mask.intersects(new_wp) {
                out.set_free(g.block).expect("group blocks fit the link");
            }
        }
        out
    }

    /// Whether `new_wp_links` may share the slots of `group`: only if it is
    /// link-disjoint from every working path the group already protects.
    pub fn can_share(&self, group: &ShareGroup, new_wp_links: &[LinkId]) -> bool {
        group.protected_wps.iter().all(|wp| {
            self.wp_links
                .get(wp)
                .is_some_and(|links| links_disjoint(links, new_wp_links))
        })
    }

    /// `bitmap` with the slots of groups shareable by `new_wp_links` on
    /// `link` marked free.
    pub fn shareable_bitmap(&self, link: LinkId, bitmap: &SpectrumBitmap, new_wp_links: &[LinkId]) -> SpectrumBitmap {
        self.shareable_bitmap_given(link, bitmap, &LinkMask::from_links(new_wp_links))
    }

    fn insert_group(&mut self, group: ShareGroup) {
        self.group_count += 1;
        self.by_link.entry(group.backup_link).or_default().insert(group.id, group);
    }

    fn take_group(&mut self, link: LinkId, id: u64) -> ShareGroup {
        let on_link = self.by_link.get_mut(&link).expect("link has groups");
        let g = on_link.remove(&id).expect("indexed group exists");
        if on_link.is_empty() {
            self.by_link.remove(&link);
        }
        self.group_count -= 1;
        g
    }

    fn new_group(&mut self, link: LinkId, block: SlotBlock, wps: BTreeSet<ConnId>, owners: BTreeSet<u64>) -> ShareGroup {
        let id = self.next_group;
        self.next_group += 1;
        let working_mask = self.mask_of(&wps);
        ShareGroup { id, backup_link: link, block, protected_wps: wps, owner_backups: owners, working_mask }
    }

    /// Reserves `block` on every link of `path` as a backup of `wp`.
    ///
    /// Each slot must be either free or in a group `wp` can share. Slots in
    /// shared groups are joined (splitting groups at the block boundary);
    /// free runs become new groups. Nothing changes on error.
    pub fn reserve(&mut self, graph: &mut NetworkGraph, wp: ConnId, path: &CandidatePath, block: SlotBlock) -> Result<BackupPath> {
        self.reserve_logged(graph, wp, path, block, None)
    }

    fn reserve_logged(
        &mut self,
        graph: &mut NetworkGraph,
        wp: ConnId,
        path: &CandidatePath,
        block: SlotBlock,
        mut log: Option<&mut ReserveLog>,
    ) -> Result<BackupPath> {
        let wp_links = self
            .wp_links
            .get(&wp)
            .cloned()
            .ok_or(Error::UnknownWorkingPath(wp.0))?;
        if !links_disjoint(&path.links, &wp_links) {
            return Err(Error::Conflict(path.links[0]));
        }
        let conflicts = LinkMask::from_links(&wp_links);
        for &l in &path.links {
            let bitmap = &graph.try_link(l)?.bitmap;
            if block.end() > bitmap.len() {
                return Err(Error::BlockOutOfRange { start: block.start, end: block.end(), len: bitmap.len() });
            }
            if !self.shareable_bitmap_given(l, bitmap, &conflicts).block_is_free(block) {
                return Err(Error::Conflict(l));
            }
        }

        let backup_id = self.next_backup;
        self.next_backup += 1;
        for &l in &path.links {
            let overlapping: Vec<u64> = self
                .groups_on(l)
                .filter(|g| g.block.overlaps(&block))
                .map(|g| g.id)
                .collect();
            let mut covered = Vec::new();
            for gid in overlapping {
                let g = self.take_group(l, gid);
                if let Some(log) = log.as_deref_mut() {
                    log.removed.push(g.clone());
                }
                let mid = g.block.intersection(&block).expect("overlapping");
                covered.push(mid);
                if g.block.start < mid.start {
                    let left = SlotBlock::new(g.block.start, mid.start - g.block.start);
                    let piece = self.new_group(l, left, g.protected_wps.clone(), g.owner_backups.clone());
                    if let Some(log) = log.as_deref_mut() {
                    log.created.push((l, piece.id));
                }
                self.insert_group(piece);
                }
                if mid.end() < g.block.end() {
                    let right = SlotBlock::new(mid.end(), g.block.end() - mid.end());
                    let piece = self.new_group(l, right, g.protected_wps.clone(), g.owner_backups.clone());
                    if let Some(log) = log.as_deref_mut() {
                    log.created.push((l, piece.id));
                }
                self.insert_group(piece);
                }
                let mut wps = g.protected_wps;
                wps.insert(wp);
                let mut owners = g.owner_backups;
                owners.insert(backup_id);
                let piece = self.new_group(l, mid, wps, owners);
                if let Some(log) = log.as_deref_mut() {
                    log.created.push((l, piece.id));
                }
                self.insert_group(piece);
            }
            covered.sort();
            let mut cursor = block.start;
            let mut fresh = Vec::new();
            for c in covered.iter().chain(std::iter::once(&SlotBlock::new(block.end(), 0))) {
                if c.start > cursor {
                    fresh.push(SlotBlock::new(cursor, c.start - cursor));
                }
                cursor = cursor.max(c.end());
            }
            for run in fresh {
                graph
                    .link_mut(l)
                    .expect("checked above")
                    .bitmap
                    .set_busy(run)?;
                let piece = self.new_group(l, run, BTreeSet::from([wp]), BTreeSet::from([backup_id]));
                if let Some(log) = log.as_deref_mut() {
                    log.created.push((l, piece.id));
                }
                self.insert_group(piece);
            }
        }
        let bp = BackupPath {
            id: backup_id,
            wp,
            vertices: path.vertices.clone(),
            links: path.links.clone(),
            block,
            availability: path.availability,
        };
        self.by_wp.entry(wp).or_default().push(bp.clone());
        Ok(bp)
    }

    /// Structural invariants: group members pairwise link-disjoint, groups on
    /// a link non-overlapping, backups disjoint from their working path.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for g in self.groups() {
            let members: Vec<_> = g.protected_wps.iter().collect();
            if members.is_empty() {
                return Err(format!("group {} is empty", g.id));
            }
            if g.working_mask != self.mask_of(&g.protected_wps) {
                return Err(format!("group {} has a stale link mask", g.id));
            }
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let (la, lb) = (self.wp_links.get(a), self.wp_links.get(b));
                    match (la, lb) {
                        (Some(la), Some(lb)) if links_disjoint(la, lb) => {}
                        _ => return Err(format!("group {} shares {a} and {b}", g.id)),
                    }
                }
            }
        }
        for (link, on_link) in &self.by_link {
            let blocks: Vec<_> = on_link.values().map(|g| g.block).collect();
            for (i, a) in blocks.iter().enumerate() {
                if blocks[i + 1..].iter().any(|b| b.overlaps(a)) {
                    return Err(format!("overlapping groups on {link}"));
                }
            }
        }
        for (wp, bps) in &self.by_wp {
            let wl = self.wp_links.get(wp).ok_or_else(|| format!("{wp} has backups but no links"))?;
            for bp in bps {
                if !links_disjoint(&bp.links, wl) {
                    return Err(format!("backup {} of {wp} touches its working path", bp.id));
                }
            }
        }
        Ok(())
    }
}

/// Groups one reservation removed and created.
#[derive(Debug, Default)]
struct ReserveLog {
    removed: Vec<ShareGroup>,
    created: Vec<(LinkId, u64)>,
}

/// Enough to undo a run of reservations without cloning the registry.
struct Undo {
    logs: Vec<ReserveLog>,
    next_group: u64,
    next_backup: u64,
}

impl Undo {
    fn new(reg: &BackupRegistry) -> Self {
        Self { logs: Vec::new(), next_group: reg.next_group, next_backup: reg.next_backup }
    }

    fn apply(self, reg: &mut BackupRegistry, wp: ConnId) {
        for log in self.logs.into_iter().rev() {
            for (l, id) in log.created {
                reg.take_group(l, id);
            }
            for g in log.removed {
                reg.insert_group(g);
            }
        }
        reg.by_wp.remove(&wp);
        reg.forget_working(wp);
        reg.next_group = self.next_group;
        reg.next_backup = self.next_backup;
    }
}

/// Copy of `g_pruned` where slots held by groups that `new_wp_links` can
/// share are marked free.
pub fn free_backup_slots(g_pruned: &NetworkGraph, reg: &BackupRegistry, new_wp_links: &[LinkId]) -> NetworkGraph {
    let conflicts = LinkMask::from_links(new_wp_links);
    let mut out = g_pruned.clone();
    for link in out.links_mut() {
        link.bitmap = reg.shareable_bitmap_given(link.id, &link.bitmap, &conflicts);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsbpssResult {
    /// Empty when the threshold could not be reached.
    pub backups: Vec<BackupPath>,
    pub a_pp_max: f64,
}

/// Adds shared backups for `wp` until its availability reaches `a_th`.
///
/// Candidates are searched once on the graph without the working links,
/// with shareable backup slots marked free, and consumed best first. Each
/// one is placed against the current reservations; a candidate that no
/// longer fits is skipped. If candidates run out below the threshold every
/// reservation from this call is undone.
pub fn dsbpss(
    graph: &mut NetworkGraph,
    reg: &mut BackupRegistry,
    lr: &LightpathRequest,
    wp: ConnId,
    best_path: &CandidatePath,
    a_pp_max: f64,
    a_th: f64,
) -> DsbpssResult {
    let saved_bitmaps = graph.bitmaps();
    let mut undo = Undo::new(reg);
    let pruned = graph
        .remove_links(&best_path.links)
        .expect("working path links exist");
    let search = free_backup_slots(&pruned, reg, &best_path.links);
    let mut candidates = candidate_paths(&search, lr);
    reg.register_working(wp, &best_path.links);
    let conflicts = LinkMask::from_links(&best_path.links);

    let mut a_pp = a_pp_max;
    let mut backups = Vec::new();
    while !meets_threshold(a_pp, a_th) {
        let Some(idx) = (0..candidates.len()).min_by(|&a, &b| path_order(&candidates[a], &candidates[b])) else {
            graph.restore_bitmaps(saved_bitmaps);
            undo.apply(reg, wp);
            return DsbpssResult { backups: Vec::new(), a_pp_max };
        };
        let cand = candidates.remove(idx);
        let mut bitmap = SpectrumBitmap::all_free(graph.slot_count());
        for &l in &cand.links {
            let link_bitmap = &graph.link(l).expect("candidate links exist").bitmap;
            bitmap
                .intersect_with(&reg.shareable_bitmap_given(l, link_bitmap, &conflicts))
                .expect("uniform slot count");
        }
        let Ok(block) = bitmap.first_fit(lr.slots_needed) else {
            continue;
        };
        let mut log = ReserveLog::default();
        let bp = reg
            .reserve_logged(graph, wp, &cand, block, Some(&mut log))
            .expect("block checked against current reservations");
        undo.logs.push(log);
        a_pp = ava_dsbpss_update(a_pp, bp.availability);
        backups.push(bp);
    }
    if backups.is_empty() {
        reg.forget_working(wp);
    }
    DsbpssResult { backups, a_pp_max: a_pp }
}

/// Removes `wp` from all its share groups and frees groups left empty.
pub fn release_backups(graph: &mut NetworkGraph, reg: &mut BackupRegistry, wp: ConnId) -> Result<()> {
    let backups = reg.by_wp.remove(&wp).ok_or(Error::UnknownWorkingPath(wp.0))?;
    let links: BTreeSet<LinkId> = backups.iter().flat_map(|b| b.links.iter().copied()).collect();
    for l in links {
        let ids: Vec<u64> = reg
            .groups_on(l)
            .filter(|g| g.protected_wps.contains(&wp))
            .map(|g| g.id)
            .collect();
        for id in ids {
            let mut g = reg.take_group(l, id);
            g.protected_wps.remove(&wp);
            for b in &backups {
                g.owner_backups.remove(&b.id);
            }
            if g.protected_wps.is_empty() {
                graph.release_each(&[(g.backup_link, g.block)])?;
            } else {
                g.working_mask = reg.mask_of(&g.protected_wps);
                reg.insert_group(g);
            }
        }
    }
    reg.forget_working(wp);
    Ok(())
}
