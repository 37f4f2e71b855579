//! Dynamic protection cycles.
//!
//! A cycle reserves `capacity_slots` on each of its links (not necessarily
//! the same indices, since the end nodes of a failed link convert spectrum).
//! It protects working links that lie on it, through the complementary arc,
//! and links whose two endpoints lie on it (straddlers), through either arc.
//! Under a single failure only one protected link is active, so all the
//! protected links of a cycle share its reservation; each working link is
//! protected at most once per cycle.

use std::collections::BTreeMap;

use crate::availability::{ava_dcyc_update, meets_threshold, parallel_availability, series_availability};
use crate::error::Result;
use crate::rsa::{candidate_paths, select_best, CandidatePath, LightpathRequest};
use crate::spectrum::SlotBlock;
use crate::state::ConnId;
use crate::topology::{LinkId, NetworkGraph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    OnCycle,
    Straddling,
}

/// Capacity rule: an on-cycle link needs the whole demand on the one
/// remaining arc; a straddler may split its demand over both arcs.
pub fn fits(role: Role, demand: usize, capacity: usize) -> bool {
    match role {
        Role::OnCycle => demand <= capacity,
        Role::Straddling => demand <= 2 * capacity,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedLink {
    pub link: LinkId,
    pub wp: ConnId,
    pub demand: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DCycle {
    pub id: u64,
    /// Cyclic vertex order; `links[i]` joins `vertices[i]` and `vertices[i + 1]`.
    pub vertices: Vec<NodeId>,
    pub links: Vec<LinkId>,
    /// Reserved block on each cycle link, parallel to `links`.
    pub blocks: Vec<SlotBlock>,
    pub capacity_slots: usize,
    pub protected: Vec<ProtectedLink>,
}

impl DCycle {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    fn position(&self, v: NodeId) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    pub fn contains_link(&self, l: LinkId) -> bool {
        self.links.contains(&l)
    }

    pub fn protects(&self, l: LinkId) -> bool {
        self.protected.iter().any(|p| p.link == l)
    }

    pub fn role_of(&self, g: &NetworkGraph, l: LinkId) -> Option<Role> {
        role_in(&self.vertices, &self.links, g, l)
    }

    /// The two arcs between cycle vertices `u` and `v`: forward from `u`,
    /// then the rest.
    pub fn arcs(&self, u: NodeId, v: NodeId) -> Option<(Vec<LinkId>, Vec<LinkId>)> {
        let (i, j) = (self.position(u)?, self.position(v)?);
        let n = self.len();
        let forward_len = (j + n - i) % n;
        let forward = (0..forward_len).map(|k| self.links[(i + k) % n]).collect();
        let backward = (forward_len..n).map(|k| self.links[(i + k) % n]).collect();
        Some((forward, backward))
    }

    /// Routes that carry `l`'s traffic when it fails: the complementary arc
    /// for an on-cycle link, both arcs for a straddler.
    pub fn backup_routes(&self, g: &NetworkGraph, l: LinkId) -> Vec<Vec<LinkId>> {
        let Some(link) = g.link(l) else { return Vec::new() };
        let (u, v) = link.endpoints;
        let Some((a, b)) = self.arcs(u, v) else { return Vec::new() };
        match self.role_of(g, l) {
            Some(Role::OnCycle) => vec![if a == [l] { b } else { a }],
            Some(Role::Straddling) => vec![a, b],
            None => Vec::new(),
        }
    }

    /// Availability of the backup for `l` with the given demand. A straddler
    /// whose demand fits one arc can use either arc; a split demand needs
    /// both.
    pub fn backup_availability(&self, g: &NetworkGraph, l: LinkId, demand: usize) -> f64 {
        let arc_avail = |arc: &Vec<LinkId>| {
            let a: Vec<f64> = arc.iter().map(|&x| g.availability(x).unwrap_or(0.0)).collect();
            series_availability(&a)
        };
        let routes = self.backup_routes(g, l);
        let per_route: Vec<f64> = routes.iter().map(arc_avail).collect();
        match (self.role_of(g, l), per_route.as_slice()) {
            (Some(Role::OnCycle), [a]) => *a,
            (Some(Role::Straddling), [a, b]) if demand <= self.capacity_slots => parallel_availability(&[*a, *b]),
            (Some(Role::Straddling), [a, b]) => a * b,
            _ => 0.0,
        }
    }

    /// Role under which this cycle could take on `l` with `demand`, if any.
    pub fn admits(&self, g: &NetworkGraph, l: LinkId, demand: usize) -> Option<Role> {
        if self.protects(l) {
            return None;
        }
        let role = self.role_of(g, l)?;
        fits(role, demand, self.capacity_slots).then_some(role)
    }
}

fn role_in(vertices: &[NodeId], links: &[LinkId], g: &NetworkGraph, l: LinkId) -> Option<Role> {
    if links.contains(&l) {
        return Some(Role::OnCycle);
    }
    let (u, v) = g.link(l)?.endpoints;
    (vertices.contains(&u) && vertices.contains(&v)).then_some(Role::Straddling)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DCycleSet {
    cycles: BTreeMap<u64, DCycle>,
    next_id: u64,
}

impl DCycleSet {
    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn cycles(&self) -> impl Iterator<Item = &DCycle> {
        self.cycles.values()
    }

    pub fn get(&self, id: u64) -> Option<&DCycle> {
        self.cycles.get(&id)
    }

    /// Link-slots reserved by all cycles.
    pub fn reserved_slots(&self) -> usize {
        self.cycles.values().map(|c| c.capacity_slots * c.len()).sum()
    }

    /// Protection entries of `wp` as `(cycle id, entry)`.
    pub fn protections_of(&self, wp: ConnId) -> Vec<(u64, &ProtectedLink)> {
        self.cycles
            .values()
            .flat_map(|c| c.protected.iter().filter(move |p| p.wp == wp).map(move |p| (c.id, p)))
            .collect()
    }

    /// Drops every entry of `wp`; returns how many were dropped.
    pub fn release_wp(&mut self, wp: ConnId) -> usize {
        let mut n = 0;
        for c in self.cycles.values_mut() {
            let before = c.protected.len();
            c.protected.retain(|p| p.wp != wp);
            n += before - c.protected.len();
        }
        n
    }

    pub fn check_invariants(&self, g: &NetworkGraph) -> std::result::Result<(), String> {
        for c in self.cycles.values() {
            let n = c.len();
            if n < 3 || c.vertices.len() != n || c.blocks.len() != n {
                return Err(format!("cycle {} is malformed", c.id));
            }
            let mut vs = c.vertices.clone();
            vs.sort();
            vs.dedup();
            if vs.len() != n {
                return Err(format!("cycle {} repeats a vertex", c.id));
            }
            for i in 0..n {
                let (a, b) = (c.vertices[i], c.vertices[(i + 1) % n]);
                if g.link_between(a, b) != Some(c.links[i]) {
                    return Err(format!("cycle {} link {} does not join {a} and {b}", c.id, c.links[i]));
                }
                let busy = g.link(c.links[i]).is_some_and(|l| l.bitmap.block_is_busy(c.blocks[i]));
                if c.blocks[i].len != c.capacity_slots || !busy {
                    return Err(format!("cycle {} reservation on {} is not held", c.id, c.links[i]));
                }
            }
            for (i, p) in c.protected.iter().enumerate() {
                if c.protected[..i].iter().any(|q| q.link == p.link) {
                    return Err(format!("cycle {} protects {} twice", c.id, p.link));
                }
                match c.role_of(g, p.link) {
                    Some(role) if fits(role, p.demand, c.capacity_slots) => {}
                    _ => return Err(format!("cycle {} cannot carry {} for {}", c.id, p.link, p.wp)),
                }
            }
        }
        Ok(())
    }
}

/// Position of the least available link; ties go to the lowest link id.
pub fn min_availability_link(links: &[(LinkId, f64)]) -> Option<LinkId> {
    links
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|&(l, _)| l)
}

/// An existing cycle that can protect `l`: straddling preferred, then the
/// more available backup, then the older cycle.
pub fn check_cycles(cs: &DCycleSet, g: &NetworkGraph, l: LinkId, demand: usize) -> Option<(u64, Role)> {
    cs.cycles()
        .filter_map(|c| c.admits(g, l, demand).map(|r| (c, r)))
        .max_by(|(c1, r1), (c2, r2)| {
            r1.cmp(r2)
                .then(c1.backup_availability(g, l, demand).total_cmp(&c2.backup_availability(g, l, demand)))
                .then(c2.id.cmp(&c1.id))
        })
        .map(|(c, r)| (c.id, r))
}

/// How a new or changed cycle will be built.
#[derive(Debug, Clone, PartialEq)]
pub enum CyclePlan {
    /// Replace an arc of an existing cycle.
    Extend {
        cycle: u64,
        vertices: Vec<NodeId>,
        links: Vec<LinkId>,
        added: Vec<(LinkId, SlotBlock)>,
        dropped: Vec<LinkId>,
    },
    /// A fresh cycle of `capacity` slots.
    New {
        vertices: Vec<NodeId>,
        links: Vec<LinkId>,
        blocks: Vec<SlotBlock>,
        capacity: usize,
        role: Role,
    },
}

fn ring_links(g: &NetworkGraph, vertices: &[NodeId]) -> Option<Vec<LinkId>> {
    let n = vertices.len();
    (0..n)
        .map(|i| g.link_between(vertices[i], vertices[(i + 1) % n]))
        .collect()
}

fn first_fit_each(g: &NetworkGraph, links: &[LinkId], capacity: usize) -> Option<Vec<SlotBlock>> {
    links
        .iter()
        .map(|&l| g.link(l)?.bitmap.first_fit(capacity).ok())
        .collect()
}

/// Ways of grafting the ring `p1 + l` onto `cycle`: every sub-path of the
/// ring whose ends lie on the cycle and whose interior does not, in place of
/// either cycle arc between those ends.
fn extensions(g: &NetworkGraph, cycle: &DCycle, p1: &CandidatePath, l: LinkId, demand: usize) -> Vec<CyclePlan> {
    let ring_v = &p1.vertices;
    let mut ring_l = p1.links.clone();
    ring_l.push(l);
    let m = ring_v.len();
    let on: Vec<usize> = (0..m).filter(|&i| cycle.position(ring_v[i]).is_some()).collect();
    if on.len() < 2 {
        return Vec::new();
    }
    let mut plans = Vec::new();
    for (idx, &a) in on.iter().enumerate() {
        let b = on[(idx + 1) % on.len()];
        let ear_len = (b + m - a) % m;
        let ear_len = if ear_len == 0 { m } else { ear_len };
        let ear_v: Vec<NodeId> = (0..=ear_len).map(|k| ring_v[(a + k) % m]).collect();
        let ear_l: Vec<LinkId> = (0..ear_len).map(|k| ring_l[(a + k) % m]).collect();
        let (x, y) = (ear_v[0], ear_v[ear_len]);
        if x == y || (ear_l.len() == 1 && cycle.contains_link(ear_l[0])) {
            continue;
        }
        let (i, j) = (cycle.position(x).unwrap(), cycle.position(y).unwrap());
        let n = cycle.len();
        let fwd_len = (j + n - i) % n;
        // Vertices strictly inside the forward (x -> y) and backward (y -> x) arcs.
        let fwd_inner: Vec<NodeId> = (1..fwd_len).map(|k| cycle.vertices[(i + k) % n]).collect();
        let back_inner: Vec<NodeId> = (fwd_len + 1..n).map(|k| cycle.vertices[(i + k) % n]).collect();
        let ear_rev_inner: Vec<NodeId> = ear_v[1..ear_len].iter().rev().copied().collect();
        let options = [
            // ear replaces the forward arc: x ..ear.. y ..backward.. x
            ear_v.iter().copied().chain(back_inner.iter().copied()).collect::<Vec<_>>(),
            // ear replaces the backward arc: x ..forward.. y ..ear reversed.. x
            std::iter::once(x)
                .chain(fwd_inner.iter().copied())
                .chain(std::iter::once(y))
                .chain(ear_rev_inner.iter().copied())
                .collect::<Vec<_>>(),
        ];
        for vertices in options {
            if vertices.len() < 3 {
                continue;
            }
            let Some(links) = ring_links(g, &vertices) else { continue };
            match role_in(&vertices, &links, g, l) {
                Some(role) if fits(role, demand, cycle.capacity_slots) => {}
                _ => continue,
            }
            let keeps_all = cycle.protected.iter().all(|p| {
                matches!(role_in(&vertices, &links, g, p.link), Some(r) if fits(r, p.demand, cycle.capacity_slots))
            });
            if !keeps_all {
                continue;
            }
            let new_links: Vec<LinkId> = links.iter().copied().filter(|x| !cycle.contains_link(*x)).collect();
            let Some(blocks) = first_fit_each(g, &new_links, cycle.capacity_slots) else { continue };
            let dropped = cycle.links.iter().copied().filter(|x| !links.contains(x)).collect();
            plans.push(CyclePlan::Extend {
                cycle: cycle.id,
                vertices,
                links,
                added: new_links.into_iter().zip(blocks).collect(),
                dropped,
            });
        }
    }
    plans
}

/// Plans a cycle for `l` when no existing one can take it: extend an
/// existing cycle with the best alternate route `p1`, else close `p1`
/// with a second disjoint route `p2` so that `l` straddles, else close
/// `p1` with `l` itself if `l` has room.
pub fn find_cycle_for(g: &NetworkGraph, cs: &DCycleSet, l: LinkId, demand: usize, k: usize) -> Option<CyclePlan> {
    let (u, v) = g.link(l)?.endpoints;
    let without_l = g.remove_links(&[l]).ok()?;
    let req = LightpathRequest::new(u, v, demand, k);
    let alternates = candidate_paths(&without_l, &req);
    let p1 = select_best(&alternates).ok()?.clone();

    let extension = cs
        .cycles()
        .filter(|c| !c.protects(l))
        .flat_map(|c| extensions(g, c, &p1, l, demand))
        .min_by_key(|plan| match plan {
            CyclePlan::Extend { added, dropped, cycle, .. } => (added.len(), dropped.len(), *cycle),
            CyclePlan::New { .. } => unreachable!(),
        });
    if extension.is_some() {
        return extension;
    }

    let inner: Vec<NodeId> = p1.vertices[1..p1.vertices.len() - 1].to_vec();
    let disjoint = without_l.remove_links(&p1.links).ok()?.isolate_nodes(&inner);
    if let Ok(p2) = select_best(&candidate_paths(&disjoint, &req)) {
        let mut vertices = p1.vertices.clone();
        vertices.extend(p2.vertices[1..p2.vertices.len() - 1].iter().rev());
        let mut links = p1.links.clone();
        links.extend(p2.links.iter().rev());
        if let Some(blocks) = first_fit_each(g, &links, demand) {
            return Some(CyclePlan::New { vertices, links, blocks, capacity: demand, role: Role::Straddling });
        }
    }

    if g.link(l)?.bitmap.is_feasible(demand) {
        let vertices = p1.vertices.clone();
        let mut links = p1.links.clone();
        links.push(l);
        let blocks = first_fit_each(g, &links, demand)?;
        return Some(CyclePlan::New { vertices, links, blocks, capacity: demand, role: Role::OnCycle });
    }
    None
}

/// Carries out a plan, reserving spectrum; returns the cycle id.
pub fn apply_plan(g: &mut NetworkGraph, cs: &mut DCycleSet, plan: CyclePlan) -> Result<u64> {
    match plan {
        CyclePlan::New { vertices, links, blocks, capacity, .. } => {
            let per_link: Vec<_> = links.iter().copied().zip(blocks.iter().copied()).collect();
            g.allocate_each(&per_link)?;
            let id = cs.next_id;
            cs.next_id += 1;
            cs.cycles.insert(
                id,
                DCycle { id, vertices, links, blocks, capacity_slots: capacity, protected: Vec::new() },
            );
            Ok(id)
        }
        CyclePlan::Extend { cycle, vertices, links, added, dropped } => {
            let c = cs.cycles.get_mut(&cycle).expect("planned against this set");
            g.allocate_each(&added)?;
            let released: Vec<_> = c
                .links
                .iter()
                .zip(&c.blocks)
                .filter(|(l, _)| dropped.contains(l))
                .map(|(&l, &b)| (l, b))
                .collect();
            g.release_each(&released)?;
            let old: BTreeMap<LinkId, SlotBlock> = c.links.iter().copied().zip(c.blocks.iter().copied()).collect();
            let fresh: BTreeMap<LinkId, SlotBlock> = added.into_iter().collect();
            c.blocks = links.iter().map(|l| old.get(l).or_else(|| fresh.get(l)).copied().expect("every link reserved")).collect();
            c.vertices = vertices;
            c.links = links;
            Ok(cycle)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleProtection {
    pub cycle: u64,
    pub link: LinkId,
    pub role: Role,
    pub a_bp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcycResult {
    pub protections: Vec<CycleProtection>,
    pub a_pp_max: f64,
}

/// Protects the least available links of `best_path` one at a time until
/// the path reaches `a_th`. Returns `None`, with every reservation from
/// this call undone, if some link cannot be protected first.
pub fn dcyc(
    graph: &mut NetworkGraph,
    cs: &mut DCycleSet,
    lr: &LightpathRequest,
    wp: ConnId,
    best_path: &CandidatePath,
    a_pp_max: f64,
    a_th: f64,
) -> Option<DcycResult> {
    let saved_bitmaps = graph.bitmaps();
    let saved_cycles = cs.clone();
    let rollback = |graph: &mut NetworkGraph, cs: &mut DCycleSet| {
        graph.restore_bitmaps(saved_bitmaps.clone());
        *cs = saved_cycles.clone();
    };

    let mut working: Vec<(LinkId, f64)> = best_path
        .links
        .iter()
        .map(|&l| (l, graph.availability(l).expect("working links exist")))
        .collect();
    let mut a_pp = a_pp_max;
    let mut protections: Vec<CycleProtection> = Vec::new();
    let demand = lr.slots_needed;
    while !meets_threshold(a_pp, a_th) {
        let open: Vec<(LinkId, f64)> = working
            .iter()
            .copied()
            .filter(|(l, _)| protections.iter().all(|p| p.link != *l))
            .collect();
        let Some(l) = min_availability_link(&open) else {
            rollback(graph, cs);
            return None;
        };
        let cycle_id = match check_cycles(cs, graph, l, demand) {
            Some((id, _)) => id,
            None => match find_cycle_for(graph, cs, l, demand, lr.k) {
                Some(plan) => match apply_plan(graph, cs, plan) {
                    Ok(id) => id,
                    Err(_) => {
                        rollback(graph, cs);
                        return None;
                    }
                },
                None => {
                    rollback(graph, cs);
                    return None;
                }
            },
        };
        let c = cs.cycles.get_mut(&cycle_id).expect("cycle just chosen");
        let role = c.role_of(graph, l).expect("cycle covers the link");
        c.protected.push(ProtectedLink { link: l, wp, demand });
        let a_bp = c.backup_availability(graph, l, demand);
        let slot = working.iter_mut().find(|(x, _)| *x == l).expect("link on path");
        let (new_pp, a_pl) = ava_dcyc_update(a_pp, slot.1, a_bp).expect("link availability is positive");
        a_pp = new_pp;
        slot.1 = a_pl;
        protections.push(CycleProtection { cycle: cycle_id, link: l, role, a_bp });
    }
    Some(DcycResult { protections, a_pp_max: a_pp })
}

/// Frees and forgets every cycle that protects nothing.
pub fn dismantle_unused(g: &mut NetworkGraph, cs: &mut DCycleSet) -> Result<()> {
    let idle: Vec<u64> = cs.cycles.values().filter(|c| c.protected.is_empty()).map(|c| c.id).collect();
    for id in idle {
        let c = cs.cycles.remove(&id).expect("listed");
        let per_link: Vec<_> = c.links.iter().copied().zip(c.blocks.iter().copied()).collect();
        g.release_each(&per_link)?;
    }
    Ok(())
}
