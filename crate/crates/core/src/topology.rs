//! Network graph, per-link spectrum state and availability.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::availability::link_availability;
use crate::error::{Error, Result};
use crate::spectrum::{SlotBlock, SpectrumBitmap};

/// Default number of slots per link: 4 THz of 12.5 GHz channels.
pub const DEFAULT_SLOT_COUNT: usize = 320;

/// One year of operation between failures.
pub const DEFAULT_MTTF_HOURS: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// A bidirectional fiber link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    /// Endpoints with the lower node id first.
    pub endpoints: (NodeId, NodeId),
    pub length_km: f64,
    pub bitmap: SpectrumBitmap,
    pub mttf_h: f64,
    pub mttr_h: f64,
    availability: f64,
}

impl Link {
    pub fn new(id: LinkId, a: NodeId, b: NodeId, length_km: f64, slots: usize, mttf_h: f64, mttr_h: f64) -> Self {
        let endpoints = if a <= b { (a, b) } else { (b, a) };
        Self {
            id,
            endpoints,
            length_km,
            bitmap: SpectrumBitmap::all_free(slots),
            mttf_h,
            mttr_h,
            availability: link_availability(mttf_h, mttr_h),
        }
    }

    /// Builds a link whose repair time is chosen so that it reaches `availability`
    /// with the given failure time.
    pub fn with_availability(
        id: LinkId,
        a: NodeId,
        b: NodeId,
        length_km: f64,
        slots: usize,
        mttf_h: f64,
        availability: f64,
    ) -> Result<Self> {
        if !(availability > 0.0 && availability <= 1.0) {
            return Err(Error::InvalidAvailability(availability));
        }
        let mttr_h = mttf_h * (1.0 - availability) / availability;
        Ok(Self::new(id, a, b, length_km, slots, mttf_h, mttr_h))
    }

    pub fn availability(&self) -> f64 {
        self.availability
    }

    pub fn other_end(&self, n: NodeId) -> NodeId {
        if self.endpoints.0 == n {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }

    pub fn touches(&self, n: NodeId) -> bool {
        self.endpoints.0 == n || self.endpoints.1 == n
    }
}

/// How links without an explicit availability get one.
///
/// The failure time is fixed network-wide and the repair time is derived
/// from the drawn availability. With jitter, each link draws uniformly from
/// `[target - h, min(target + h, 1)]` where `h` is half the distance from
/// `target` to the next "nine" (0.99 -> 0.999 gives `h = 0.0045`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityPolicy {
    pub target: f64,
    pub jitter_seed: Option<u64>,
    pub mttf_h: f64,
}

impl AvailabilityPolicy {
    pub fn uniform(target: f64) -> Self {
        Self { target, jitter_seed: None, mttf_h: DEFAULT_MTTF_HOURS }
    }

    pub fn jittered(target: f64, seed: u64) -> Self {
        Self { target, jitter_seed: Some(seed), mttf_h: DEFAULT_MTTF_HOURS }
    }

    pub fn half_step(&self) -> f64 {
        0.45 * (1.0 - self.target)
    }

    pub fn range(&self) -> (f64, f64) {
        let h = self.half_step();
        (self.target - h, (self.target + h).min(1.0))
    }

    /// Availabilities for `n` links in link order.
    pub fn draw(&self, n: usize) -> Result<Vec<f64>> {
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::InvalidAvailability(self.target));
        }
        Ok(match self.jitter_seed {
            None => vec![self.target; n],
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (lo, hi) = self.range();
                (0..n)
                    .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    names: Vec<String>,
    links: Vec<Option<Link>>,
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    slot_count: usize,
}

impl NetworkGraph {
    pub fn new(slot_count: usize) -> Self {
        Self { names: Vec::new(), links: Vec::new(), adjacency: Vec::new(), slot_count }
    }

    pub fn add_node(&mut self, name: impl Into<String>) -> NodeId {
        self.names.push(name.into());
        self.adjacency.push(Vec::new());
        NodeId(self.names.len() - 1)
    }

    /// Adds a link with the given availability (failure time `mttf_h`).
    pub fn add_link(&mut self, a: NodeId, b: NodeId, length_km: f64, availability: f64, mttf_h: f64) -> Result<LinkId> {
        for n in [a, b] {
            if n.0 >= self.names.len() {
                return Err(Error::UnknownNode(n.to_string()));
            }
        }
        if a == b || self.link_between(a, b).is_some() {
            return Err(Error::DuplicateLink(self.names[a.0].clone(), self.names[b.0].clone()));
        }
        let id = LinkId(self.links.len());
        let link = Link::with_availability(id, a, b, length_km, self.slot_count, mttf_h, availability)?;
        self.links.push(Some(link));
        for (x, y) in [(a, b), (b, a)] {
            let adj = &mut self.adjacency[x.0];
            adj.push((y, id));
            adj.sort();
        }
        Ok(id)
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn node_name(&self, n: NodeId) -> &str {
        &self.names[n.0]
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    /// Number of links currently present.
    pub fn link_count(&self) -> usize {
        self.links.iter().flatten().count()
    }

    /// Upper bound on link ids, including removed ones.
    pub fn link_capacity(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter().flatten()
    }

    pub fn links_mut(&mut self) -> impl Iterator<Item = &mut Link> {
        self.links.iter_mut().flatten()
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.get(id.0).and_then(Option::as_ref)
    }

    pub fn link_mut(&mut self, id: LinkId) -> Option<&mut Link> {
        self.links.get_mut(id.0).and_then(Option::as_mut)
    }

    pub fn try_link(&self, id: LinkId) -> Result<&Link> {
        self.link(id).ok_or(Error::UnknownLink(id))
    }

    /// Neighbours of `n` with the connecting link, sorted by neighbour id.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[n.0]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adjacency[n.0].len()
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.adjacency
            .get(a.0)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, l)| l)
    }

    pub fn availability(&self, id: LinkId) -> Result<f64> {
        Ok(self.try_link(id)?.availability())
    }

    pub fn is_connected(&self) -> bool {
        if self.names.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in self.neighbors(u) {
                if !seen[v.0] {
                    seen[v.0] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// A copy of the graph without the given links. `self` is left untouched.
    pub fn remove_links(&self, links: &[LinkId]) -> Result<NetworkGraph> {
        let mut out = self.clone();
        for &id in links {
            let link = out.links.get_mut(id.0).and_then(Option::take).ok_or(Error::UnknownLink(id))?;
            let (a, b) = link.endpoints;
            out.adjacency[a.0].retain(|&(_, l)| l != id);
            out.adjacency[b.0].retain(|&(_, l)| l != id);
        }
        Ok(out)
    }

    /// A copy without the given nodes' incident links.
    pub fn isolate_nodes(&self, nodes: &[NodeId]) -> NetworkGraph {
        let ids: Vec<LinkId> = nodes
            .iter()
            .flat_map(|&n| self.neighbors(n).iter().map(|&(_, l)| l))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        self.remove_links(&ids).expect("incident links exist")
    }

    /// Occupies the same block on every listed link, all or nothing.
    pub fn allocate(&mut self, links: &[LinkId], block: SlotBlock) -> Result<()> {
        let per_link: Vec<_> = links.iter().map(|&l| (l, block)).collect();
        self.allocate_each(&per_link)
    }

    /// Frees the same block on every listed link, all or nothing.
    pub fn release(&mut self, links: &[LinkId], block: SlotBlock) -> Result<()> {
        let per_link: Vec<_> = links.iter().map(|&l| (l, block)).collect();
        self.release_each(&per_link)
    }

    /// Occupies a (possibly different) block on each link, all or nothing.
    pub fn allocate_each(&mut self, blocks: &[(LinkId, SlotBlock)]) -> Result<()> {
        for &(l, b) in blocks {
            let bitmap = &self.try_link(l)?.bitmap;
            if b.len == 0 || b.end() > bitmap.len() {
                return Err(Error::BlockOutOfRange { start: b.start, end: b.end(), len: bitmap.len() });
            }
            if !bitmap.block_is_free(b) {
                return Err(Error::Conflict(l));
            }
        }
        // Duplicate links with overlapping blocks would pass the check above.
        for (i, &(l, b)) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|&(l2, b2)| l2 == l && b2.overlaps(&b)) {
                return Err(Error::Conflict(l));
            }
        }
        for &(l, b) in blocks {
            self.link_mut(l).expect("checked").bitmap.set_busy(b)?;
        }
        Ok(())
    }

    pub fn release_each(&mut self, blocks: &[(LinkId, SlotBlock)]) -> Result<()> {
        for &(l, b) in blocks {
            if !self.try_link(l)?.bitmap.block_is_busy(b) {
                return Err(Error::DoubleFree(l));
            }
        }
        for &(l, b) in blocks {
            self.link_mut(l).expect("checked").bitmap.set_free(b)?;
        }
        Ok(())
    }

    /// Busy slots summed over all links.
    pub fn busy_slots(&self) -> usize {
        self.links().map(|l| l.bitmap.count_busy()).sum()
    }

    pub fn total_slots(&self) -> usize {
        self.link_count() * self.slot_count
    }

    /// Per-link bitmaps, for snapshots and rollback.
    pub fn bitmaps(&self) -> Vec<Option<SpectrumBitmap>> {
        self.links.iter().map(|l| l.as_ref().map(|l| l.bitmap.clone())).collect()
    }

    pub fn restore_bitmaps(&mut self, saved: Vec<Option<SpectrumBitmap>>) {
        for (slot, bm) in self.links.iter_mut().zip(saved) {
            if let (Some(link), Some(bm)) = (slot.as_mut(), bm) {
                link.bitmap = bm;
            }
        }
    }
}

/// 14-node, 22-link NSFNET as `(a, b, km)` with 1-based node labels.
pub const NSFNET_LINKS: [(usize, usize, f64); 22] = [
    (1, 2, 2100.0),
    (1, 3, 3000.0),
    (1, 8, 4800.0),
    (2, 3, 1200.0),
    (2, 4, 1500.0),
    (3, 6, 3600.0),
    (4, 5, 1200.0),
    (4, 9, 2700.0),
    (4, 11, 3900.0),
    (5, 6, 2400.0),
    (5, 7, 1200.0),
    (6, 10, 2100.0),
    (6, 14, 3600.0),
    (7, 8, 1500.0),
    (8, 9, 1500.0),
    (9, 10, 1500.0),
    (9, 12, 600.0),
    (9, 13, 600.0),
    (11, 12, 1200.0),
    (11, 13, 1500.0),
    (12, 14, 600.0),
    (13, 14, 300.0),
];

pub fn build_nsfnet(slot_count: usize, policy: &AvailabilityPolicy) -> Result<NetworkGraph> {
    let mut g = NetworkGraph::new(slot_count);
    for i in 1..=14 {
        g.add_node(i.to_string());
    }
    let avail = policy.draw(NSFNET_LINKS.len())?;
    for (&(a, b, km), av) in NSFNET_LINKS.iter().zip(avail) {
        g.add_link(NodeId(a - 1), NodeId(b - 1), km, av, policy.mttf_h)?;
    }
    Ok(g)
}

/// Parsed topology file, before availabilities are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyFile {
    pub nodes: Vec<String>,
    pub links: Vec<LinkDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecl {
    pub a: String,
    pub b: String,
    pub length_km: f64,
    pub availability: Option<f64>,
}

impl TopologyFile {
    /// Parses `node <name>` / `link <u> <v> <length_km> [availability]` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes: Vec<String> = Vec::new();
        let mut index = BTreeMap::new();
        let mut links = Vec::new();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line, msg };
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields[0] {
                "node" => {
                    let [_, name] = fields[..] else {
                        return Err(err("expected `node <name>`".into()));
                    };
                    if index.insert(name.to_string(), nodes.len()).is_some() {
                        return Err(err(format!("node `{name}` declared twice")));
                    }
                    nodes.push(name.to_string());
                }
                "link" => {
                    if !(4..=5).contains(&fields.len()) {
                        return Err(err("expected `link <u> <v> <length_km> [availability]`".into()));
                    }
                    let (a, b) = (fields[1], fields[2]);
                    for n in [a, b] {
                        if !index.contains_key(n) {
                            return Err(err(format!("unknown node `{n}`")));
                        }
                    }
                    if a == b {
                        return Err(err(format!("self-loop on `{a}`")));
                    }
                    let length_km: f64 = fields[3]
                        .parse()
                        .ok()
                        .filter(|x: &f64| *x > 0.0)
                        .ok_or_else(|| err(format!("bad length `{}`", fields[3])))?;
                    let availability = match fields.get(4) {
                        None => None,
                        Some(s) => Some(
                            s.parse()
                                .ok()
                                .filter(|x: &f64| *x > 0.0 && *x <= 1.0)
                                .ok_or_else(|| err(format!("bad availability `{s}`")))?,
                        ),
                    };
                    let key = if index[a] < index[b] { (index[a], index[b]) } else { (index[b], index[a]) };
                    if seen.insert(key, line).is_some() {
                        return Err(Error::DuplicateLink(a.to_string(), b.to_string()));
                    }
                    links.push(LinkDecl { a: a.into(), b: b.into(), length_km, availability });
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        Ok(Self { nodes, links })
    }

    /// Materializes the graph. Links without an availability take one from
    /// `policy`, drawn in file order.
    pub fn build(&self, slot_count: usize, policy: &AvailabilityPolicy) -> Result<NetworkGraph> {
        let mut g = NetworkGraph::new(slot_count);
        for n in &self.nodes {
            g.add_node(n.clone());
        }
        let mut drawn = policy.draw(self.links.len())?.into_iter();
        for decl in &self.links {
            let policy_value = drawn.next().expect("one draw per link");
            let a = g.node_id(&decl.a).ok_or_else(|| Error::UnknownNode(decl.a.clone()))?;
            let b = g.node_id(&decl.b).ok_or_else(|| Error::UnknownNode(decl.b.clone()))?;
            g.add_link(a, b, decl.length_km, decl.availability.unwrap_or(policy_value), policy.mttf_h)?;
        }
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }
}

pub fn load_topology(text: &str, slot_count: usize, policy: &AvailabilityPolicy) -> Result<NetworkGraph> {
    TopologyFile::parse(text)?.build(slot_count, policy)
}

/// The NSFNET topology file shipped with the crate.
pub const NSFNET_TOPOLOGY: &str = include_str!("../data/nsfnet.topo");
