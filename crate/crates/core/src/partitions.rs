//! Set partitions of the parties, the refinement order, and the search for
//! the minimal partitions compatible with a list of entanglement constraints.
//!
//! Partitions are stored as restricted-growth strings over a sorted ground
//! set: position `i` holds the block index of `ground[i]`, and blocks are
//! numbered in order of first appearance. Two partitions are equal exactly
//! when their ground sets and strings are equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Bipartition, MeasureKind};

pub const MAX_BRUTE_FORCE_PARTIES: usize = 6;
pub const MAX_POSET_PARTIES: usize = 5;
pub const MAX_PARTIES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetPartition {
    ground: Vec<usize>,
    rgs: Vec<u8>,
}

impl SetPartition {
    /// Canonicalizes an arbitrary block labelling of `ground`.
    pub fn from_assignment(ground: &[usize], assignment: &[usize]) -> Result<Self> {
        if ground.len() != assignment.len() {
            return Err(Error::DimensionMismatch {
                expected: ground.len(),
                found: assignment.len(),
            });
        }
        check_ground(ground)?;
        let mut order: Vec<usize> = (0..ground.len()).collect();
        order.sort_by_key(|&i| ground[i]);
        let mut relabel = BTreeMap::new();
        let mut rgs = Vec::with_capacity(ground.len());
        for &i in &order {
            let next = relabel.len() as u8;
            rgs.push(*relabel.entry(assignment[i]).or_insert(next));
        }
        Ok(Self {
            ground: order.iter().map(|&i| ground[i]).collect(),
            rgs,
        })
    }

    /// Builds a partition of the union of `blocks`.
    pub fn from_blocks(blocks: &[Vec<usize>]) -> Result<Self> {
        let mut ground = Vec::new();
        let mut assignment = Vec::new();
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::EmptySubsystem);
            }
            for &p in block {
                ground.push(p);
                assignment.push(b);
            }
        }
        Self::from_assignment(&ground, &assignment)
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            ground: (0..n).collect(),
            rgs: (0..n).map(|i| i as u8).collect(),
        }
    }

    pub fn single_block(n: usize) -> Self {
        Self {
            ground: (0..n).collect(),
            rgs: vec![0; n],
        }
    }

    pub fn ground(&self) -> &[usize] {
        &self.ground
    }

    pub fn rgs(&self) -> &[u8] {
        &self.rgs
    }

    pub fn n_blocks(&self) -> usize {
        self.rgs.iter().max().map_or(0, |&m| m as usize + 1)
    }

    /// Blocks of party labels, ordered by smallest element.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (&p, &b) in self.ground.iter().zip(&self.rgs) {
            out[b as usize].push(p);
        }
        out
    }

    fn block_of(&self, party: usize) -> Option<u8> {
        self.ground.binary_search(&party).ok().map(|i| self.rgs[i])
    }

    /// Merges blocks `a` and `b`.
    pub fn merge(&self, a: usize, b: usize) -> Self {
        let (keep, drop) = (a.min(b) as u8, a.max(b) as u8);
        let assignment: Vec<usize> = self.rgs.iter().map(|&r| if r == drop { keep } else { r } as usize).collect();
        Self::from_assignment(&self.ground, &assignment).expect("ground set already valid")
    }
}

impl fmt::Display for SetPartition {
    /// 1-based labels, `{12|34}`; commas separate labels once any exceeds 9.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.ground.iter().any(|&p| p >= 9) { "," } else { "" };
        let blocks: Vec<String> = self
            .blocks()
            .iter()
            .map(|b| b.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(sep))
            .collect();
        write!(f, "{{{}}}", blocks.join("|"))
    }
}

impl Serialize for SetPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SetPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<usize>>::deserialize(d)?;
        Self::from_blocks(&blocks).map_err(serde::de::Error::custom)
    }
}

fn check_ground(ground: &[usize]) -> Result<()> {
    if ground.len() > MAX_PARTIES {
        return Err(Error::TooLarge {
            what: "partition ground set",
            n: ground.len(),
            max: MAX_PARTIES,
        });
    }
    let set: BTreeSet<usize> = ground.iter().copied().collect();
    if set.len() != ground.len() {
        return Err(Error::LabelCollision(ground.to_vec()));
    }
    Ok(())
}

/// `true` iff every block of `p` lies inside a block of `q`.
pub fn is_refinement(p: &SetPartition, q: &SetPartition) -> Result<bool> {
    if p.ground != q.ground {
        return Err(Error::GroundSetMismatch(p.ground.len(), q.ground.len()));
    }
    Ok(refines(p, q))
}

fn refines(p: &SetPartition, q: &SetPartition) -> bool {
    let mut image = [u8::MAX; MAX_PARTIES];
    for (&pb, &qb) in p.rgs.iter().zip(&q.rgs) {
        let slot = &mut image[pb as usize];
        if *slot == u8::MAX {
            *slot = qb;
        } else if *slot != qb {
            return false;
        }
    }
    true
}

/// `{P_k ∩ U}` with empty intersections dropped.
pub fn induced_partition(p: &SetPartition, u: &[usize]) -> Result<SetPartition> {
    if u.is_empty() {
        return Err(Error::EmptySubsystem);
    }
    let mut assignment = Vec::with_capacity(u.len());
    for &x in u {
        assignment.push(p.block_of(x).ok_or(Error::UnknownParty(x))? as usize);
    }
    SetPartition::from_assignment(u, &assignment)
}

/// What a constraint was derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: MeasureKind,
    pub subsystem: Vec<usize>,
    pub value: f64,
    pub p_value: f64,
}

/// Parties of `z1` and `z2` cannot all be kept in separate blocks: some
/// block must meet both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Constraint {
    pub fn new(z1: &[usize], z2: &[usize]) -> Result<Self> {
        let b = Bipartition::new(z1, z2)?;
        Ok(Self::from_bipartition(&b))
    }

    pub fn from_bipartition(b: &Bipartition) -> Self {
        Self {
            z1: b.block_a.clone(),
            z2: b.block_b.clone(),
            provenance: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn size(&self) -> usize {
        self.z1.len() + self.z2.len()
    }

    /// Total order used when applying constraints: size, then lexicographic.
    pub fn order_key(&self) -> (usize, &[usize], &[usize]) {
        (self.size(), &self.z1, &self.z2)
    }

    fn same_sets(&self, other: &Self) -> bool {
        self.z1 == other.z1 && self.z2 == other.z2
    }

    /// `true` when every partition compatible with `self` is compatible with `other`.
    pub fn implies(&self, other: &Self) -> bool {
        let sub = |a: &[usize], b: &[usize]| a.iter().all(|x| b.contains(x));
        (sub(&self.z1, &other.z1) && sub(&self.z2, &other.z2)) || (sub(&self.z1, &other.z2) && sub(&self.z2, &other.z1))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |b: &[usize]| b.iter().map(|p| (p + 1).to_string()).collect::<Vec<_>>().join(",");
        write!(f, "({{{}}},{{{}}})", show(&self.z1), show(&self.z2))
    }
}

/// `true` iff some block of `p` meets both `z1` and `z2`.
pub fn is_compatible(p: &SetPartition, c: &Constraint) -> Result<bool> {
    let mut seen = [false; MAX_PARTIES];
    for &x in &c.z1 {
        seen[p.block_of(x).ok_or(Error::UnknownParty(x))? as usize] = true;
    }
    for &x in &c.z2 {
        if seen[p.block_of(x).ok_or(Error::UnknownParty(x))? as usize] {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Drops constraints implied by a different one. Of several constraints
/// with identical sets only the first is kept. Input order is preserved.
pub fn prune_redundant(constraints: &[Constraint]) -> Vec<Constraint> {
    let mut unique: Vec<&Constraint> = Vec::new();
    for c in constraints {
        if !unique.iter().any(|u| u.same_sets(c)) {
            unique.push(c);
        }
    }
    unique
        .iter()
        .filter(|c| !unique.iter().any(|o| !o.same_sets(c) && o.implies(c)))
        .map(|c| (*c).clone())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSet {
    pub n: usize,
    /// Canonical partitions sorted by restricted-growth string.
    pub partitions: Vec<SetPartition>,
    pub constraints_applied: Vec<Constraint>,
    /// Set size after initialization and after each applied constraint.
    pub size_trace: Vec<usize>,
}

impl MinimalSet {
    pub fn initial(n: usize) -> Self {
        Self {
            n,
            partitions: vec![SetPartition::singletons(n)],
            constraints_applied: Vec::new(),
            size_trace: vec![1],
        }
    }

    pub fn contains(&self, p: &SetPartition) -> bool {
        self.partitions.binary_search(p).is_ok()
    }

    pub fn is_antichain(&self) -> bool {
        self.partitions
            .iter()
            .enumerate()
            .all(|(i, p)| self.partitions.iter().enumerate().all(|(j, q)| i == j || !refines(p, q)))
    }

    /// `"{12|34}, {13|24}"`.
    pub fn render(&self) -> String {
        self.partitions.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MinimalSetExport::from(self))?)
    }
}

/// JSON shape of a [`MinimalSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSetExport {
    pub ground_set: Vec<usize>,
    pub partitions: Vec<Vec<Vec<usize>>>,
    pub rendered: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub size_trace: Vec<usize>,
}

impl From<&MinimalSet> for MinimalSetExport {
    fn from(m: &MinimalSet) -> Self {
        Self {
            ground_set: (0..m.n).collect(),
            partitions: m.partitions.iter().map(|p| p.blocks()).collect(),
            rendered: m.partitions.iter().map(|p| p.to_string()).collect(),
            constraints: m.constraints_applied.clone(),
            size_trace: m.size_trace.clone(),
        }
    }
}

fn check_constraint(n: usize, c: &Constraint) -> Result<()> {
    if c.z1.is_empty() || c.z2.is_empty() {
        return Err(Error::DegenerateBipartition);
    }
    for &x in c.z1.iter().chain(&c.z2) {
        if x >= n {
            return Err(Error::UnknownParty(x));
        }
    }
    if c.z1.iter().any(|x| c.z2.contains(x)) {
        return Err(Error::LabelCollision(c.z1.iter().chain(&c.z2).copied().collect()));
    }
    Ok(())
}

/// One step of the minimal-set update: compatible members survive, each
/// incompatible member is replaced by every merge of a block meeting `z1`
/// with a block meeting `z2`, and non-minimal candidates are dropped.
pub fn minimal_update(m: &MinimalSet, c: &Constraint) -> Result<MinimalSet> {
    check_constraint(m.n, c)?;
    let mut kept = Vec::new();
    let mut candidates = BTreeSet::new();
    for p in &m.partitions {
        if is_compatible(p, c)? {
            kept.push(p.clone());
            continue;
        }
        let meets = |z: &[usize]| -> BTreeSet<usize> { z.iter().filter_map(|&x| p.block_of(x)).map(usize::from).collect() };
        let (a1, a2) = (meets(&c.z1), meets(&c.z2));
        for &i in &a1 {
            for &j in &a2 {
                candidates.insert(p.merge(i, j));
            }
        }
    }
    let kept_set: BTreeSet<SetPartition> = kept.iter().cloned().collect();
    let candidates: Vec<SetPartition> = candidates.into_iter().filter(|t| !kept_set.contains(t)).collect();
    let survivors: Vec<SetPartition> = candidates
        .iter()
        .enumerate()
        .filter(|(i, t)| {
            !kept.iter().any(|s| refines(s, t))
                && !candidates.iter().enumerate().any(|(j, o)| j != *i && refines(o, t))
        })
        .map(|(_, t)| t.clone())
        .collect();
    let mut partitions: Vec<SetPartition> = kept.into_iter().chain(survivors).collect();
    partitions.sort();
    partitions.dedup();
    let mut constraints_applied = m.constraints_applied.clone();
    constraints_applied.push(c.clone());
    let mut size_trace = m.size_trace.clone();
    size_trace.push(partitions.len());
    Ok(MinimalSet {
        n: m.n,
        partitions,
        constraints_applied,
        size_trace,
    })
}

/// Prunes redundant constraints, orders the rest by size then
/// lexicographically, and folds [`minimal_update`] from the all-singletons
/// partition.
pub fn minimal_partitions(n: usize, constraints: &[Constraint]) -> Result<MinimalSet> {
    if n == 0 {
        return Err(Error::EmptySubsystem);
    }
    if n > MAX_PARTIES {
        return Err(Error::TooLarge {
            what: "minimal partition search",
            n,
            max: MAX_PARTIES,
        });
    }
    for c in constraints {
        check_constraint(n, c)?;
    }
    let mut ordered = prune_redundant(constraints);
    ordered.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    let mut m = MinimalSet::initial(n);
    for c in &ordered {
        m = minimal_update(&m, c)?;
    }
    Ok(m)
}

/// Every partition of `0..n` in restricted-growth-string order.
pub fn all_partitions(n: usize) -> Result<Vec<SetPartition>> {
    if n > MAX_BRUTE_FORCE_PARTIES + 2 {
        return Err(Error::TooLarge {
            what: "partition enumeration",
            n,
            max: MAX_BRUTE_FORCE_PARTIES + 2,
        });
    }
    let ground: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    let mut rgs = vec![0u8; n];
    fn rec(i: usize, max: u8, rgs: &mut Vec<u8>, ground: &[usize], out: &mut Vec<SetPartition>) {
        if i == rgs.len() {
            out.push(SetPartition {
                ground: ground.to_vec(),
                rgs: rgs.clone(),
            });
            return;
        }
        for b in 0..=max + 1 {
            rgs[i] = b;
            rec(i + 1, max.max(b), rgs, ground, out);
        }
    }
    if n == 0 {
        return Ok(out);
    }
    rec(1, 0, &mut rgs, &ground, &mut out);
    Ok(out)
}

/// Oracle: filters every partition by compatibility and keeps the minimal ones.
pub fn brute_force_minimal(n: usize, constraints: &[Constraint]) -> Result<MinimalSet> {
    if n > MAX_BRUTE_FORCE_PARTIES {
        return Err(Error::TooLarge {
            what: "brute-force minimal partitions",
            n,
            max: MAX_BRUTE_FORCE_PARTIES,
        });
    }
    for c in constraints {
        check_constraint(n, c)?;
    }
    let allowed: Vec<SetPartition> = all_partitions(n)?
        .into_iter()
        .filter(|p| constraints.iter().all(|c| is_compatible(p, c).unwrap_or(false)))
        .collect();
    let partitions: Vec<SetPartition> = allowed
        .iter()
        .filter(|p| !allowed.iter().any(|q| q != *p && refines(q, p)))
        .cloned()
        .collect();
    Ok(MinimalSet {
        n,
        size_trace: vec![partitions.len()],
        partitions,
        constraints_applied: constraints.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosetNode {
    pub partition: SetPartition,
    pub forbidden: bool,
}

/// All partitions of `0..n` with covering edges `(finer, coarser)` indexed
/// into `nodes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poset {
    pub n: usize,
    pub nodes: Vec<PosetNode>,
    pub edges: Vec<(usize, usize)>,
}

impl Poset {
    pub fn allowed(&self) -> impl Iterator<Item = &SetPartition> {
        self.nodes.iter().filter(|n| !n.forbidden).map(|n| &n.partition)
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph partitions {\n  rankdir=BT;\n  node [shape=box];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let style = if node.forbidden {
                ", color=red, fontcolor=red, style=dashed, forbidden=true"
            } else {
                ""
            };
            s.push_str(&format!("  p{i} [label=\"{}\"{style}];\n", node.partition));
        }
        for (a, b) in &self.edges {
            s.push_str(&format!("  p{a} -> p{b};\n"));
        }
        s.push_str("}\n");
        s
    }
}

/// Partition poset with every partition incompatible with some constraint
/// marked forbidden.
pub fn allowed_poset(n: usize, constraints: &[Constraint]) -> Result<Poset> {
    if n > MAX_POSET_PARTIES {
        return Err(Error::TooLarge {
            what: "poset export",
            n,
            max: MAX_POSET_PARTIES,
        });
    }
    for c in constraints {
        check_constraint(n, c)?;
    }
    let all = all_partitions(n)?;
    let index: BTreeMap<&SetPartition, usize> = all.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut edges = Vec::new();
    for (i, p) in all.iter().enumerate() {
        let k = p.n_blocks();
        let mut covers = BTreeSet::new();
        for a in 0..k {
            for b in a + 1..k {
                covers.insert(index[&p.merge(a, b)]);
            }
        }
        edges.extend(covers.into_iter().map(|j| (i, j)));
    }
    let nodes = all
        .into_iter()
        .map(|p| {
            let forbidden = constraints.iter().any(|c| !is_compatible(&p, c).unwrap_or(true));
            PosetNode { partition: p, forbidden }
        })
        .collect();
    Ok(Poset { n, nodes, edges })
}
