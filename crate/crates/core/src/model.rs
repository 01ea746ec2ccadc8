//! Network model: a directed graph of Poisson gossip rates plus the set of
//! sensing nodes and their sampling rates.
//!
//! Node labels are 0-based. A gossip edge `(i, j)` with rate `r` means node
//! `i` pushes its current version to node `j` at the points of a Poisson
//! process of rate `r`. A sensing entry `i -> r` means node `i` samples the
//! source at rate `r`, producing a new network-wide version each time.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};

/// Largest node count a [`NodeSubset`] can address.
pub const MAX_SUBSET_NODES: usize = 64;

/// A set of node indices stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeSubset(u64);

impl NodeSubset {
    pub const EMPTY: NodeSubset = NodeSubset(0);

    pub fn from_mask(mask: u64) -> Self {
        NodeSubset(mask)
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_SUBSET_NODES, "node index {i} does not fit a subset mask");
        NodeSubset(1 << i)
    }

    /// All nodes `0..n`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_SUBSET_NODES, "n = {n} does not fit a subset mask");
        if n == 64 {
            NodeSubset(u64::MAX)
        } else {
            NodeSubset((1u64 << n) - 1)
        }
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I) -> Self {
        members
            .into_iter()
            .fold(NodeSubset::EMPTY, |s, i| s.with(i))
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_SUBSET_NODES && self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        NodeSubset(self.0 | NodeSubset::singleton(i).0)
    }

    pub fn is_subset_of(self, other: NodeSubset) -> bool {
        self.0 & !other.0 == 0
    }

    /// Highest member index plus one, i.e. the smallest `n` this subset fits.
    pub fn span(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..MAX_SUBSET_NODES).filter(move |&i| mask & (1 << i) != 0)
    }

    /// Space separated member list, as used in CSV output.
    pub fn to_label(self) -> String {
        self.members()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for NodeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for NodeSubset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.members())
    }
}

impl<'de> Deserialize<'de> for NodeSubset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&bad) = members.iter().find(|&&i| i >= MAX_SUBSET_NODES) {
            return Err(serde::de::Error::custom(format!(
                "node index {bad} does not fit a subset mask"
            )));
        }
        Ok(NodeSubset::from_members(members))
    }
}

impl fmt::Debug for NodeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Directed rate graph with a designated sensing subset.
///
/// Construction only checks that indices are in range and that no self-edge
/// is present; rate sanity is reported by [`validate`] so that malformed
/// inputs can be diagnosed rather than rejected outright.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    n: usize,
    gossip_rates: BTreeMap<(usize, usize), f64>,
    sensing_rates: BTreeMap<usize, f64>,
}

impl NetworkSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(AoiError::InvalidTopology("network needs at least one node".into()));
        }
        Ok(NetworkSpec {
            n,
            gossip_rates: BTreeMap::new(),
            sensing_rates: BTreeMap::new(),
        })
    }

    /// Builds a spec from explicit `(from, to, rate)` edges and `(node, rate)`
    /// sensing entries. Repeated edges accumulate their rates.
    pub fn from_parts<E, S>(n: usize, edges: E, sensing: S) -> Result<Self>
    where
        E: IntoIterator<Item = (usize, usize, f64)>,
        S: IntoIterator<Item = (usize, f64)>,
    {
        let mut spec = NetworkSpec::new(n)?;
        for (i, j, rate) in edges {
            spec.add_gossip(i, j, rate)?;
        }
        for (i, rate) in sensing {
            spec.set_sensing(i, rate)?;
        }
        Ok(spec)
    }

    /// Adds `rate` to the directed edge `from -> to`.
    pub fn add_gossip(&mut self, from: usize, to: usize, rate: f64) -> Result<()> {
        self.check_index(from)?;
        self.check_index(to)?;
        if from == to {
            return Err(AoiError::InvalidTopology(format!(
                "self-edge ({from}, {from}) is not a gossip edge; use a sensing rate"
            )));
        }
        *self.gossip_rates.entry((from, to)).or_insert(0.0) += rate;
        Ok(())
    }

    pub fn set_sensing(&mut self, node: usize, rate: f64) -> Result<()> {
        self.check_index(node)?;
        self.sensing_rates.insert(node, rate);
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(AoiError::InvalidTopology(format!(
                "node index {i} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gossip_rates(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.gossip_rates
    }

    pub fn sensing_rates(&self) -> &BTreeMap<usize, f64> {
        &self.sensing_rates
    }

    pub fn gossip_rate(&self, from: usize, to: usize) -> f64 {
        self.gossip_rates.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn sensing_rate(&self, node: usize) -> f64 {
        self.sensing_rates.get(&node).copied().unwrap_or(0.0)
    }

    pub fn is_sensing(&self, node: usize) -> bool {
        self.sensing_rates.contains_key(&node)
    }

    /// The sensing set as a subset mask. Panics if `n` exceeds the mask width.
    pub fn sensing_set(&self) -> NodeSubset {
        NodeSubset::from_members(self.sensing_rates.keys().copied())
    }

    pub fn num_sensing(&self) -> usize {
        self.sensing_rates.len()
    }

    /// Network-wide renewal rate: the sum of all sensing rates.
    pub fn total_renewal_rate(&self) -> f64 {
        self.sensing_rates.values().sum()
    }

    /// Total incoming gossip rate of `node`.
    pub fn incoming_rate(&self, node: usize) -> f64 {
        self.gossip_rates
            .iter()
            .filter(|((_, j), _)| *j == node)
            .map(|(_, r)| r)
            .sum()
    }

    /// Sum of every rate in the network (sensing and gossip).
    pub fn total_event_rate(&self) -> f64 {
        self.total_renewal_rate() + self.gossip_rates.values().sum::<f64>()
    }

    /// Returns a copy with node labels permuted: old node `i` becomes
    /// `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(AoiError::Precondition("permutation length must equal n".into()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(AoiError::Precondition("not a permutation".into()));
            }
        }
        NetworkSpec::from_parts(
            self.n,
            self.gossip_rates
                .iter()
                .map(|(&(i, j), &r)| (perm[i], perm[j], r)),
            self.sensing_rates.iter().map(|(&i, &r)| (perm[i], r)),
        )
    }

    /// Fails with the first fatal diagnostic, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        match validate(self).into_iter().find(Diagnostic::is_fatal) {
            Some(d) => Err(AoiError::InvalidSpec(d.to_string())),
            None => Ok(()),
        }
    }
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(AoiError::InvalidRate(format!("{name} = {rate} must be finite and non-negative")));
    }
    Ok(())
}

fn check_positive_rate(name: &str, rate: f64) -> Result<()> {
    check_rate(name, rate)?;
    if rate == 0.0 {
        return Err(AoiError::InvalidRate(format!("{name} must be positive")));
    }
    Ok(())
}

/// Ring of `n` nodes: every node senses at `lambda` and receives from both
/// ring neighbors at `eta` per directed edge. For `n = 2` both neighbors are
/// the same node, so the two directions merge into one edge of rate `2 eta`.
pub fn build_ring(n: usize, lambda: f64, eta: f64) -> Result<NetworkSpec> {
    if n < 2 {
        return Err(AoiError::InvalidTopology(format!("ring needs n >= 2, got {n}")));
    }
    check_positive_rate("lambda", lambda)?;
    check_rate("eta", eta)?;
    let mut spec = NetworkSpec::new(n)?;
    for i in 0..n {
        spec.set_sensing(i, lambda)?;
        spec.add_gossip((i + n - 1) % n, i, eta)?;
        spec.add_gossip((i + 1) % n, i, eta)?;
    }
    Ok(spec)
}

/// Line of `n` nodes: interior nodes receive from both neighbors, end nodes
/// from their single neighbor, each edge at `eta`. Only `sensing_positions`
/// sample, each at `lambda`.
pub fn build_line(n: usize, sensing_positions: &[usize], lambda: f64, eta: f64) -> Result<NetworkSpec> {
    if n < 2 {
        return Err(AoiError::InvalidTopology(format!("line needs n >= 2, got {n}")));
    }
    if sensing_positions.is_empty() {
        return Err(AoiError::InvalidTopology(
            "line needs at least one sensing node (no renewal source)".into(),
        ));
    }
    check_positive_rate("lambda", lambda)?;
    check_rate("eta", eta)?;
    let mut spec = NetworkSpec::new(n)?;
    for i in 0..n - 1 {
        spec.add_gossip(i, i + 1, eta)?;
        spec.add_gossip(i + 1, i, eta)?;
    }
    for &p in sensing_positions {
        spec.set_sensing(p, lambda)?;
    }
    Ok(spec)
}

/// Fully connected network: every node senses at `lambda` and every ordered
/// pair carries a gossip edge at `eta`.
pub fn build_fully_connected(n: usize, lambda: f64, eta: f64) -> Result<NetworkSpec> {
    if n < 2 {
        return Err(AoiError::InvalidTopology(format!(
            "fully connected network needs n >= 2, got {n}"
        )));
    }
    check_positive_rate("lambda", lambda)?;
    check_rate("eta", eta)?;
    let mut spec = NetworkSpec::new(n)?;
    for i in 0..n {
        spec.set_sensing(i, lambda)?;
        for j in 0..n {
            if i != j {
                spec.add_gossip(i, j, eta)?;
            }
        }
    }
    Ok(spec)
}

/// Single-view reference model: node 0 is the only sensing node (rate
/// `source_rate`) and pushes to each of the `ring_size` ring nodes `1..=ring_size`
/// at `source_rate / ring_size`; ring nodes gossip with their neighbors at `eta`.
pub fn build_hub_ring(ring_size: usize, source_rate: f64, eta: f64) -> Result<NetworkSpec> {
    if ring_size < 2 {
        return Err(AoiError::InvalidTopology(format!(
            "hub ring needs at least 2 ring nodes, got {ring_size}"
        )));
    }
    check_positive_rate("source rate", source_rate)?;
    check_rate("eta", eta)?;
    let n = ring_size + 1;
    let mut spec = NetworkSpec::new(n)?;
    spec.set_sensing(0, source_rate)?;
    let push = source_rate / ring_size as f64;
    for r in 0..ring_size {
        let node = r + 1;
        spec.add_gossip(0, node, push)?;
        spec.add_gossip((r + ring_size - 1) % ring_size + 1, node, eta)?;
        spec.add_gossip((r + 1) % ring_size + 1, node, eta)?;
    }
    Ok(spec)
}

/// Adjacency used to measure runs of non-sensing nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    Line,
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingLayout {
    /// Number of sensing nodes.
    pub q: usize,
    /// Longest run of consecutive non-sensing nodes.
    pub d: usize,
    /// Whether `(d + 1) q >= n` holds.
    pub feasible: bool,
}

/// Counts sensing nodes and the longest run of non-sensing nodes. Under ring
/// adjacency runs wrap around from node `n - 1` to node 0.
pub fn sensing_layout(spec: &NetworkSpec, adjacency: Adjacency) -> SensingLayout {
    let n = spec.n();
    let q = spec.num_sensing();
    let d = if q == 0 {
        n
    } else {
        let walk = match adjacency {
            Adjacency::Line => n,
            // starting after a sensing node, one lap covers every wrapped run
            Adjacency::Ring => 2 * n,
        };
        let mut longest = 0;
        let mut run = 0;
        for step in 0..walk {
            if spec.is_sensing(step % n) {
                run = 0;
            } else {
                run += 1;
                longest = longest.max(run);
            }
        }
        longest.min(n - q)
    };
    SensingLayout {
        q,
        d,
        feasible: (d + 1) * q >= n,
    }
}

/// A problem found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NegativeRate { from: usize, to: usize, rate: f64 },
    NonFiniteRate { from: usize, to: usize, rate: f64 },
    NonPositiveSensingRate { node: usize, rate: f64 },
    NoSensingNode,
    /// A non-sensing node with no update path from any sensing node; its age
    /// grows without bound.
    UnboundedAge { node: usize },
}

impl Diagnostic {
    /// Fatal diagnostics make the spec unusable for any engine. An unbounded
    /// node only poisons queries that depend on it.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, Diagnostic::UnboundedAge { .. })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NegativeRate { from, to, rate } => {
                write!(f, "negative rate: ({from}, {to}) = {rate}")
            }
            Diagnostic::NonFiniteRate { from, to, rate } => {
                write!(f, "non-finite rate: ({from}, {to}) = {rate}")
            }
            Diagnostic::NonPositiveSensingRate { node, rate } => {
                write!(f, "sensing rate of node {node} must be positive, got {rate}")
            }
            Diagnostic::NoSensingNode => write!(f, "empty sensing set: no renewal source"),
            Diagnostic::UnboundedAge { node } => {
                write!(f, "unbounded AoI: no update path to node {node}")
            }
        }
    }
}

/// Structural and rate checks. Returns every violation found; an empty list
/// means the spec is usable by all engines.
pub fn validate(spec: &NetworkSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (&(from, to), &rate) in spec.gossip_rates() {
        if !rate.is_finite() {
            out.push(Diagnostic::NonFiniteRate { from, to, rate });
        } else if rate < 0.0 {
            out.push(Diagnostic::NegativeRate { from, to, rate });
        }
    }
    for (&node, &rate) in spec.sensing_rates() {
        if !rate.is_finite() {
            out.push(Diagnostic::NonFiniteRate { from: node, to: node, rate });
        } else if rate <= 0.0 {
            out.push(Diagnostic::NonPositiveSensingRate { node, rate });
        }
    }
    if spec.num_sensing() == 0 {
        out.push(Diagnostic::NoSensingNode);
        return out;
    }

    // Breadth-first search from the sensing nodes along positive-rate edges.
    let n = spec.n();
    let mut reached = vec![false; n];
    let mut frontier: Vec<usize> = spec.sensing_rates().keys().copied().collect();
    for &s in &frontier {
        reached[s] = true;
    }
    while let Some(i) = frontier.pop() {
        for (&(from, to), &rate) in spec.gossip_rates().range((i, 0)..(i + 1, 0)) {
            debug_assert_eq!(from, i);
            if rate > 0.0 && !reached[to] {
                reached[to] = true;
                frontier.push(to);
            }
        }
    }
    out.extend(
        (0..n)
            .filter(|&i| !reached[i])
            .map(|node| Diagnostic::UnboundedAge { node }),
    );
    out
}
