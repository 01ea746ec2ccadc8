//! Exact stationary average version age for arbitrary subsets.
//!
//! For a subset `S`, the stationary mean age satisfies
//!
//! ```text
//!        sum_{j in I, j notin S} r_jj  +  sum_{j in S, i notin S} r_ij * v(S + i)
//! v(S) = -----------------------------------------------------------------------
//!        sum_{j in I, j in S} r_jj     +  sum_{j in S, i notin S} r_ij
//! ```
//!
//! with `v(N) = 0`. Every right-hand reference is a strict superset of `S`,
//! so the table is filled from the full set downward. Masks are visited in
//! descending numeric order, which places every strict superset before its
//! subsets.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{AoiError, Result};
use crate::model::{NetworkSpec, NodeSubset, MAX_SUBSET_NODES};

/// Default node-count limit for the subset table (2^22 entries, 32 MiB).
pub const DEFAULT_SUBSET_LIMIT: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    ClosedForm,
    /// Closed-form upper bound rather than an exact value.
    ClosedFormBound,
    Simulated,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::ClosedForm => "closed_form",
            Method::ClosedFormBound => "closed_form_bound",
            Method::Simulated => "simulated",
        }
    }
}

/// An average version age with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AoiResult {
    pub subset: NodeSubset,
    pub value: f64,
    pub method: Method,
    pub stderr: Option<f64>,
}

impl AoiResult {
    pub fn exact(subset: NodeSubset, value: f64) -> Self {
        AoiResult {
            subset,
            value,
            method: Method::Exact,
            stderr: None,
        }
    }
}

/// Rates rearranged for the subset recursion.
struct Rates {
    n: usize,
    sensing: Vec<f64>,
    /// incoming[j] = [(i, r_ij)] for positive-rate edges into j
    incoming: Vec<Vec<(usize, f64)>>,
}

impl Rates {
    fn new(spec: &NetworkSpec) -> Self {
        let n = spec.n();
        let mut sensing = vec![0.0; n];
        for (&i, &r) in spec.sensing_rates() {
            sensing[i] = r;
        }
        let mut incoming = vec![Vec::new(); n];
        for (&(i, j), &r) in spec.gossip_rates() {
            if r > 0.0 {
                incoming[j].push((i, r));
            }
        }
        Rates {
            n,
            sensing,
            incoming,
        }
    }

    /// One step of the recursion; `table` must already hold every strict
    /// superset of `mask` that is reachable through a positive-rate edge.
    fn step(&self, mask: u64, table: &[f64]) -> f64 {
        let mut inside_renewal = 0.0;
        let mut outside_renewal = 0.0;
        let mut inflow = 0.0;
        let mut weighted = 0.0;
        for j in 0..self.n {
            if mask & (1 << j) == 0 {
                outside_renewal += self.sensing[j];
                continue;
            }
            inside_renewal += self.sensing[j];
            for &(i, r) in &self.incoming[j] {
                if mask & (1 << i) == 0 {
                    inflow += r;
                    weighted += r * table[(mask | 1 << i) as usize];
                }
            }
        }
        let den = inside_renewal + inflow;
        if den == 0.0 {
            return f64::INFINITY;
        }
        // 0 * inf from an unbounded superset is impossible: only positive
        // rates are stored, so an infinite superset makes `weighted` infinite.
        (outside_renewal + weighted) / den
    }

    fn denominator(&self, mask: u64) -> f64 {
        (0..self.n)
            .filter(|&j| mask & (1 << j) != 0)
            .map(|j| {
                self.sensing[j]
                    + self.incoming[j]
                        .iter()
                        .filter(|(i, _)| mask & (1 << i) == 0)
                        .map(|(_, r)| r)
                        .sum::<f64>()
            })
            .sum()
    }
}

/// Memo table of `v(S)` over all subsets (or all supersets of one root).
///
/// Built once, then read-only: queries take `&self` and may be served from
/// several threads.
pub struct ExactSolver {
    rates: Rates,
    /// Indexed by mask; NaN marks subsets outside the computed region,
    /// +inf marks unbounded ones.
    table: Vec<f64>,
    root: u64,
}

impl ExactSolver {
    /// Solves every non-empty subset. `limit` caps the node count.
    pub fn build(spec: &NetworkSpec, limit: usize) -> Result<Self> {
        Self::build_rooted(spec, NodeSubset::EMPTY, limit)
    }

    /// Solves all supersets of `root` only.
    pub fn build_rooted(spec: &NetworkSpec, root: NodeSubset, limit: usize) -> Result<Self> {
        let n = spec.n();
        let limit = limit.min(MAX_SUBSET_NODES - 1);
        if n > limit {
            return Err(AoiError::Capacity {
                what: format!(
                    "exact subset solver supports at most {limit} nodes, spec has {n}; \
                     use the simulator or a closed-form profile"
                ),
                limit,
            });
        }
        spec.ensure_valid()?;
        if !root.is_subset_of(NodeSubset::full(n)) {
            return Err(AoiError::Precondition(format!("subset {root} exceeds n = {n}")));
        }
        let rates = Rates::new(spec);
        let full = NodeSubset::full(n).mask();
        let mut table = vec![f64::NAN; 1usize << n];
        table[full as usize] = 0.0;

        let free = full & !root.mask();
        // Submasks of `free` in descending order; each union with `root` is
        // preceded by all of its strict supersets.
        let mut sub = free;
        loop {
            let mask = root.mask() | sub;
            if mask != full && mask != 0 {
                table[mask as usize] = rates.step(mask, &table);
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
        Ok(ExactSolver {
            rates,
            table,
            root: root.mask(),
        })
    }

    pub fn n(&self) -> usize {
        self.rates.n
    }

    pub fn value(&self, subset: NodeSubset) -> Result<f64> {
        if subset.is_empty() {
            return Err(AoiError::Precondition("subset must be non-empty".into()));
        }
        if !subset.is_subset_of(NodeSubset::full(self.rates.n)) {
            return Err(AoiError::Precondition(format!(
                "subset {subset} exceeds n = {}",
                self.rates.n
            )));
        }
        if subset.mask() & self.root != self.root {
            return Err(AoiError::Precondition(format!(
                "subset {subset} is outside the solved region"
            )));
        }
        let v = self.table[subset.mask() as usize];
        if v.is_infinite() {
            return Err(AoiError::Unbounded {
                subset: self.unbounded_cause(subset.mask()),
            });
        }
        Ok(v)
    }

    pub fn result(&self, subset: NodeSubset) -> Result<AoiResult> {
        Ok(AoiResult::exact(subset, self.value(subset)?))
    }

    /// Follows infinite entries upward until the subset whose own
    /// denominator vanishes.
    fn unbounded_cause(&self, mut mask: u64) -> NodeSubset {
        loop {
            if self.rates.denominator(mask) == 0.0 {
                return NodeSubset::from_mask(mask);
            }
            let next = (0..self.rates.n)
                .filter(|&j| mask & (1 << j) != 0)
                .flat_map(|j| self.rates.incoming[j].iter())
                .map(|&(i, _)| mask | 1 << i)
                .find(|&m| m != mask && self.table[m as usize].is_infinite());
            match next {
                Some(m) => mask = m,
                None => return NodeSubset::from_mask(mask),
            }
        }
    }
}

/// Exact `v(S)` for one subset, solving only the supersets of `S`.
pub fn solve_subset(spec: &NetworkSpec, subset: NodeSubset) -> Result<AoiResult> {
    solve_subset_with_limit(spec, subset, DEFAULT_SUBSET_LIMIT)
}

pub fn solve_subset_with_limit(spec: &NetworkSpec, subset: NodeSubset, limit: usize) -> Result<AoiResult> {
    if subset.is_empty() {
        return Err(AoiError::Precondition("subset must be non-empty".into()));
    }
    ExactSolver::build_rooted(spec, subset, limit)?.result(subset)
}

/// Exact `v({i})` for every node, sharing one table.
pub fn solve_all_singletons(spec: &NetworkSpec) -> Result<Vec<AoiResult>> {
    solve_all_singletons_with_limit(spec, DEFAULT_SUBSET_LIMIT)
}

pub fn solve_all_singletons_with_limit(spec: &NetworkSpec, limit: usize) -> Result<Vec<AoiResult>> {
    let solver = ExactSolver::build(spec, limit)?;
    (0..spec.n())
        .map(|i| solver.result(NodeSubset::singleton(i)))
        .collect()
}

/// Normalized average age: the age divided by the network renewal rate.
pub fn novai(spec: &NetworkSpec, result: &AoiResult) -> Result<f64> {
    let renewal = spec.total_renewal_rate();
    if !(renewal > 0.0) {
        return Err(AoiError::InvalidSpec("total renewal rate must be positive".into()));
    }
    Ok(result.value / renewal)
}

/// Evaluates the single-sensor form of the recursion independently and
/// compares it with the general solver on `subset`.
///
/// The single-sensor form treats the unique sensing node `s` as an external
/// source: sets containing `s` have age zero, and for other sets
///
/// ```text
///        r_ss + sum_{j in S, i notin S+s} r_ij v(S + i)
/// v(S) = -------------------------------------------------
///        sum_{j in S} r_sj + sum_{j in S, i notin S+s} r_ij
/// ```
pub fn single_view_reduction_check(spec: &NetworkSpec, subset: NodeSubset) -> Result<bool> {
    if spec.num_sensing() != 1 {
        return Err(AoiError::Precondition(format!(
            "single-view reduction needs exactly one sensing node, spec has {}",
            spec.num_sensing()
        )));
    }
    let general = solve_subset(spec, subset)?.value;
    let (&source, &source_rate) = spec.sensing_rates().iter().next().expect("one sensing node");
    let mut memo = HashMap::new();
    let reduced = single_view_value(spec, source, source_rate, subset, &mut memo)?;
    Ok((general - reduced).abs() <= 1e-10 * general.abs().max(1.0))
}

fn single_view_value(
    spec: &NetworkSpec,
    source: usize,
    source_rate: f64,
    subset: NodeSubset,
    memo: &mut HashMap<NodeSubset, f64>,
) -> Result<f64> {
    if subset.contains(source) {
        return Ok(0.0);
    }
    if let Some(&v) = memo.get(&subset) {
        return Ok(v);
    }
    let mut from_source = 0.0;
    let mut inflow = 0.0;
    let mut numerator = source_rate;
    for (&(i, j), &r) in spec.gossip_rates() {
        if r == 0.0 || !subset.contains(j) || subset.contains(i) {
            continue;
        }
        if i == source {
            from_source += r;
        } else {
            inflow += r;
            numerator += r * single_view_value(spec, source, source_rate, subset.with(i), memo)?;
        }
    }
    let den = from_source + inflow;
    if den == 0.0 {
        return Err(AoiError::Unbounded { subset });
    }
    let v = numerator / den;
    memo.insert(subset, v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_fully_connected, build_line, build_ring};

    /// Three nodes; 0 and 1 sense at rate 1, both push to node 2 at rate 10.
    fn example_network() -> NetworkSpec {
        NetworkSpec::from_parts(3, [(0, 2, 10.0), (1, 2, 10.0)], [(0, 1.0), (1, 1.0)]).unwrap()
    }

    #[test]
    fn example_network_singletons() {
        // Hand trace: v{1,2} = (1 + 10*0)/(1 + 10) = 1/11, v{0,2} = 1/11,
        // v{2} = (1 + 1 + 10/11 + 10/11)/20 = (42/11)/20 = 21/110.
        let res = solve_all_singletons(&example_network()).unwrap();
        assert!((res[0].value - 1.0).abs() < 1e-12);
        assert!((res[1].value - 1.0).abs() < 1e-12);
        assert!((res[2].value - 21.0 / 110.0).abs() < 1e-12);
        assert!(res.iter().all(|r| r.method == Method::Exact));
    }

    #[test]
    fn single_subset_matches_table() {
        let spec = example_network();
        let v = solve_subset(&spec, NodeSubset::singleton(2)).unwrap().value;
        assert!((v - 21.0 / 110.0).abs() < 1e-12);
        assert_eq!(solve_subset(&spec, NodeSubset::full(3)).unwrap().value, 0.0);
    }

    #[test]
    fn ring_three_singleton() {
        let spec = build_ring(3, 1.0, 1.0).unwrap();
        let v = solve_subset(&spec, NodeSubset::singleton(0)).unwrap().value;
        assert!((v - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn two_node_fully_connected() {
        let res = solve_all_singletons(&build_fully_connected(2, 0.7, 0.7).unwrap()).unwrap();
        assert!((res[0].value - 0.5).abs() < 1e-12);
        assert!((res[1].value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_view_star() {
        let spec = NetworkSpec::from_parts(4, [(0, 1, 1.0), (0, 2, 2.0), (0, 3, 3.0)], [(0, 1.0)]).unwrap();
        let res = solve_all_singletons(&spec).unwrap();
        assert_eq!(res[0].value, 0.0);
        // each leaf hears only from the hub: v = r00 / r0j
        assert!((res[1].value - 1.0).abs() < 1e-12);
        assert!((res[3].value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_error() {
        let spec = build_ring(30, 1.0, 1.0).unwrap();
        match solve_subset(&spec, NodeSubset::singleton(0)) {
            Err(AoiError::Capacity { limit, .. }) => assert_eq!(limit, DEFAULT_SUBSET_LIMIT),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_subset_named() {
        // node 2 hears from nobody
        let spec = NetworkSpec::from_parts(3, [(0, 1, 1.0)], [(0, 1.0)]).unwrap();
        let solver = ExactSolver::build(&spec, DEFAULT_SUBSET_LIMIT).unwrap();
        assert!(solver.value(NodeSubset::singleton(1)).is_ok());
        assert_eq!(
            solver.value(NodeSubset::singleton(2)),
            Err(AoiError::Unbounded {
                subset: NodeSubset::singleton(2)
            })
        );
        // {1,2} is fine: node 1 still hears from 0
        assert!(solver.value(NodeSubset::from_members([1, 2])).is_ok());
    }

    #[test]
    fn unbounded_cause_propagates() {
        // 2 hears only from 1, 1 hears from nobody
        let spec = NetworkSpec::from_parts(3, [(1, 2, 1.0)], [(0, 1.0)]).unwrap();
        let err = solve_subset(&spec, NodeSubset::singleton(2)).unwrap_err();
        assert_eq!(
            err,
            AoiError::Unbounded {
                subset: NodeSubset::from_members([1, 2])
            }
        );
    }

    #[test]
    fn novai_values() {
        let spec = build_ring(3, 1.0, 1.0).unwrap();
        let r = AoiResult::exact(NodeSubset::singleton(0), 5.0 / 6.0);
        assert!((novai(&spec, &r).unwrap() - 5.0 / 18.0).abs() < 1e-15);
        let zero = AoiResult::exact(NodeSubset::singleton(0), 0.0);
        assert_eq!(novai(&spec, &zero).unwrap(), 0.0);

        let ex = example_network();
        let v2 = solve_subset(&ex, NodeSubset::singleton(2)).unwrap();
        assert!((novai(&ex, &v2).unwrap() - 21.0 / 220.0).abs() < 1e-12);

        let silent = NetworkSpec::from_parts(2, [(0, 1, 1.0)], []).unwrap();
        assert!(matches!(novai(&silent, &zero), Err(AoiError::InvalidSpec(_))));
    }

    #[test]
    fn reduction_check() {
        let mut ring = build_ring(4, 1.0, 0.5).unwrap();
        for i in 1..4 {
            ring.set_sensing(i, 0.0).unwrap();
        }
        // remove the zeroed sensing entries: membership in I is by key
        let ring = NetworkSpec::from_parts(
            4,
            ring.gossip_rates().iter().map(|(&(i, j), &r)| (i, j, r)),
            [(0, 1.0)],
        )
        .unwrap();
        for i in 0..4 {
            assert!(single_view_reduction_check(&ring, NodeSubset::singleton(i)).unwrap());
        }
        let line = build_line(3, &[0], 1.0, 1.0).unwrap();
        assert!(single_view_reduction_check(&line, NodeSubset::singleton(2)).unwrap());

        let two = build_line(3, &[0, 2], 1.0, 1.0).unwrap();
        assert!(matches!(
            single_view_reduction_check(&two, NodeSubset::singleton(1)),
            Err(AoiError::Precondition(_))
        ));
    }

    #[test]
    fn empty_subset_rejected() {
        assert!(solve_subset(&example_network(), NodeSubset::EMPTY).is_err());
    }
}
