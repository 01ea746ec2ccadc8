//! Discrete-event Monte Carlo of version gossip.
//!
//! All sensing and gossip processes are independent Poisson processes, so
//! their superposition is one Poisson process of the total rate, and each
//! event is attributed to a process with probability proportional to its
//! rate. A sensing event at `i` creates a new network version and hands it to
//! `i`; a gossip event `i -> j` sets `V_j = max(V_j, V_i)`.
//!
//! The age of a subset is `X_S = V_N - max_{i in S} V_i`. Estimates are
//! time averages of `X_S` over `[burn_in * horizon, horizon]`, averaged over
//! independent replications.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::model::{NetworkSpec, NodeSubset, MAX_SUBSET_NODES};

/// Generator used for every replication; replication `r` is seeded with
/// `seed ^ r`.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9); replication r seeded with seed XOR r";

/// Event cap for [`sample_path`].
pub const MAX_TRACE_EVENTS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub horizon: f64,
    /// Fraction of the horizon discarded before averaging.
    pub burn_in: f64,
    pub seed: u64,
    pub replications: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 1e4,
            burn_in: 0.2,
            seed: 0,
            replications: 8,
        }
    }
}

impl SimConfig {
    fn check(&self, allow_zero_horizon: bool) -> Result<()> {
        let horizon_ok = self.horizon.is_finite()
            && (self.horizon > 0.0 || (allow_zero_horizon && self.horizon == 0.0));
        if !horizon_ok {
            return Err(AoiError::Precondition(format!("horizon {} must be positive", self.horizon)));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(AoiError::Precondition(format!("burn-in {} must be in [0, 1)", self.burn_in)));
        }
        if self.replications == 0 {
            return Err(AoiError::Precondition("need at least one replication".into()));
        }
        Ok(())
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        self.seed ^ replication as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Sense(usize),
    Gossip { from: usize, to: usize },
}

/// Versions held by every node plus the newest version in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub clock: f64,
    pub global_version: u64,
    pub node_versions: Vec<u64>,
}

impl SimState {
    /// All nodes start fresh at version 0.
    pub fn new(n: usize) -> Self {
        SimState {
            clock: 0.0,
            global_version: 0,
            node_versions: vec![0; n],
        }
    }

    pub fn apply(&mut self, event: Event) {
        match event {
            Event::Sense(i) => {
                self.global_version += 1;
                self.node_versions[i] = self.global_version;
            }
            Event::Gossip { from, to } => {
                let incoming = self.node_versions[from];
                let held = &mut self.node_versions[to];
                *held = (*held).max(incoming);
            }
        }
    }

    pub fn node_age(&self, i: usize) -> u64 {
        self.global_version - self.node_versions[i]
    }

    /// `V_N - max_{i in S} V_i`.
    pub fn age(&self, subset: NodeSubset) -> u64 {
        let best = subset
            .members()
            .map(|i| self.node_versions[i])
            .max()
            .expect("age of an empty subset");
        self.global_version - best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub subset: NodeSubset,
    pub mean: f64,
    pub stderr: f64,
    /// Set when the late-horizon mean clearly exceeds the early one, which
    /// indicates an age that grows without bound.
    pub nonstationary: bool,
    pub replications: usize,
}

struct EventTable {
    n: usize,
    events: Vec<Event>,
    sampler: WeightedAliasIndex<f64>,
    clock: Exp<f64>,
}

impl EventTable {
    fn new(spec: &NetworkSpec) -> Result<Self> {
        spec.ensure_valid()?;
        if spec.n() > MAX_SUBSET_NODES {
            return Err(AoiError::Capacity {
                what: format!("simulator tracks subsets of at most {MAX_SUBSET_NODES} nodes"),
                limit: MAX_SUBSET_NODES,
            });
        }
        let mut events = Vec::new();
        let mut weights = Vec::new();
        for (&i, &r) in spec.sensing_rates() {
            events.push(Event::Sense(i));
            weights.push(r);
        }
        for (&(from, to), &r) in spec.gossip_rates() {
            if r > 0.0 {
                events.push(Event::Gossip { from, to });
                weights.push(r);
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(AoiError::InvalidSpec("total event rate is zero".into()));
        }
        let sampler = WeightedAliasIndex::new(weights)
            .map_err(|e| AoiError::InvalidSpec(format!("event weights: {e}")))?;
        let clock = Exp::new(total).map_err(|e| AoiError::InvalidRate(format!("total rate: {e}")))?;
        Ok(EventTable {
            n: spec.n(),
            events,
            sampler,
            clock,
        })
    }
}

/// Per-replication integrals of each subset's age.
struct Integrals {
    /// Over the averaging window.
    window: Vec<f64>,
    /// Over the second and fourth quarter of the horizon.
    second_quarter: Vec<f64>,
    fourth_quarter: Vec<f64>,
}

/// Runs one replication. `on_change` sees `(time, ages)` whenever any
/// tracked age changes; returning an error aborts the run.
fn run_replication<R: Rng>(
    table: &EventTable,
    subsets: &[NodeSubset],
    config: &SimConfig,
    rng: &mut R,
    mut on_change: impl FnMut(f64, &[u64]) -> Result<()>,
) -> Result<Integrals> {
    let horizon = config.horizon;
    let members: Vec<Vec<usize>> = subsets.iter().map(|s| s.members().collect()).collect();
    let m = subsets.len();

    // Snapshot times of the running integral, ascending.
    let cuts = [
        config.burn_in * horizon,
        0.25 * horizon,
        0.5 * horizon,
        0.75 * horizon,
        horizon,
    ];
    let mut order: Vec<usize> = (0..cuts.len()).collect();
    order.sort_by(|&a, &b| cuts[a].total_cmp(&cuts[b]));
    let mut snapshots = vec![vec![0.0; m]; cuts.len()];
    let mut next_cut = 0;

    let mut state = SimState::new(table.n);
    let mut ages = vec![0u64; m];
    let mut integral = vec![0.0; m];
    let mut t = 0.0;
    loop {
        let t_next = t + table.clock.sample(rng);
        let seg_end = t_next.min(horizon);
        while next_cut < order.len() && cuts[order[next_cut]] <= seg_end {
            let c = cuts[order[next_cut]];
            let snap = &mut snapshots[order[next_cut]];
            for s in 0..m {
                snap[s] = integral[s] + ages[s] as f64 * (c - t);
            }
            next_cut += 1;
        }
        if t_next >= horizon {
            break;
        }
        for s in 0..m {
            integral[s] += ages[s] as f64 * (t_next - t);
        }
        t = t_next;
        state.clock = t;
        state.apply(table.events[table.sampler.sample(rng)]);

        let mut changed = false;
        for (s, nodes) in members.iter().enumerate() {
            let best = nodes.iter().map(|&i| state.node_versions[i]).max().unwrap_or(0);
            let age = state.global_version - best;
            changed |= age != ages[s];
            ages[s] = age;
        }
        if changed {
            on_change(t, &ages)?;
        }
    }

    let [burn, q1, q2, q3, end] = [0, 1, 2, 3, 4].map(|k| &snapshots[k]);
    let diff = |a: &Vec<f64>, b: &Vec<f64>| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    Ok(Integrals {
        window: diff(end, burn),
        second_quarter: diff(q2, q1),
        fourth_quarter: diff(end, q3),
    })
}

fn check_subsets(n: usize, subsets: &[NodeSubset]) -> Result<()> {
    for s in subsets {
        if s.is_empty() {
            return Err(AoiError::Precondition("subsets must be non-empty".into()));
        }
        if s.span() > n {
            return Err(AoiError::Precondition(format!("subset {s} exceeds n = {n}")));
        }
    }
    Ok(())
}

/// Time-averaged age estimates for each subset.
///
/// Replications run in parallel but are combined in replication order, so
/// identical inputs always give bit-identical output.
pub fn simulate(spec: &NetworkSpec, subsets: &[NodeSubset], config: &SimConfig) -> Result<Vec<SimEstimate>> {
    config.check(false)?;
    let table = EventTable::new(spec)?;
    check_subsets(spec.n(), subsets)?;

    let runs: Vec<Integrals> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.replication_seed(r));
            run_replication(&table, subsets, config, &mut rng, |_, _| Ok(()))
        })
        .collect::<Result<_>>()?;

    let window = config.horizon * (1.0 - config.burn_in);
    let quarter = config.horizon / 4.0;
    let reps = config.replications as f64;
    Ok(subsets
        .iter()
        .enumerate()
        .map(|(s, &subset)| {
            let means: Vec<f64> = runs.iter().map(|run| run.window[s] / window).collect();
            let mean = means.iter().sum::<f64>() / reps;
            let stderr = if config.replications > 1 {
                let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1.0);
                (var / reps).sqrt()
            } else {
                0.0
            };
            let early = runs.iter().map(|run| run.second_quarter[s]).sum::<f64>() / (reps * quarter);
            let late = runs.iter().map(|run| run.fourth_quarter[s]).sum::<f64>() / (reps * quarter);
            SimEstimate {
                subset,
                mean,
                stderr,
                nonstationary: late > 1.2 * early && late > 0.0,
                replications: config.replications,
            }
        })
        .collect())
}

/// Piecewise-constant trajectory of `X_S` for the first replication:
/// `(time, value)` breakpoints starting with `(0, 0)`.
pub fn sample_path(spec: &NetworkSpec, config: &SimConfig, subset: NodeSubset) -> Result<Vec<(f64, u64)>> {
    config.check(true)?;
    let table = EventTable::new(spec)?;
    check_subsets(spec.n(), &[subset])?;
    let mut trace = vec![(0.0, 0)];
    if config.horizon == 0.0 {
        return Ok(trace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.replication_seed(0));
    let mut events = 0u64;
    run_replication(&table, &[subset], config, &mut rng, |t, ages| {
        events += 1;
        if events > MAX_TRACE_EVENTS {
            return Err(AoiError::Capacity {
                what: "sample path exceeds the trace event limit; shorten the horizon".into(),
                limit: MAX_TRACE_EVENTS as usize,
            });
        }
        trace.push((t, ages[0]));
        Ok(())
    })?;
    Ok(trace)
}

/// Integral of a piecewise-constant trace over `[from, to]`.
pub fn integrate_trace(trace: &[(f64, u64)], from: f64, to: f64) -> f64 {
    let mut total = 0.0;
    for (k, &(start, value)) in trace.iter().enumerate() {
        let end = trace.get(k + 1).map_or(to, |&(t, _)| t);
        let lo = start.max(from);
        let hi = end.min(to);
        if hi > lo {
            total += value as f64 * (hi - lo);
        }
    }
    total
}
