//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::Rng;
use version_age_lab::experiments::random_spec;
use version_age_lab::model::validate;
use version_age_lab::NetworkSpec;

/// Random spec with exactly one sensing node that reaches every other node.
pub fn random_single_view_spec<R: Rng>(rng: &mut R, nodes: std::ops::RangeInclusive<usize>) -> NetworkSpec {
    loop {
        let base = random_spec(rng, nodes.clone(), 0.1..=10.0, 0.5);
        let sensors: Vec<(usize, f64)> = base.sensing_rates().iter().map(|(&i, &r)| (i, r)).collect();
        let keep = sensors[rng.random_range(0..sensors.len())];
        let edges = base.gossip_rates().iter().map(|(&(i, j), &r)| (i, j, r));
        let spec = NetworkSpec::from_parts(base.n(), edges, [keep]).expect("valid parts");
        if validate(&spec).is_empty() {
            return spec;
        }
    }
}

/// All non-empty subsets of `n` nodes as masks.
pub fn nonempty_masks(n: usize) -> impl Iterator<Item = u64> {
    1..(1u64 << n)
}
