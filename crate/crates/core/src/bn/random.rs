//! Seeded synthetic networks for testing and benchmarking.

use rand::seq::index::sample;
use rand::Rng;

use super::{BayesianNetwork, EvidenceSet, NetworkSpec, NodeSpec};

/// A random valid network with `n` nodes named `n00`, `n01`, ….
///
/// Node `i` draws up to `max_parents` parents from nodes `0..i`, so the
/// graph is acyclic by construction. Every node has `states` states and
/// CPT rows are normalized uniform draws.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, n: usize, max_parents: usize, states: usize) -> BayesianNetwork {
    assert!(n >= 1 && states >= 2);
    let labels: Vec<String> = (0..states).map(|s| format!("s{s}")).collect();
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.random_range(0..=max_parents.min(i));
        let mut parents: Vec<usize> = sample(rng, i.max(1), k).into_vec();
        parents.sort_unstable();
        let rows = states.pow(k as u32);
        let cpt = (0..rows).map(|_| random_row(rng, states)).collect();
        nodes.push(NodeSpec {
            id: format!("n{i:02}"),
            states: labels.clone(),
            parents: parents.iter().map(|p| format!("n{p:02}")).collect(),
            cpt,
            annotations: Default::default(),
        });
    }
    BayesianNetwork::new(NetworkSpec { nodes }).expect("generator produces valid networks")
}

fn random_row<R: Rng + ?Sized>(rng: &mut R, width: usize) -> Vec<f64> {
    // Keep entries away from zero so random evidence is never impossible.
    let raw: Vec<f64> = (0..width).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = row[..width - 1].iter().sum();
    row[width - 1] = 1.0 - head;
    row
}

/// Observes `count` distinct random nodes in random states.
pub fn random_evidence<R: Rng + ?Sized>(rng: &mut R, net: &BayesianNetwork, count: usize) -> EvidenceSet {
    let mut ev = EvidenceSet::new();
    for i in sample(rng, net.len(), count.min(net.len())).into_iter() {
        let node = net.node(i);
        let s = rng.random_range(0..node.states.len());
        ev.insert(&node.id, &node.states[s]);
    }
    ev
}
