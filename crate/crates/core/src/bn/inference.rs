use std::collections::BTreeSet;

use super::factor::Factor;
use super::{BayesianNetwork, BnError, Distribution, EvidenceSet};

/// Evidence whose probability falls at or below this is treated as impossible.
pub const IMPOSSIBLE_EVIDENCE_TOLERANCE: f64 = 1e-12;

/// Exact `P(target | evidence)` by variable elimination.
///
/// Nodes that are neither ancestors of the target nor of the evidence are
/// pruned first; the rest are eliminated greedily by fewest fill-in edges,
/// ties going to the smaller node id.
pub fn posterior_marginal(
    net: &BayesianNetwork,
    evidence: &EvidenceSet,
    target: &str,
) -> Result<Distribution, BnError> {
    let t = net.index_of(target).ok_or_else(|| BnError::InvalidTarget(target.to_string()))?;
    let probabilities = joint_table(net, evidence, &[t])?;
    let node = net.node(t);
    Ok(Distribution { node: node.id.clone(), states: node.states.clone(), probabilities })
}

/// Exact joint posterior over several nodes, row-major in the order given
/// (last node varies fastest).
pub fn posterior_joint(
    net: &BayesianNetwork,
    evidence: &EvidenceSet,
    targets: &[&str],
) -> Result<Vec<f64>, BnError> {
    let idx = targets
        .iter()
        .map(|t| net.index_of(t).ok_or_else(|| BnError::InvalidTarget(t.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    if let Some(dup) = idx.iter().find(|i| !seen.insert(**i)) {
        return Err(BnError::InvalidTarget(format!("{} requested twice", net.node(*dup).id)));
    }
    joint_table(net, evidence, &idx)
}

pub(crate) fn joint_table(
    net: &BayesianNetwork,
    evidence: &EvidenceSet,
    targets: &[usize],
) -> Result<Vec<f64>, BnError> {
    let observed = evidence.resolve(net)?;
    let relevant = ancestral_closure(net, targets.iter().copied().chain(observed.iter().map(|o| o.0)));

    let mut factors: Vec<Factor> = relevant.iter().map(|&i| cpt_factor(net, i)).collect();
    for &(var, state) in &observed {
        if targets.contains(&var) {
            // Keep the variable in scope; zero the other states.
            let card = net.cardinality(var);
            let values = (0..card).map(|s| if s == state { 1.0 } else { 0.0 }).collect();
            factors.push(Factor::new(vec![var], vec![card], values));
        } else {
            for f in factors.iter_mut() {
                if f.contains(var) {
                    *f = f.reduce(var, state);
                }
            }
        }
    }

    let observed_vars: BTreeSet<usize> = observed.iter().map(|o| o.0).collect();
    let to_eliminate: Vec<usize> = relevant
        .iter()
        .copied()
        .filter(|v| !targets.contains(v) && !observed_vars.contains(v))
        .collect();

    for var in elimination_order(net, &factors, &to_eliminate) {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        let mut product = Factor::scalar(1.0);
        for f in &touching {
            product = product.product(f);
        }
        factors.push(product.sum_out(var));
    }

    let mut result = Factor::scalar(1.0);
    for f in &factors {
        result = result.product(f);
    }
    let result = result.permuted(targets);
    let total = result.total();
    if total <= IMPOSSIBLE_EVIDENCE_TOLERANCE || !total.is_finite() {
        return Err(BnError::ImpossibleEvidence);
    }
    Ok(result.values.iter().map(|v| v / total).collect())
}

fn cpt_factor(net: &BayesianNetwork, i: usize) -> Factor {
    let mut vars: Vec<usize> = net.parents_of(i).to_vec();
    vars.push(i);
    let cards = vars.iter().map(|&v| net.cardinality(v)).collect();
    let values = net.node(i).cpt.iter().flatten().copied().collect();
    Factor::new(vars, cards, values)
}

/// The given nodes plus all of their ancestors, ascending by index.
fn ancestral_closure(net: &BayesianNetwork, seeds: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<usize> = seeds.collect();
    while let Some(v) = stack.pop() {
        if !keep[v] {
            keep[v] = true;
            stack.extend_from_slice(net.parents_of(v));
        }
    }
    (0..net.len()).filter(|&v| keep[v]).collect()
}

/// Greedy min-fill order over the interaction graph of `factors`.
fn elimination_order(net: &BayesianNetwork, factors: &[Factor], vars: &[usize]) -> Vec<usize> {
    let n = net.len();
    let mut adjacent = vec![BTreeSet::new(); n];
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adjacent[a].insert(b);
                }
            }
        }
    }

    let mut remaining: BTreeSet<usize> = vars.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let best = remaining
            .iter()
            .copied()
            .min_by(|&a, &b| {
                fill_in(&adjacent, a)
                    .cmp(&fill_in(&adjacent, b))
                    .then_with(|| net.node(a).id.cmp(&net.node(b).id))
            })
            .expect("non-empty");
        let neighbours: Vec<usize> = adjacent[best].iter().copied().collect();
        for &a in &neighbours {
            adjacent[a].remove(&best);
            for &b in &neighbours {
                if a != b {
                    adjacent[a].insert(b);
                }
            }
        }
        adjacent[best].clear();
        remaining.remove(&best);
        order.push(best);
    }
    order
}

fn fill_in(adjacent: &[BTreeSet<usize>], v: usize) -> usize {
    let neighbours: Vec<usize> = adjacent[v].iter().copied().collect();
    let mut missing = 0;
    for (i, &a) in neighbours.iter().enumerate() {
        for &b in &neighbours[i + 1..] {
            if !adjacent[a].contains(&b) {
                missing += 1;
            }
        }
    }
    missing
}
