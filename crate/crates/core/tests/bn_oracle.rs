//! Cross-checks of the elimination engine against brute-force oracles.

use std::collections::BTreeSet;

use ctlab_core::bn::random::{random_evidence, random_network};
use ctlab_core::bn::{
    entropy, joint_enumeration, most_informative_features, posterior_marginal, BayesianNetwork, BnError,
    EvidenceSet, NetworkSpec, NodeSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Full joint table computed straight from the node specs, in file order,
/// last node fastest. Independent of the library's lookup helpers.
fn full_joint(net: &BayesianNetwork) -> (Vec<usize>, Vec<f64>) {
    let nodes = &net.spec().nodes;
    let cards: Vec<usize> = nodes.iter().map(|n| n.states.len()).collect();
    let size: usize = cards.iter().product();
    let mut joint = Vec::with_capacity(size);
    for flat in 0..size {
        let mut rest = flat;
        let mut states = vec![0; nodes.len()];
        for i in (0..nodes.len()).rev() {
            states[i] = rest % cards[i];
            rest /= cards[i];
        }
        let mut p = 1.0;
        for (i, node) in nodes.iter().enumerate() {
            let mut row = 0;
            for parent in &node.parents {
                let j = nodes.iter().position(|n| &n.id == parent).unwrap();
                row = row * cards[j] + states[j];
            }
            p *= node.cpt[row][states[i]];
        }
        joint.push(p);
    }
    (cards, joint)
}

fn states_of(flat: usize, cards: &[usize]) -> Vec<usize> {
    let mut rest = flat;
    let mut states = vec![0; cards.len()];
    for i in (0..cards.len()).rev() {
        states[i] = rest % cards[i];
        rest /= cards[i];
    }
    states
}

/// I(T;F | evidence) in bits from the enumerated joint.
fn brute_force_mutual_information(net: &BayesianNetwork, ev: &EvidenceSet, target: &str, feature: &str) -> f64 {
    let (cards, joint) = full_joint(net);
    let t = net.index_of(target).unwrap();
    let f = net.index_of(feature).unwrap();
    let observed: Vec<(usize, usize)> = ev
        .observations
        .iter()
        .map(|(n, s)| {
            let i = net.index_of(n).unwrap();
            (i, net.state_index(i, s).unwrap())
        })
        .collect();
    let mut pair = vec![vec![0.0; cards[f]]; cards[t]];
    for (flat, p) in joint.iter().enumerate() {
        let states = states_of(flat, &cards);
        if observed.iter().all(|&(i, s)| states[i] == s) {
            pair[states[t]][states[f]] += p;
        }
    }
    let total: f64 = pair.iter().flatten().sum();
    let pt: Vec<f64> = pair.iter().map(|r| r.iter().sum::<f64>() / total).collect();
    let pf: Vec<f64> = (0..cards[f]).map(|j| pair.iter().map(|r| r[j]).sum::<f64>() / total).collect();
    let mut mi = 0.0;
    for i in 0..cards[t] {
        for j in 0..cards[f] {
            let p = pair[i][j] / total;
            if p > 0.0 {
                mi += p * (p / (pt[i] * pf[j])).log2();
            }
        }
    }
    mi
}

#[test]
fn chain_posterior_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let mut net = random_network(&mut rng, 3, 0, 2).spec().clone();
        // Force the chain n00 → n01 → n02.
        for (i, node) in net.nodes.iter_mut().enumerate().skip(1) {
            node.parents = vec![format!("n{:02}", i - 1)];
            node.cpt = vec![node.cpt[0].clone(), node.cpt[0].iter().rev().copied().collect()];
        }
        let net = BayesianNetwork::new(net).unwrap();
        for state in ["s0", "s1"] {
            let ev = EvidenceSet::new().with("n02", state);
            let ve = posterior_marginal(&net, &ev, "n00").unwrap();
            let oracle = joint_enumeration(&net, &ev, "n00").unwrap();
            for (a, b) in ve.probabilities.iter().zip(&oracle.probabilities) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn eight_node_network_cross_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = random_network(&mut rng, 8, 3, 2);
    for k in 0..=4 {
        let ev = random_evidence(&mut rng, &net, k);
        for id in net.ids() {
            let ve = posterior_marginal(&net, &ev, id).unwrap();
            let oracle = joint_enumeration(&net, &ev, id).unwrap();
            for (a, b) in ve.probabilities.iter().zip(&oracle.probabilities) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn six_node_gains_equal_brute_force_mutual_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for round in 0..10 {
        let net = random_network(&mut rng, 6, 3, if round % 2 == 0 { 2 } else { 3 });
        let ev = random_evidence(&mut rng, &net, round % 3);
        let target = net
            .ids()
            .find(|id| !ev.contains(id))
            .unwrap()
            .to_string();
        let candidates: BTreeSet<String> =
            net.ids().filter(|id| *id != target && !ev.contains(id)).map(String::from).collect();
        let ranking = most_informative_features(&net, &ev, &target, &candidates).unwrap();
        let h = entropy(&posterior_marginal(&net, &ev, &target).unwrap());
        for fg in &ranking.features {
            let oracle = brute_force_mutual_information(&net, &ev, &target, &fg.node).max(0.0);
            assert!((fg.gain - oracle).abs() < 1e-9, "{}: {} vs {}", fg.node, fg.gain, oracle);
            assert!(fg.gain <= h + 1e-9);
        }
        for w in ranking.features.windows(2) {
            assert!(w[0].gain > w[1].gain || (w[0].gain == w[1].gain && w[0].node < w[1].node));
        }
    }
}

#[test]
fn independent_coins_are_unaffected() {
    let net = BayesianNetwork::new(NetworkSpec {
        nodes: vec![
            NodeSpec::new("A", &["h", "t"], &[], vec![vec![0.3, 0.7]]),
            NodeSpec::new("B", &["h", "t"], &[], vec![vec![0.6, 0.4]]),
        ],
    })
    .unwrap();
    let d = posterior_marginal(&net, &EvidenceSet::new().with("A", "t"), "B").unwrap();
    assert!((d.probabilities[0] - 0.6).abs() < 1e-15);
}

#[test]
fn impossible_evidence_agrees_across_engines() {
    let net = BayesianNetwork::new(NetworkSpec {
        nodes: vec![
            NodeSpec::new("A", &["t", "f"], &[], vec![vec![0.5, 0.5]]),
            NodeSpec::new("B", &["t", "f"], &["A"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            NodeSpec::new("C", &["t", "f"], &["A"], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        ],
    })
    .unwrap();
    let ev = EvidenceSet::new().with("B", "t").with("C", "f");
    assert!(matches!(posterior_marginal(&net, &ev, "A"), Err(BnError::ImpossibleEvidence)));
    assert!(matches!(joint_enumeration(&net, &ev, "A"), Err(BnError::ImpossibleEvidence)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elimination_equals_enumeration(seed in any::<u64>(), n in 1usize..=12, k in 0usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, n, 3, 2);
        let ev = random_evidence(&mut rng, &net, k);
        for id in net.ids() {
            let ve = posterior_marginal(&net, &ev, id).unwrap();
            let oracle = joint_enumeration(&net, &ev, id).unwrap();
            prop_assert!((ve.sum() - 1.0).abs() < 1e-9);
            prop_assert!(ve.probabilities.iter().all(|p| *p >= 0.0));
            for (a, b) in ve.probabilities.iter().zip(&oracle.probabilities) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bayes_rule_on_two_node_networks(pa in 0.01f64..0.99, pb_a in 0.01f64..0.99, pb_na in 0.01f64..0.99) {
        let net = BayesianNetwork::new(NetworkSpec {
            nodes: vec![
                NodeSpec::new("A", &["t", "f"], &[], vec![vec![pa, 1.0 - pa]]),
                NodeSpec::new("B", &["t", "f"], &["A"], vec![vec![pb_a, 1.0 - pb_a], vec![pb_na, 1.0 - pb_na]]),
            ],
        }).unwrap();
        for (b, lik_t, lik_f) in [("t", pb_a, pb_na), ("f", 1.0 - pb_a, 1.0 - pb_na)] {
            let d = posterior_marginal(&net, &EvidenceSet::new().with("B", b), "A").unwrap();
            let marginal = lik_t * pa + lik_f * (1.0 - pa);
            prop_assert!((d.probabilities[0] - lik_t * pa / marginal).abs() < 1e-12);
        }
    }

    #[test]
    fn results_are_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 9, 3, 2);
        let ev = random_evidence(&mut rng, &net, 3);
        let target = net.ids().find(|id| !ev.contains(id)).unwrap().to_string();
        let a = posterior_marginal(&net, &ev, &target).unwrap();
        let b = posterior_marginal(&net.clone(), &ev.clone(), &target).unwrap();
        prop_assert_eq!(
            a.probabilities.iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            b.probabilities.iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
    }
}
