use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::inference::joint_table;
use super::{BayesianNetwork, BnError, Distribution, EvidenceSet};

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn entropy(d: &Distribution) -> f64 {
    entropy_of(&d.probabilities)
}

pub fn entropy_of(probabilities: &[f64]) -> f64 {
    let h: f64 = probabilities.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum();
    h.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGain {
    pub node: String,
    /// Expected reduction in target entropy, in bits.
    pub gain: f64,
}

/// Candidates ordered by descending gain, ties by ascending id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureRanking {
    pub features: Vec<FeatureGain>,
}

impl FeatureRanking {
    pub fn top(&self) -> Option<&FeatureGain> {
        self.features.first()
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.features.truncate(k);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }
}

/// Ranks unobserved candidate nodes by the mutual information they share
/// with `target` given the current evidence.
///
/// For each candidate F the gain is `H(T|e) − Σ_f P(F=f|e)·H(T|e,F=f)`,
/// evaluated from the exact joint posterior of (T, F).
pub fn most_informative_features(
    net: &BayesianNetwork,
    evidence: &EvidenceSet,
    target: &str,
    candidates: &BTreeSet<String>,
) -> Result<FeatureRanking, BnError> {
    if candidates.is_empty() {
        return Err(BnError::EmptyCandidateSet);
    }
    let t = net.index_of(target).ok_or_else(|| BnError::InvalidTarget(target.to_string()))?;
    for c in candidates {
        if c == target || evidence.contains(c) || net.index_of(c).is_none() {
            return Err(BnError::InvalidCandidate(c.clone()));
        }
    }

    let prior = joint_table(net, evidence, &[t])?;
    let h_target = entropy_of(&prior);
    let t_card = net.cardinality(t);

    let mut features = Vec::with_capacity(candidates.len());
    for c in candidates {
        let f = net.index_of(c).expect("checked above");
        let f_card = net.cardinality(f);
        // Row-major over (F, T): each row is P(F=f, T | e).
        let joint = joint_table(net, evidence, &[f, t])?;
        let mut expected_h = 0.0;
        for row in joint.chunks(t_card).take(f_card) {
            let p_f: f64 = row.iter().sum();
            if p_f <= 0.0 {
                continue;
            }
            let conditional: Vec<f64> = row.iter().map(|p| p / p_f).collect();
            expected_h += p_f * entropy_of(&conditional);
        }
        let gain = h_target - expected_h;
        features.push(FeatureGain { node: c.clone(), gain: if gain > 0.0 { gain } else { 0.0 } });
    }

    features.sort_by(|a, b| {
        b.gain
            .partial_cmp(&a.gain)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.node.cmp(&b.node))
    });
    Ok(FeatureRanking { features })
}
