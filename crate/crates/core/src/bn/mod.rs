//! Discrete Bayesian networks.
//!
//! Networks are validated once ([`validate_network`], [`BayesianNetwork::new`])
//! and are immutable afterwards; every query is a pure function of the
//! network and an [`EvidenceSet`]. Exact posteriors come from variable
//! elimination ([`posterior_marginal`]); [`joint_enumeration`] sums the full
//! joint and serves as an independent oracle.

mod enumerate;
mod factor;
mod inference;
pub mod io;
mod network;
pub mod random;
mod voi;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enumerate::{joint_enumeration, joint_enumeration_with_cap, DEFAULT_ENUMERATION_CAP};
pub use inference::{posterior_joint, posterior_marginal, IMPOSSIBLE_EVIDENCE_TOLERANCE};
pub use network::{
    validate_network, BayesianNetwork, NetworkSpec, NodeSpec, ValidationReport, Violation,
    ROW_SUM_TOLERANCE,
};
pub use voi::{entropy, entropy_of, most_informative_features, FeatureGain, FeatureRanking};

#[derive(Debug, Error)]
pub enum BnError {
    #[error("invalid network: {0}")]
    InvalidNetwork(ValidationReport),
    #[error("malformed network file: {0}")]
    Format(String),
    #[error("unknown target node {0}")]
    InvalidTarget(String),
    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),
    #[error("evidence has zero probability")]
    ImpossibleEvidence,
    #[error("joint state space of {size} entries exceeds cap {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error("no candidate features to rank")]
    EmptyCandidateSet,
    #[error("invalid candidate {0}: must be unobserved and differ from the target")]
    InvalidCandidate(String),
}

/// Observed states keyed by node id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvidenceSet {
    pub observations: BTreeMap<String, String>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: &str, state: &str) -> Self {
        self.observations.insert(node.to_string(), state.to_string());
        self
    }

    pub fn insert(&mut self, node: &str, state: &str) {
        self.observations.insert(node.to_string(), state.to_string());
    }

    pub fn contains(&self, node: &str) -> bool {
        self.observations.contains_key(node)
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.observations.get(node).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Resolves ids and labels to `(node index, state index)` pairs.
    pub fn resolve(&self, net: &BayesianNetwork) -> Result<Vec<(usize, usize)>, BnError> {
        self.observations
            .iter()
            .map(|(node, state)| {
                let i = net
                    .index_of(node)
                    .ok_or_else(|| BnError::InvalidEvidence(format!("unknown node {node}")))?;
                let s = net
                    .state_index(i, state)
                    .ok_or_else(|| BnError::InvalidEvidence(format!("node {node} has no state {state}")))?;
                Ok((i, s))
            })
            .collect()
    }
}

/// Posterior (or prior) probabilities over one node's states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub node: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states.iter().position(|s| s == state).map(|i| self.probabilities[i])
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}
