//! COVID-19 diagnostic network: roster checks, structural assumptions,
//! alerting and next-question guidance.
//!
//! The model is ordinary network data (see [`crate::bn::io`]) where each
//! node also carries a `roster_role` and a `provenance` annotation. The
//! default model ships in `crates/core/data/covid_model.json`.

mod assess;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bn::{BayesianNetwork, BnError, EvidenceSet};

pub use assess::{
    assess, backward_inference_check, AlertPolicy, AssessError, BackgroundShift, CaseInput, Improving,
    RiskReport, DEFAULT_TOP_QUESTIONS,
};

pub const DEFAULT_MODEL_JSON: &str = include_str!("../../data/covid_model.json");

pub const TARGET: &str = "covid_status";
pub const CONTACT: &str = "recent_contact";
pub const TEST: &str = "test_result";
pub const SYMPTOMS: [&str; 6] = ["fever", "cough", "fatigue", "dyspnoea", "myalgia", "headache"];
pub const MEASUREMENTS: [&str; 2] = ["body_temperature", "oxygen_saturation"];
pub const BACKGROUND: [&str; 3] = ["sex", "age_group", "obesity"];
pub const CONFOUNDER: &str = "other_condition";

/// Required nodes and their exact state lists.
const REQUIRED: [(&str, &[&str]); 15] = [
    (TARGET, &["none", "mild", "severe"]),
    (CONTACT, &["no", "yes"]),
    (TEST, &["not_tested", "negative", "positive"]),
    ("fever", &["absent", "present"]),
    ("cough", &["absent", "present"]),
    ("fatigue", &["absent", "present"]),
    ("dyspnoea", &["absent", "present"]),
    ("myalgia", &["absent", "present"]),
    ("headache", &["absent", "present"]),
    ("body_temperature", &["lt37_5", "37_5to38_5", "gt38_5"]),
    ("oxygen_saturation", &["ge95", "92to94", "lt92"]),
    ("sex", &["male", "female"]),
    ("age_group", &["under65", "over65"]),
    ("obesity", &["no", "yes"]),
    (CONFOUNDER, &["none", "copd", "flu"]),
];

const ASSUMPTION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RosterRole {
    Target,
    Contact,
    Test,
    Symptom,
    Measurement,
    Background,
    Confounder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Huang2020,
    Estimated,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Network(#[from] BnError),
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing required node {0}")]
    MissingRequiredNode(String),
    #[error("node {node} must have states {expected:?}, found {actual:?}")]
    WrongStates { node: String, expected: Vec<String>, actual: Vec<String> },
    #[error("node {node}: {detail}")]
    BadAnnotation { node: String, detail: String },
    #[error("assumption violated ({assumption}): {detail}")]
    AssumptionViolated { assumption: Assumption, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assumption {
    NoContactNoCovid,
    PerfectTest,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::NoContactNoCovid => write!(f, "no contact"),
            Assumption::PerfectTest => write!(f, "perfect test"),
        }
    }
}

/// A validated diagnostic model. Immutable once loaded.
#[derive(Clone, Debug)]
pub struct CovidModel {
    net: BayesianNetwork,
    roles: BTreeMap<String, RosterRole>,
    provenance: BTreeMap<String, Provenance>,
}

impl CovidModel {
    pub fn default_model() -> Self {
        Self::from_json(DEFAULT_MODEL_JSON).expect("shipped model is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_network(BayesianNetwork::from_json(text)?)
    }

    pub fn from_network(net: BayesianNetwork) -> Result<Self, ModelError> {
        for (id, states) in REQUIRED {
            let node = net.node_by_id(id).ok_or_else(|| ModelError::MissingRequiredNode(id.to_string()))?;
            if node.states.iter().map(String::as_str).ne(states.iter().copied()) {
                return Err(ModelError::WrongStates {
                    node: id.to_string(),
                    expected: states.iter().map(|s| s.to_string()).collect(),
                    actual: node.states.clone(),
                });
            }
        }

        let mut roles = BTreeMap::new();
        let mut provenance = BTreeMap::new();
        for node in &net.spec().nodes {
            let role = annotation::<RosterRole>(&node.id, &node.annotations, "roster_role")?;
            let prov = annotation::<Provenance>(&node.id, &node.annotations, "provenance")?;
            roles.insert(node.id.clone(), role);
            provenance.insert(node.id.clone(), prov);
        }

        check_no_contact(&net)?;
        check_perfect_test(&net)?;
        Ok(CovidModel { net, roles, provenance })
    }

    pub fn network(&self) -> &BayesianNetwork {
        &self.net
    }

    pub fn role(&self, node: &str) -> Option<RosterRole> {
        self.roles.get(node).copied()
    }

    pub fn provenance(&self, node: &str) -> Option<Provenance> {
        self.provenance.get(node).copied()
    }

    pub fn nodes_with_role(&self, role: RosterRole) -> Vec<&str> {
        self.roles.iter().filter(|(_, r)| **r == role).map(|(id, _)| id.as_str()).collect()
    }

    /// The state of a symptom or measurement node that points towards
    /// disease: `present` for symptoms, the last (most abnormal) band for
    /// measurements.
    pub fn indicating_state(&self, node: &str) -> Option<&str> {
        let spec = self.net.node_by_id(node)?;
        match self.role(node)? {
            RosterRole::Symptom => spec.states.iter().find(|s| *s == "present").map(String::as_str),
            RosterRole::Measurement => spec.states.last().map(String::as_str),
            _ => None,
        }
    }

    /// Every symptom and measurement at its indicating state, plus
    /// `recent_contact = yes`.
    pub fn all_symptoms_evidence(&self) -> EvidenceSet {
        let mut ev = EvidenceSet::new().with(CONTACT, "yes");
        for role in [RosterRole::Symptom, RosterRole::Measurement] {
            for node in self.nodes_with_role(role) {
                if let Some(state) = self.indicating_state(node) {
                    ev.insert(node, state);
                }
            }
        }
        ev
    }
}

fn annotation<T: serde::de::DeserializeOwned>(
    node: &str,
    annotations: &BTreeMap<String, serde_json::Value>,
    key: &str,
) -> Result<T, ModelError> {
    let value = annotations.get(key).ok_or_else(|| ModelError::BadAnnotation {
        node: node.to_string(),
        detail: format!("missing {key}"),
    })?;
    serde_json::from_value(value.clone()).map_err(|e| ModelError::BadAnnotation {
        node: node.to_string(),
        detail: format!("bad {key}: {e}"),
    })
}

/// Row-major decode of a CPT row index into parent state indices.
fn parent_states(net: &BayesianNetwork, node: usize, mut row: usize) -> Vec<usize> {
    let parents = net.parents_of(node);
    let mut states = vec![0; parents.len()];
    for (k, &p) in parents.iter().enumerate().rev() {
        states[k] = row % net.cardinality(p);
        row /= net.cardinality(p);
    }
    states
}

fn describe_row(net: &BayesianNetwork, node: usize, row: usize) -> String {
    let states = parent_states(net, node, row);
    let parts: Vec<String> = net
        .parents_of(node)
        .iter()
        .zip(&states)
        .map(|(&p, &s)| format!("{}={}", net.node(p).id, net.node(p).states[s]))
        .collect();
    format!("{} row {} ({})", net.node(node).id, row, parts.join(", "))
}

fn check_no_contact(net: &BayesianNetwork) -> Result<(), ModelError> {
    let target = net.index_of(TARGET).expect("roster checked");
    let contact = net.index_of(CONTACT).expect("roster checked");
    let Some(pos) = net.parents_of(target).iter().position(|&p| p == contact) else {
        return Err(ModelError::AssumptionViolated {
            assumption: Assumption::NoContactNoCovid,
            detail: format!("{CONTACT} is not a parent of {TARGET}"),
        });
    };
    let none = net.state_index(target, "none").expect("roster checked");
    let no = net.state_index(contact, "no").expect("roster checked");
    for (r, row) in net.node(target).cpt.iter().enumerate() {
        if parent_states(net, target, r)[pos] == no && (row[none] - 1.0).abs() > ASSUMPTION_TOLERANCE {
            return Err(ModelError::AssumptionViolated {
                assumption: Assumption::NoContactNoCovid,
                detail: format!("{}: P(none) = {}", describe_row(net, target, r), row[none]),
            });
        }
    }
    Ok(())
}

fn check_perfect_test(net: &BayesianNetwork) -> Result<(), ModelError> {
    let test = net.index_of(TEST).expect("roster checked");
    let target = net.index_of(TARGET).expect("roster checked");
    let Some(pos) = net.parents_of(test).iter().position(|&p| p == target) else {
        return Err(ModelError::AssumptionViolated {
            assumption: Assumption::PerfectTest,
            detail: format!("{TARGET} is not a parent of {TEST}"),
        });
    };
    let none = net.state_index(target, "none").expect("roster checked");
    let positive = net.state_index(test, "positive").expect("roster checked");
    for (r, row) in net.node(test).cpt.iter().enumerate() {
        if parent_states(net, test, r)[pos] == none && row[positive].abs() > ASSUMPTION_TOLERANCE {
            return Err(ModelError::AssumptionViolated {
                assumption: Assumption::PerfectTest,
                detail: format!("{}: P(positive) = {}", describe_row(net, test, r), row[positive]),
            });
        }
    }
    Ok(())
}
