//! JSON network files.
//!
//! ```json
//! {"format": 1, "nodes": [{"id": "A", "states": ["t", "f"], "parents": [], "cpt": [[0.3, 0.7]]}]}
//! ```
//!
//! `format` is required; unknown top-level keys are rejected. Unknown keys on
//! a node are preserved as annotations.

use serde::{Deserialize, Serialize};

use super::{BnError, NetworkSpec, NodeSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: u32,
    nodes: Vec<NodeSpec>,
}

pub fn parse_network(text: &str) -> Result<NetworkSpec, BnError> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| BnError::Format(e.to_string()))?;
    if file.format != FORMAT_VERSION {
        return Err(BnError::Format(format!(
            "unsupported format version {}, expected {FORMAT_VERSION}",
            file.format
        )));
    }
    Ok(NetworkSpec { nodes: file.nodes })
}

pub fn to_json(spec: &NetworkSpec) -> String {
    let file = NetworkFile { format: FORMAT_VERSION, nodes: spec.nodes.clone() };
    serde_json::to_string_pretty(&file).expect("network serializes")
}
