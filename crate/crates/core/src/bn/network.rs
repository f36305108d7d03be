use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BnError;

/// Tolerance for probability vectors summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// One node of a discrete network as written in a model file.
///
/// `cpt` holds one probability vector per combination of parent states,
/// row-major over `parents` in declared order (the last parent varies
/// fastest). Any extra per-node keys in the file are kept in `annotations`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<f64>>,
    #[serde(flatten)]
    pub annotations: BTreeMap<String, Value>,
}

impl NodeSpec {
    pub fn new(id: &str, states: &[&str], parents: &[&str], cpt: Vec<Vec<f64>>) -> Self {
        NodeSpec {
            id: id.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            cpt,
            annotations: BTreeMap::new(),
        }
    }
}

/// An unvalidated collection of nodes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub nodes: Vec<NodeSpec>,
}

/// A single broken structural or numeric invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    EmptyNetwork,
    DuplicateNode(String),
    TooFewStates { node: String, count: usize },
    DuplicateState { node: String, state: String },
    DanglingParent { node: String, parent: String },
    DuplicateParent { node: String, parent: String },
    /// Node ids along the cycle, first id repeated implicitly.
    Cycle(Vec<String>),
    WrongRowCount { node: String, expected: usize, actual: usize },
    WrongRowWidth { node: String, row: usize, expected: usize, actual: usize },
    EntryOutOfRange { node: String, row: usize, value: f64 },
    RowSum { node: String, row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyNetwork => write!(f, "network has no nodes"),
            Violation::DuplicateNode(id) => write!(f, "duplicate node id {id}"),
            Violation::TooFewStates { node, count } => {
                write!(f, "node {node} has {count} states, need at least 2")
            }
            Violation::DuplicateState { node, state } => {
                write!(f, "node {node} repeats state {state}")
            }
            Violation::DanglingParent { node, parent } => {
                write!(f, "node {node} references unknown parent {parent}")
            }
            Violation::DuplicateParent { node, parent } => {
                write!(f, "node {node} lists parent {parent} twice")
            }
            Violation::Cycle(ids) if ids.len() == 2 => write!(f, "cycle: {}↔{}", ids[0], ids[1]),
            Violation::Cycle(ids) => {
                write!(f, "cycle: {}", ids.join("→"))?;
                if let Some(first) = ids.first() {
                    write!(f, "→{first}")?;
                }
                Ok(())
            }
            Violation::WrongRowCount { node, expected, actual } => {
                write!(f, "node {node}: cpt has {actual} rows, expected {expected}")
            }
            Violation::WrongRowWidth { node, row, expected, actual } => {
                write!(f, "node {node} row {row}: {actual} entries, expected {expected}")
            }
            Violation::EntryOutOfRange { node, row, value } => {
                write!(f, "node {node} row {row}: probability {value} outside [0,1]")
            }
            Violation::RowSum { node, row, sum } => {
                write!(f, "node {node} row {row}: row sum {sum} ≠ 1")
            }
        }
    }
}

/// Outcome of [`validate_network`]; `ok()` iff no violations were found.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every structural and numeric invariant and reports all failures.
pub fn validate_network(spec: &NetworkSpec) -> ValidationReport {
    let mut violations = Vec::new();
    if spec.nodes.is_empty() {
        violations.push(Violation::EmptyNetwork);
    }

    let mut by_id: HashMap<&str, &NodeSpec> = HashMap::new();
    for node in &spec.nodes {
        if by_id.insert(node.id.as_str(), node).is_some() {
            violations.push(Violation::DuplicateNode(node.id.clone()));
        }
    }

    for node in &spec.nodes {
        if node.states.len() < 2 {
            violations.push(Violation::TooFewStates { node: node.id.clone(), count: node.states.len() });
        }
        for (i, s) in node.states.iter().enumerate() {
            if node.states[..i].contains(s) {
                violations.push(Violation::DuplicateState { node: node.id.clone(), state: s.clone() });
            }
        }

        let mut rows_expected = Some(1usize);
        for (i, p) in node.parents.iter().enumerate() {
            if node.parents[..i].contains(p) {
                violations.push(Violation::DuplicateParent { node: node.id.clone(), parent: p.clone() });
            }
            match by_id.get(p.as_str()) {
                Some(parent) => {
                    rows_expected = rows_expected.and_then(|r| r.checked_mul(parent.states.len()))
                }
                None => {
                    violations.push(Violation::DanglingParent { node: node.id.clone(), parent: p.clone() });
                    rows_expected = None;
                }
            }
        }
        if let Some(expected) = rows_expected {
            if node.cpt.len() != expected {
                violations.push(Violation::WrongRowCount {
                    node: node.id.clone(),
                    expected,
                    actual: node.cpt.len(),
                });
            }
        }

        for (r, row) in node.cpt.iter().enumerate() {
            if row.len() != node.states.len() {
                violations.push(Violation::WrongRowWidth {
                    node: node.id.clone(),
                    row: r,
                    expected: node.states.len(),
                    actual: row.len(),
                });
                continue;
            }
            if let Some(&bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                violations.push(Violation::EntryOutOfRange { node: node.id.clone(), row: r, value: bad });
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum { node: node.id.clone(), row: r, sum });
            }
        }
    }

    violations.extend(find_cycles(&by_id).into_iter().map(Violation::Cycle));
    ValidationReport { violations }
}

/// Returns one representative cycle per strongly connected group, each
/// rotated to start at its smallest id so the report is deterministic.
fn find_cycles(by_id: &HashMap<&str, &NodeSpec>) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }

    let mut ids: Vec<&str> = by_id.keys().copied().collect();
    ids.sort_unstable();
    let mut marks: HashMap<&str, Mark> = ids.iter().map(|id| (*id, Mark::Fresh)).collect();
    let mut cycles = Vec::new();

    // Depth-first search following child→parent edges.
    fn visit<'a>(
        id: &'a str,
        by_id: &HashMap<&'a str, &'a NodeSpec>,
        marks: &mut HashMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
        cycles: &mut Vec<Vec<String>>,
    ) {
        marks.insert(id, Mark::Active);
        stack.push(id);
        let mut parents: Vec<&str> = by_id[id].parents.iter().map(|s| s.as_str()).collect();
        parents.sort_unstable();
        parents.dedup();
        for p in parents {
            match marks.get(p).copied() {
                Some(Mark::Fresh) => visit(p, by_id, marks, stack, cycles),
                Some(Mark::Active) => {
                    let start = stack.iter().position(|s| *s == p).unwrap_or(0);
                    // Stack runs child→parent; reverse so arrows read parent→child.
                    let mut cycle: Vec<String> = stack[start..].iter().rev().map(|s| s.to_string()).collect();
                    let min_pos = cycle
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    cycle.rotate_left(min_pos);
                    cycles.push(cycle);
                }
                _ => {}
            }
        }
        stack.pop();
        marks.insert(id, Mark::Done);
    }

    for id in ids {
        if marks[id] == Mark::Fresh {
            let mut stack = Vec::new();
            visit(id, by_id, &mut marks, &mut stack, &mut cycles);
        }
    }
    cycles
}

/// A validated network compiled to integer indices.
///
/// Node order follows the file; `topo` is a topological order with ties
/// broken by ascending id.
#[derive(Clone, Debug)]
pub struct BayesianNetwork {
    spec: NetworkSpec,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl BayesianNetwork {
    pub fn new(spec: NetworkSpec) -> Result<Self, BnError> {
        let report = validate_network(&spec);
        if !report.ok() {
            return Err(BnError::InvalidNetwork(report));
        }
        let index: HashMap<String, usize> =
            spec.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let parents: Vec<Vec<usize>> = spec
            .nodes
            .iter()
            .map(|n| n.parents.iter().map(|p| index[p]).collect())
            .collect();

        let n = spec.nodes.len();
        let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
        let mut children = vec![Vec::new(); n];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(child);
            }
        }
        let mut ready: std::collections::BTreeSet<(&str, usize)> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .map(|i| (spec.nodes[i].id.as_str(), i))
            .collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(&first) = ready.iter().next() {
            ready.remove(&first);
            let (_, v) = first;
            topo.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert((spec.nodes[c].id.as_str(), c));
                }
            }
        }
        debug_assert_eq!(topo.len(), n);

        Ok(BayesianNetwork { spec, index, parents, topo })
    }

    pub fn from_json(text: &str) -> Result<Self, BnError> {
        Self::new(super::io::parse_network(text)?)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &NodeSpec {
        &self.spec.nodes[i]
    }

    pub fn node_by_id(&self, id: &str) -> Option<&NodeSpec> {
        self.index.get(id).map(|&i| &self.spec.nodes[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.spec.nodes[i].states.len()
    }

    pub fn parents_of(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.spec.nodes.iter().map(|n| n.id.as_str())
    }

    /// Index of `state` within node `i`.
    pub fn state_index(&self, i: usize, state: &str) -> Option<usize> {
        self.spec.nodes[i].states.iter().position(|s| s == state)
    }

    /// Conditional probability of `state` of node `i` given the states of
    /// its parents, looked up through `assignment` (indexed by node).
    pub(crate) fn cpt_entry(&self, i: usize, assignment: &[usize]) -> f64 {
        let mut row = 0usize;
        for &p in &self.parents[i] {
            row = row * self.cardinality(p) + assignment[p];
        }
        self.spec.nodes[i].cpt[row][assignment[i]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin(id: &str, p: f64) -> NodeSpec {
        NodeSpec::new(id, &["t", "f"], &[], vec![vec![p, 1.0 - p]])
    }

    #[test]
    fn minimal_network_is_valid() {
        let spec = NetworkSpec { nodes: vec![coin("A", 0.5)] };
        assert!(validate_network(&spec).ok());
    }

    #[test]
    fn two_cycle_is_reported() {
        let a = NodeSpec::new("A", &["t", "f"], &["B"], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let b = NodeSpec::new("B", &["t", "f"], &["A"], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let report = validate_network(&NetworkSpec { nodes: vec![a, b] });
        assert_eq!(report.violations, vec![Violation::Cycle(vec!["A".into(), "B".into()])]);
        assert_eq!(report.to_string(), "cycle: A↔B");
    }

    #[test]
    fn longer_cycle_reads_parent_to_child() {
        let row2 = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let a = NodeSpec::new("A", &["t", "f"], &["C"], row2.clone());
        let b = NodeSpec::new("B", &["t", "f"], &["A"], row2.clone());
        let c = NodeSpec::new("C", &["t", "f"], &["B"], row2);
        let report = validate_network(&NetworkSpec { nodes: vec![a, b, c] });
        assert_eq!(report.to_string(), "cycle: A→B→C→A");
    }

    #[test]
    fn bad_row_sum_names_the_row() {
        let spec = NetworkSpec { nodes: vec![NodeSpec::new("A", &["t", "f"], &[], vec![vec![0.6, 0.6]])] };
        let report = validate_network(&spec);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::RowSum { node, row, sum } => {
                assert_eq!(node, "A");
                assert_eq!(*row, 0);
                assert!((sum - 1.2).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(report.to_string().contains("row sum 1.2 ≠ 1"));
    }

    #[test]
    fn collects_every_violation() {
        let a = NodeSpec::new("A", &["x", "x"], &["Z"], vec![vec![0.5, 0.5]]);
        let b = NodeSpec::new("B", &["t", "f"], &["A"], vec![vec![1.5, -0.5]]);
        let report = validate_network(&NetworkSpec { nodes: vec![a, b] });
        let text = report.to_string();
        assert!(text.contains("repeats state x"), "{text}");
        assert!(text.contains("unknown parent Z"), "{text}");
        assert!(text.contains("cpt has 1 rows, expected 2"), "{text}");
        assert!(text.contains("outside [0,1]"), "{text}");
    }

    #[test]
    fn empty_network_rejected() {
        assert_eq!(validate_network(&NetworkSpec::default()).violations, vec![Violation::EmptyNetwork]);
    }

    #[test]
    fn topological_order_breaks_ties_by_id() {
        let c = coin("c", 0.5);
        let a = coin("a", 0.5);
        let b = NodeSpec::new("b", &["t", "f"], &["c"], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let net = BayesianNetwork::new(NetworkSpec { nodes: vec![c, b, a] }).unwrap();
        let order: Vec<&str> = net.topological_order().iter().map(|&i| net.node(i).id.as_str()).collect();
        assert_eq!(order, vec!["a", "c", "b"]);
    }
}
