//! Discrete Bayesian networks with exact inference by variable elimination.
//!
//! A network is a DAG of discrete nodes, each with a conditional probability
//! table. CPT rows enumerate parent-state combinations in row-major order:
//! parents in declared order, the first parent varying slowest, and states in
//! declared order. Each row lists one probability per state of the node.

mod factor;
mod inference;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use inference::{infer_posterior, infer_posterior_with, population_risk_posterior, EliminationStrategy, Posterior};

/// Tolerance on each CPT row summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkNode {
    pub name: String,
    pub states: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cpt {
    pub node: String,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub node: String,
    pub state: String,
}

/// Declares which node receives continuous individual risks, and how they
/// are binned. Without `edges` the unit interval is split into equal-width
/// bins, one per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskBinSpec {
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
}

/// On-disk network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub nodes: Vec<NetworkNode>,
    pub cpts: Vec<Cpt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_bin: Option<RiskBinSpec>,
}

impl NetworkFile {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::parse(Some(e.line() as u64), format!("network schema: {e}")))
    }
}

/// One problem found while validating a network.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkIssue {
    Empty,
    EmptyName { index: usize },
    DuplicateNode(String),
    TooFewStates { node: String, count: usize },
    DuplicateState { node: String, state: String },
    UnknownParent { node: String, parent: String },
    DuplicateParent { node: String, parent: String },
    Cycle(Vec<String>),
    MissingCpt(String),
    DuplicateCpt(String),
    CptForUnknownNode(String),
    RowCount { node: String, expected: usize, found: usize },
    RowWidth { node: String, row: usize, expected: usize, found: usize },
    InvalidEntry { node: String, row: usize, column: usize, value: f64 },
    RowSum { node: String, row: usize, sum: f64 },
    UnknownOutcomeNode(String),
    UnknownOutcomeState { node: String, state: String },
    UnknownRiskNode(String),
    BadRiskEdges { node: String, reason: String },
}

impl fmt::Display for NetworkIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use NetworkIssue::*;
        match self {
            Empty => write!(f, "network has no nodes"),
            EmptyName { index } => write!(f, "node #{index} has an empty name"),
            DuplicateNode(n) => write!(f, "node `{n}` is declared more than once"),
            TooFewStates { node, count } => write!(f, "node `{node}` has {count} state(s); at least 2 are required"),
            DuplicateState { node, state } => write!(f, "node `{node}` repeats state `{state}`"),
            UnknownParent { node, parent } => write!(f, "node `{node}` lists unknown parent `{parent}`"),
            DuplicateParent { node, parent } => write!(f, "node `{node}` lists parent `{parent}` twice"),
            Cycle(path) => write!(f, "cycle: {}", path.join(" -> ")),
            MissingCpt(n) => write!(f, "node `{n}` has no CPT"),
            DuplicateCpt(n) => write!(f, "node `{n}` has more than one CPT"),
            CptForUnknownNode(n) => write!(f, "CPT given for unknown node `{n}`"),
            RowCount { node, expected, found } => {
                write!(f, "CPT of `{node}` has {found} rows; parent combinations require {expected}")
            }
            RowWidth { node, row, expected, found } => {
                write!(f, "CPT of `{node}` row {row} has {found} entries; node has {expected} states")
            }
            InvalidEntry { node, row, column, value } => {
                write!(f, "CPT of `{node}` row {row} column {column} holds {value}; entries must be finite and ≥ 0")
            }
            RowSum { node, row, sum } => write!(f, "CPT of `{node}` row {row} sums to {sum}, not 1"),
            UnknownOutcomeNode(n) => write!(f, "outcome node `{n}` does not exist"),
            UnknownOutcomeState { node, state } => write!(f, "outcome node `{node}` has no state `{state}`"),
            UnknownRiskNode(n) => write!(f, "risk-bin node `{n}` does not exist"),
            BadRiskEdges { node, reason } => write!(f, "risk-bin edges for `{node}`: {reason}"),
        }
    }
}

/// Checks structure and tables, reporting every violation found.
pub fn validate_network(nodes: &[NetworkNode], cpts: &[Cpt]) -> std::result::Result<(), Vec<NetworkIssue>> {
    let mut issues = Vec::new();
    if nodes.is_empty() {
        issues.push(NetworkIssue::Empty);
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if n.name.trim().is_empty() {
            issues.push(NetworkIssue::EmptyName { index: i });
        }
        if index.insert(n.name.as_str(), i).is_some() {
            issues.push(NetworkIssue::DuplicateNode(n.name.clone()));
        }
        if n.states.len() < 2 {
            issues.push(NetworkIssue::TooFewStates {
                node: n.name.clone(),
                count: n.states.len(),
            });
        }
        let mut seen = HashSet::new();
        for s in &n.states {
            if !seen.insert(s.as_str()) {
                issues.push(NetworkIssue::DuplicateState {
                    node: n.name.clone(),
                    state: s.clone(),
                });
            }
        }
        let mut seen_parents = HashSet::new();
        for p in &n.parents {
            if !seen_parents.insert(p.as_str()) {
                issues.push(NetworkIssue::DuplicateParent {
                    node: n.name.clone(),
                    parent: p.clone(),
                });
            }
        }
    }
    for n in nodes {
        for p in &n.parents {
            if !index.contains_key(p.as_str()) {
                issues.push(NetworkIssue::UnknownParent {
                    node: n.name.clone(),
                    parent: p.clone(),
                });
            }
        }
    }
    issues.extend(find_cycles(nodes, &index).into_iter().map(NetworkIssue::Cycle));

    let mut cpt_count: HashMap<&str, usize> = HashMap::new();
    for c in cpts {
        if !index.contains_key(c.node.as_str()) {
            issues.push(NetworkIssue::CptForUnknownNode(c.node.clone()));
            continue;
        }
        let count = cpt_count.entry(c.node.as_str()).or_default();
        *count += 1;
        if *count == 2 {
            issues.push(NetworkIssue::DuplicateCpt(c.node.clone()));
        }
    }
    for n in nodes {
        if !cpt_count.contains_key(n.name.as_str()) {
            issues.push(NetworkIssue::MissingCpt(n.name.clone()));
        }
    }

    for c in cpts {
        let Some(&ni) = index.get(c.node.as_str()) else { continue };
        let node = &nodes[ni];
        let parent_cards: Option<Vec<usize>> = node
            .parents
            .iter()
            .map(|p| index.get(p.as_str()).map(|&pi| nodes[pi].states.len()))
            .collect();
        if let Some(cards) = parent_cards {
            let expected: usize = cards.iter().product();
            if c.rows.len() != expected {
                issues.push(NetworkIssue::RowCount {
                    node: c.node.clone(),
                    expected,
                    found: c.rows.len(),
                });
            }
        }
        for (r, row) in c.rows.iter().enumerate() {
            if row.len() != node.states.len() {
                issues.push(NetworkIssue::RowWidth {
                    node: c.node.clone(),
                    row: r,
                    expected: node.states.len(),
                    found: row.len(),
                });
            }
            let mut row_ok = true;
            for (col, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    row_ok = false;
                    issues.push(NetworkIssue::InvalidEntry {
                        node: c.node.clone(),
                        row: r,
                        column: col,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if row_ok && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                issues.push(NetworkIssue::RowSum {
                    node: c.node.clone(),
                    row: r,
                    sum,
                });
            }
        }
    }

    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

/// Every elementary cycle reachable by a depth-first walk over parent edges,
/// each reported once, listed in edge direction (parent before child).
fn find_cycles(nodes: &[NetworkNode], index: &HashMap<&str, usize>) -> Vec<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let children: Vec<Vec<usize>> = {
        let mut ch = vec![Vec::new(); nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            for p in &n.parents {
                if let Some(&pi) = index.get(p.as_str()) {
                    if !ch[pi].contains(&i) {
                        ch[pi].push(i);
                    }
                }
            }
        }
        ch
    };
    let mut marks = vec![Mark::New; nodes.len()];
    let mut cycles = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();

    for root in 0..nodes.len() {
        if marks[root] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next child position)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        marks[root] = Mark::Active;
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            if *pos < children[v].len() {
                let w = children[v][*pos];
                *pos += 1;
                match marks[w] {
                    Mark::New => {
                        marks[w] = Mark::Active;
                        stack.push((w, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(u, _)| u == w).expect("active node is on the stack");
                        let cycle: Vec<usize> = stack[start..].iter().map(|&(u, _)| u).collect();
                        let mut key = cycle.clone();
                        key.sort_unstable();
                        if seen.insert(key) {
                            let mut names: Vec<String> = cycle.iter().map(|&u| nodes[u].name.clone()).collect();
                            names.push(nodes[w].name.clone());
                            cycles.push(names);
                        }
                    }
                    Mark::Done => {}
                }
            } else {
                marks[v] = Mark::Done;
                stack.pop();
            }
        }
    }
    cycles
}

/// Maps continuous risks in [0, 1] onto bins given by ascending edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBinning {
    edges: Vec<f64>,
}

impl RiskBinning {
    pub fn equal_width(bins: usize) -> Self {
        RiskBinning {
            edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        }
    }

    pub fn new(edges: Vec<f64>) -> std::result::Result<Self, String> {
        if edges.len() < 2 {
            return Err("at least two edges are required".into());
        }
        if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
            return Err("edges must start at 0 and end at 1".into());
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("edges must be strictly increasing".into());
        }
        Ok(RiskBinning { edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bins are half-open `[lo, hi)` except the last, which includes 1.
    pub fn bin_of(&self, risk: f64) -> Result<usize> {
        crate::error::check_probability(risk, "individual risk")?;
        let last = self.bins() - 1;
        Ok(self.edges[1..].iter().position(|&hi| risk < hi).unwrap_or(last).min(last))
    }
}

/// A validated, immutable network.
#[derive(Debug, Clone)]
pub struct BayesNet {
    nodes: Vec<NetworkNode>,
    parents: Vec<Vec<usize>>,
    cards: Vec<usize>,
    /// Flattened CPT per node: `row * card + state`.
    tables: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
    outcome: Option<(usize, usize)>,
    risk_bin: Option<(usize, RiskBinning)>,
    description: Option<String>,
}

impl BayesNet {
    pub fn new(nodes: Vec<NetworkNode>, cpts: Vec<Cpt>) -> Result<Self> {
        Self::from_file(NetworkFile {
            description: None,
            nodes,
            cpts,
            outcome: None,
            risk_bin: None,
        })
    }

    pub fn from_file(file: NetworkFile) -> Result<Self> {
        let mut issues = validate_network(&file.nodes, &file.cpts).err().unwrap_or_default();
        let index: HashMap<String, usize> = file.nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect();

        let mut outcome = None;
        if let Some(o) = &file.outcome {
            match index.get(&o.node) {
                None => issues.push(NetworkIssue::UnknownOutcomeNode(o.node.clone())),
                Some(&ni) => match file.nodes[ni].states.iter().position(|s| *s == o.state) {
                    None => issues.push(NetworkIssue::UnknownOutcomeState {
                        node: o.node.clone(),
                        state: o.state.clone(),
                    }),
                    Some(si) => outcome = Some((ni, si)),
                },
            }
        }
        let mut risk_bin = None;
        if let Some(r) = &file.risk_bin {
            match index.get(&r.node) {
                None => issues.push(NetworkIssue::UnknownRiskNode(r.node.clone())),
                Some(&ni) => {
                    let states = file.nodes[ni].states.len();
                    let binning = match &r.edges {
                        None => Ok(RiskBinning::equal_width(states.max(1))),
                        Some(e) => RiskBinning::new(e.clone()).and_then(|b| {
                            if b.bins() == states {
                                Ok(b)
                            } else {
                                Err(format!("{} bins for {} states", b.bins(), states))
                            }
                        }),
                    };
                    match binning {
                        Ok(b) => risk_bin = Some((ni, b)),
                        Err(reason) => issues.push(NetworkIssue::BadRiskEdges {
                            node: r.node.clone(),
                            reason,
                        }),
                    }
                }
            }
        }
        if !issues.is_empty() {
            return Err(Error::InvalidNetwork(issues));
        }

        let parents: Vec<Vec<usize>> = file.nodes.iter().map(|n| n.parents.iter().map(|p| index[p]).collect()).collect();
        let cards: Vec<usize> = file.nodes.iter().map(|n| n.states.len()).collect();
        let mut tables = vec![Vec::new(); file.nodes.len()];
        for c in file.cpts {
            tables[index[&c.node]] = c.rows.into_iter().flatten().collect();
        }
        Ok(BayesNet {
            nodes: file.nodes,
            parents,
            cards,
            tables,
            index,
            outcome,
            risk_bin,
            description: file.description,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_file(NetworkFile::from_json_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The illustrative factor-group network bundled with the crate.
    pub fn bundled_demo() -> Self {
        Self::from_json_str(crate::bundled::DEMO_NETWORK).expect("bundled network is valid")
    }

    pub fn nodes(&self) -> &[NetworkNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn cardinality(&self, node: usize) -> usize {
        self.cards[node]
    }

    pub fn parents_of(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn outcome(&self) -> Option<(usize, usize)> {
        self.outcome
    }

    pub fn risk_binning(&self) -> Option<(&str, &RiskBinning)> {
        self.risk_bin.as_ref().map(|(i, b)| (self.nodes[*i].name.as_str(), b))
    }

    /// Evidence entry placing a continuous individual risk into its bin.
    pub fn risk_evidence(&self, risk: f64) -> Result<(String, String)> {
        let (ni, binning) = self
            .risk_bin
            .as_ref()
            .ok_or_else(|| Error::Config("network declares no risk-bin node".into()))?;
        let bin = binning.bin_of(risk)?;
        Ok((self.nodes[*ni].name.clone(), self.nodes[*ni].states[bin].clone()))
    }

    /// `P(node = state | parents = parent_states)`.
    pub fn conditional(&self, node: usize, state: usize, assignment: &[usize]) -> f64 {
        let row = self.parents[node].iter().fold(0, |acc, &p| acc * self.cards[p] + assignment[p]);
        self.tables[node][row * self.cards[node] + state]
    }

    /// A topological order of the nodes (parents first), ties by declaration order.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(self.len());
        let mut ready: Vec<usize> = (0..self.len()).filter(|&i| indegree[i] == 0).collect();
        while let Some(v) = ready.first().copied() {
            ready.remove(0);
            order.push(v);
            for c in 0..self.len() {
                if self.parents[c].contains(&v) {
                    indegree[c] -= 1;
                    if indegree[c] == 0 {
                        let pos = ready.partition_point(|&x| x < c);
                        ready.insert(pos, c);
                    }
                }
            }
        }
        order
    }

    /// Resolves named evidence to `(node, state)` indices.
    pub fn resolve_evidence(&self, evidence: &IndexMap<String, String>) -> Result<Vec<(usize, usize)>> {
        evidence
            .iter()
            .map(|(node, state)| {
                let ni = self
                    .node_index(node)
                    .ok_or_else(|| Error::Assignment(format!("unknown node `{node}`")))?;
                let si = self.nodes[ni]
                    .states
                    .iter()
                    .position(|s| s == state)
                    .ok_or_else(|| Error::Assignment(format!("node `{node}` has no state `{state}`")))?;
                Ok((ni, si))
            })
            .collect()
    }
}

/// Chain-rule probability of a complete assignment: the product over nodes of
/// `P(node | parents)`.
pub fn joint_probability(net: &BayesNet, assignment: &IndexMap<String, String>) -> Result<f64> {
    let resolved = net.resolve_evidence(assignment)?;
    let mut states = vec![usize::MAX; net.len()];
    for (ni, si) in resolved {
        states[ni] = si;
    }
    if let Some(missing) = states.iter().position(|&s| s == usize::MAX) {
        return Err(Error::Assignment(format!(
            "assignment does not cover node `{}`",
            net.nodes[missing].name
        )));
    }
    Ok(joint_probability_indexed(net, &states))
}

/// [`joint_probability`] over state indices, one per node in declaration order.
pub fn joint_probability_indexed(net: &BayesNet, states: &[usize]) -> f64 {
    (0..net.len()).map(|n| net.conditional(n, states[n], states)).product()
}
