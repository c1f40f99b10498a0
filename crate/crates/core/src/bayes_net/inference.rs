use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::Serialize;

use super::factor::Factor;
use super::BayesNet;
use crate::error::{Error, Result};

/// How hidden variables are ordered for elimination.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum EliminationStrategy {
    /// Greedy minimum degree on the interaction graph, ties broken by name.
    #[default]
    MinDegree,
    /// Children before parents.
    ReverseTopological,
    /// An explicit order naming every hidden variable exactly once.
    Custom(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    pub node: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Posterior {
    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states.iter().position(|s| s == state).map(|i| self.probabilities[i])
    }
}

/// `P(query | evidence)` by variable elimination with the default ordering.
pub fn infer_posterior(net: &BayesNet, query: &str, evidence: &IndexMap<String, String>) -> Result<Posterior> {
    infer_posterior_with(net, query, evidence, &EliminationStrategy::MinDegree)
}

pub fn infer_posterior_with(
    net: &BayesNet,
    query: &str,
    evidence: &IndexMap<String, String>,
    strategy: &EliminationStrategy,
) -> Result<Posterior> {
    let q = net
        .node_index(query)
        .ok_or_else(|| Error::Assignment(format!("unknown query node `{query}`")))?;
    let observed = net.resolve_evidence(evidence)?;
    let mut fixed: Vec<Option<usize>> = vec![None; net.len()];
    for &(n, s) in &observed {
        if let Some(prev) = fixed[n] {
            if prev != s {
                return Err(Error::ImpossibleEvidence);
            }
        }
        fixed[n] = Some(s);
    }

    let mut factors: Vec<Factor> = (0..net.len())
        .map(|n| {
            let mut f = cpt_factor(net, n);
            for (v, s) in fixed.iter().enumerate() {
                if let Some(s) = *s {
                    if f.contains(v) {
                        f = f.reduce(v, s);
                    }
                }
            }
            f
        })
        .collect();

    let hidden: Vec<usize> = (0..net.len()).filter(|&v| v != q && fixed[v].is_none()).collect();
    let order = elimination_order(net, &factors, &hidden, strategy)?;
    for v in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.contains(v));
        factors = without;
        if let Some(product) = with.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(product.sum_out(v));
        }
    }
    let joint = factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f));

    let card = net.cardinality(q);
    let unnormalized: Vec<f64> = match fixed[q] {
        Some(s) => {
            let mass = joint.values.iter().sum::<f64>();
            (0..card).map(|i| if i == s { mass } else { 0.0 }).collect()
        }
        None => {
            debug_assert_eq!(joint.vars, [q]);
            joint.values
        }
    };
    let z: f64 = unnormalized.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ImpossibleEvidence);
    }
    Ok(Posterior {
        node: query.to_string(),
        states: net.nodes()[q].states.clone(),
        probabilities: unnormalized.into_iter().map(|v| v / z).collect(),
    })
}

/// Posterior probability of the network's declared outcome state.
pub fn population_risk_posterior(net: &BayesNet, evidence: &IndexMap<String, String>) -> Result<f64> {
    let (node, state) = net
        .outcome()
        .ok_or_else(|| Error::Config("network declares no outcome node".into()))?;
    let name = &net.nodes()[node].name;
    let posterior = infer_posterior(net, name, evidence)?;
    Ok(posterior.probabilities[state])
}

fn cpt_factor(net: &BayesNet, n: usize) -> Factor {
    let mut vars = net.parents_of(n).to_vec();
    vars.push(n);
    let cards = vars.iter().map(|&v| net.cardinality(v)).collect();
    let size: usize = vars.iter().map(|&v| net.cardinality(v)).product();
    let mut values = Vec::with_capacity(size);
    let mut assignment = vec![0usize; net.len()];
    let mut counter = vec![0usize; vars.len()];
    for _ in 0..size {
        for (&v, &c) in vars.iter().zip(&counter) {
            assignment[v] = c;
        }
        values.push(net.conditional(n, assignment[n], &assignment));
        for i in (0..counter.len()).rev() {
            counter[i] += 1;
            if counter[i] < net.cardinality(vars[i]) {
                break;
            }
            counter[i] = 0;
        }
    }
    Factor::from_unsorted(vars, cards, values)
}

fn elimination_order(
    net: &BayesNet,
    factors: &[Factor],
    hidden: &[usize],
    strategy: &EliminationStrategy,
) -> Result<Vec<usize>> {
    match strategy {
        EliminationStrategy::MinDegree => Ok(min_degree_order(net, factors, hidden)),
        EliminationStrategy::ReverseTopological => {
            let mut topo = net.topological_order();
            topo.reverse();
            Ok(topo.into_iter().filter(|v| hidden.contains(v)).collect())
        }
        EliminationStrategy::Custom(names) => {
            let mut order = Vec::with_capacity(names.len());
            for name in names {
                let v = net
                    .node_index(name)
                    .ok_or_else(|| Error::Assignment(format!("unknown node `{name}` in elimination order")))?;
                if !hidden.contains(&v) {
                    return Err(Error::Assignment(format!(
                        "`{name}` is the query or observed and cannot be eliminated"
                    )));
                }
                if order.contains(&v) {
                    return Err(Error::Assignment(format!("`{name}` appears twice in elimination order")));
                }
                order.push(v);
            }
            if let Some(&missing) = hidden.iter().find(|v| !order.contains(v)) {
                return Err(Error::Assignment(format!(
                    "elimination order omits `{}`",
                    net.nodes()[missing].name
                )));
            }
            Ok(order)
        }
    }
}

fn min_degree_order(net: &BayesNet, factors: &[Factor], hidden: &[usize]) -> Vec<usize> {
    let n = net.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: Vec<usize> = hidden.to_vec();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let (pos, &v) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                adj[a]
                    .len()
                    .cmp(&adj[b].len())
                    .then_with(|| net.nodes()[a].name.cmp(&net.nodes()[b].name))
            })
            .expect("remaining is non-empty");
        remaining.swap_remove(pos);
        order.push(v);
        let neighbours: Vec<usize> = adj[v].iter().copied().collect();
        for &a in &neighbours {
            adj[a].remove(&v);
            for &b in &neighbours {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
    }
    order
}
