//! Brute-force enumeration evaluators used as independent test oracles.
//!
//! Everything here works in linear space by recursive descent with
//! memoization per complete assignment, deliberately sharing nothing with
//! the log-space topological passes it is used to check. Only feasible for
//! networks with a handful of joint states; test code only (enabled through
//! the `oracle` feature).

use crate::spn::{Evidence, NodeId, Spn, SpnNode, VarEvidence, VarId};

/// Iterates every complete assignment of the network's variables.
pub fn assignments(spn: &Spn) -> Vec<Vec<usize>> {
    let cards: Vec<usize> = spn.variables().iter().map(|v| v.cardinality).collect();
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; cards.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for i in (0..cards.len()).rev() {
            cur[i] += 1;
            if cur[i] < cards[i] {
                break;
            }
            cur[i] = 0;
        }
    }
    out
}

fn multiplier(evidence: &Evidence, var: usize, value: usize) -> f64 {
    match evidence.get(VarId(var)) {
        VarEvidence::Observed(v) => {
            if *v == value {
                1.0
            } else {
                0.0
            }
        }
        VarEvidence::Soft(m) => m[value],
        VarEvidence::Marginalized => 1.0,
    }
}

/// Evidence weight of a complete assignment: the product of per-variable
/// multipliers.
pub fn evidence_weight(spn: &Spn, evidence: &Evidence, assignment: &[usize]) -> f64 {
    (0..spn.num_variables())
        .map(|v| multiplier(evidence, v, assignment[v]))
        .product()
}

fn node_value(spn: &Spn, id: NodeId, assignment: &[usize], memo: &mut [Option<f64>]) -> f64 {
    if let Some(v) = memo[id.0] {
        return v;
    }
    let v = match spn.node(id).expect("oracle node") {
        SpnNode::Indicator { var, value } => {
            if assignment[var.0] == *value {
                1.0
            } else {
                0.0
            }
        }
        SpnNode::Sum { children } => children
            .iter()
            .map(|&(c, w)| w * node_value(spn, c, assignment, memo))
            .sum(),
        SpnNode::Product { children } => children
            .iter()
            .map(|&c| node_value(spn, c, assignment, memo))
            .product(),
    };
    memo[id.0] = Some(v);
    v
}

fn node_max_value(spn: &Spn, id: NodeId, assignment: &[usize], memo: &mut [Option<f64>]) -> f64 {
    if let Some(v) = memo[id.0] {
        return v;
    }
    let v = match spn.node(id).expect("oracle node") {
        SpnNode::Indicator { var, value } => {
            if assignment[var.0] == *value {
                1.0
            } else {
                0.0
            }
        }
        SpnNode::Sum { children } => children
            .iter()
            .map(|&(c, w)| w * node_max_value(spn, c, assignment, memo))
            .fold(0.0, f64::max),
        SpnNode::Product { children } => children
            .iter()
            .map(|&c| node_max_value(spn, c, assignment, memo))
            .product(),
    };
    memo[id.0] = Some(v);
    v
}

/// Network value at the one-hot assignment, linear space.
pub fn joint_value(spn: &Spn, assignment: &[usize]) -> f64 {
    let mut memo = vec![None; spn.num_nodes()];
    node_value(spn, spn.root(), assignment, &mut memo)
}

/// Max-circuit value at the one-hot assignment, linear space.
pub fn max_circuit_value(spn: &Spn, assignment: &[usize]) -> f64 {
    let mut memo = vec![None; spn.num_nodes()];
    node_max_value(spn, spn.root(), assignment, &mut memo)
}

/// Network value under arbitrary evidence by expanding the network
/// polynomial over all complete assignments.
pub fn eval(spn: &Spn, evidence: &Evidence) -> f64 {
    assignments(spn)
        .iter()
        .map(|a| joint_value(spn, a) * evidence_weight(spn, evidence, a))
        .sum()
}

/// Per-variable posterior under the evidence, by enumeration.
pub fn marginals(spn: &Spn, evidence: &Evidence) -> Vec<Vec<f64>> {
    let mut acc: Vec<Vec<f64>> = spn
        .variables()
        .iter()
        .map(|v| vec![0.0; v.cardinality])
        .collect();
    for a in assignments(spn) {
        let w = joint_value(spn, &a) * evidence_weight(spn, evidence, &a);
        for (var, &val) in a.iter().enumerate() {
            acc[var][val] += w;
        }
    }
    for row in acc.iter_mut() {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
    }
    acc
}

/// Largest max-circuit value over all complete assignments, weighted by the
/// evidence.
pub fn best_max_value(spn: &Spn, evidence: &Evidence) -> f64 {
    assignments(spn)
        .iter()
        .map(|a| max_circuit_value(spn, a) * evidence_weight(spn, evidence, a))
        .fold(0.0, f64::max)
}
