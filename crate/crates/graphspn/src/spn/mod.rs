//! Representation and validation of sum-product networks over categorical
//! variables.
//!
//! An [`Spn`] is a rooted DAG stored as a flat node table. Leaves are
//! indicators of (variable, value) pairs; internal nodes are weighted sums
//! and products. A topological order over the nodes reachable from the root
//! is computed once at construction, so both inference passes are linear
//! scans. All evaluation happens in natural-log space (see [`infer`]).

mod infer;
mod io;

pub use infer::{Evidence, MpeResult, VarEvidence};
pub(crate) use infer::log_add_exp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a categorical variable, dense within one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a node in the flat node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// A categorical variable with a fixed number of states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoricalVariable {
    pub id: VarId,
    pub cardinality: usize,
}

/// One node of the network.
#[derive(Debug, Clone, PartialEq)]
pub enum SpnNode {
    /// Leaf asserting `var == value`; soft evidence scales its value.
    Indicator { var: VarId, value: usize },
    /// Weighted mixture of children.
    Sum { children: Vec<(NodeId, f64)> },
    /// Product of children with disjoint scopes.
    Product { children: Vec<NodeId> },
}

/// Structural defect found by [`Spn::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Node not reachable from the root.
    UnreachableNode,
    /// Children of a sum differ in scope.
    IncompleteSum,
    /// A variable appears in more than one child of a product.
    NonDecomposableProduct,
}

/// Outcome of the validity checks. Violations are reported, not thrown.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub is_rooted_dag: bool,
    pub is_complete: bool,
    pub is_decomposable: bool,
    pub offending_nodes: Vec<(NodeId, ViolationKind)>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.is_rooted_dag && self.is_complete && self.is_decomposable
    }
}

#[derive(Debug, Error)]
pub enum SpnError {
    #[error("node id {0} does not resolve within the node table")]
    UnknownNode(usize),
    #[error("variable id {0} out of range")]
    UnknownVariable(usize),
    #[error("variable ids must be dense 0..V-1, found {0} at position {1}")]
    NonDenseVariables(usize, usize),
    #[error("variable {0} has cardinality {1}, need at least 2")]
    BadCardinality(usize, usize),
    #[error("indicator value {value} out of range for variable {var} of cardinality {cardinality}")]
    IndicatorOutOfRange { var: usize, value: usize, cardinality: usize },
    #[error("node {0} has an empty child list")]
    EmptyChildren(usize),
    #[error("sum node {node} carries invalid weight {weight}")]
    InvalidWeight { node: usize, weight: f64 },
    #[error("cycle detected through node {0}")]
    CycleDetected(usize),
    #[error("sum node {0} has non-positive total weight")]
    NonPositiveSumTotal(usize),
    #[error("node {0} is not a sum node")]
    NotASum(usize),
    #[error("evidence covers {got} variables but the network has {expected}")]
    EvidenceArityMismatch { got: usize, expected: usize },
    #[error("soft evidence for variable {var} invalid: {reason}")]
    InvalidSoftEvidence { var: usize, reason: String },
    #[error("evidence has zero likelihood")]
    ZeroLikelihood,
    #[error("malformed network document: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A sum-product network: variable table, flat node table, root.
///
/// Immutable after construction/normalization apart from sum-weight updates;
/// read-only inference is safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Spn {
    variables: Vec<CategoricalVariable>,
    nodes: Vec<SpnNode>,
    root: NodeId,
    /// Nodes reachable from the root, children before parents.
    topo: Vec<NodeId>,
}

impl Spn {
    /// Builds a network, checking referential integrity and acyclicity.
    ///
    /// Completeness/decomposability are not enforced here; see
    /// [`Spn::validate`].
    pub fn new(
        variables: Vec<CategoricalVariable>,
        nodes: Vec<SpnNode>,
        root: NodeId,
    ) -> Result<Self, SpnError> {
        for (pos, v) in variables.iter().enumerate() {
            if v.id.0 != pos {
                return Err(SpnError::NonDenseVariables(v.id.0, pos));
            }
            if v.cardinality < 2 {
                return Err(SpnError::BadCardinality(v.id.0, v.cardinality));
            }
        }
        let n = nodes.len();
        if root.0 >= n {
            return Err(SpnError::UnknownNode(root.0));
        }
        for (id, node) in nodes.iter().enumerate() {
            match node {
                SpnNode::Indicator { var, value } => {
                    let card = variables
                        .get(var.0)
                        .ok_or(SpnError::UnknownVariable(var.0))?
                        .cardinality;
                    if *value >= card {
                        return Err(SpnError::IndicatorOutOfRange {
                            var: var.0,
                            value: *value,
                            cardinality: card,
                        });
                    }
                }
                SpnNode::Sum { children } => {
                    if children.is_empty() {
                        return Err(SpnError::EmptyChildren(id));
                    }
                    for &(c, w) in children {
                        if c.0 >= n {
                            return Err(SpnError::UnknownNode(c.0));
                        }
                        if !w.is_finite() || w < 0.0 {
                            return Err(SpnError::InvalidWeight { node: id, weight: w });
                        }
                    }
                }
                SpnNode::Product { children } => {
                    if children.is_empty() {
                        return Err(SpnError::EmptyChildren(id));
                    }
                    for &c in children {
                        if c.0 >= n {
                            return Err(SpnError::UnknownNode(c.0));
                        }
                    }
                }
            }
        }
        let full = toposort_all(&nodes)?;
        let reach = reachable_from(&nodes, root.0);
        let topo = full.into_iter().filter(|&id| reach[id]).map(NodeId).collect();
        Ok(Spn { variables, nodes, root, topo })
    }

    pub fn variables(&self) -> &[CategoricalVariable] {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, var: VarId) -> usize {
        self.variables[var.0].cardinality
    }

    pub fn nodes(&self) -> &[SpnNode] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&SpnNode, SpnError> {
        self.nodes.get(id.0).ok_or(SpnError::UnknownNode(id.0))
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Nodes reachable from the root, children before parents.
    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo
    }

    /// Replaces the outgoing weights of a sum node. Weight changes never
    /// alter the topology, so the topological order stays valid.
    pub fn set_sum_weights(&mut self, id: NodeId, weights: &[f64]) -> Result<(), SpnError> {
        let n = id.0;
        match self.nodes.get_mut(n) {
            Some(SpnNode::Sum { children }) => {
                if children.len() != weights.len() {
                    return Err(SpnError::InvalidWeight {
                        node: n,
                        weight: f64::NAN,
                    });
                }
                for (slot, &w) in children.iter_mut().zip(weights) {
                    if !w.is_finite() || w < 0.0 {
                        return Err(SpnError::InvalidWeight { node: n, weight: w });
                    }
                    slot.1 = w;
                }
                Ok(())
            }
            Some(_) => Err(SpnError::NotASum(n)),
            None => Err(SpnError::UnknownNode(n)),
        }
    }

    /// The set of variables with indicators below `id`, ascending.
    pub fn scope(&self, id: NodeId) -> Result<Vec<VarId>, SpnError> {
        if id.0 >= self.nodes.len() {
            return Err(SpnError::UnknownNode(id.0));
        }
        let scopes = self.all_scopes();
        Ok(scopes[id.0].iter().map(VarId).collect())
    }

    /// Scopes for every node, computed bottom-up over the whole table.
    fn all_scopes(&self) -> Vec<VarSet> {
        let n = self.nodes.len();
        let v = self.variables.len();
        let mut scopes = vec![VarSet::empty(v); n];
        // Acyclicity over the full table is checked at construction.
        let order = toposort_all(&self.nodes).expect("node table is acyclic");
        for id in order {
            let scope = match &self.nodes[id] {
                SpnNode::Indicator { var, .. } => VarSet::singleton(v, var.0),
                SpnNode::Sum { children } => {
                    let mut s = VarSet::empty(v);
                    for &(c, _) in children {
                        s.union_with(&scopes[c.0]);
                    }
                    s
                }
                SpnNode::Product { children } => {
                    let mut s = VarSet::empty(v);
                    for &c in children {
                        s.union_with(&scopes[c.0]);
                    }
                    s
                }
            };
            scopes[id] = scope;
        }
        scopes
    }

    /// Runs the rooted-DAG, completeness, and decomposability checks.
    /// All three run even if an earlier one fails.
    pub fn validate(&self) -> ValidityReport {
        let mut offending = Vec::new();

        let mut reachable = vec![false; self.nodes.len()];
        for &id in &self.topo {
            reachable[id.0] = true;
        }
        let mut is_rooted_dag = true;
        for (id, seen) in reachable.iter().enumerate() {
            if !seen {
                is_rooted_dag = false;
                offending.push((NodeId(id), ViolationKind::UnreachableNode));
            }
        }

        let scopes = self.all_scopes();
        let mut is_complete = true;
        let mut is_decomposable = true;
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                SpnNode::Sum { children } => {
                    let first = &scopes[children[0].0 .0];
                    if children.iter().any(|&(c, _)| &scopes[c.0] != first) {
                        is_complete = false;
                        offending.push((NodeId(id), ViolationKind::IncompleteSum));
                    }
                }
                SpnNode::Product { children } => {
                    let mut acc = VarSet::empty(self.variables.len());
                    let mut disjoint = true;
                    for &c in children {
                        if acc.intersects(&scopes[c.0]) {
                            disjoint = false;
                            break;
                        }
                        acc.union_with(&scopes[c.0]);
                    }
                    if !disjoint {
                        is_decomposable = false;
                        offending.push((NodeId(id), ViolationKind::NonDecomposableProduct));
                    }
                }
                SpnNode::Indicator { .. } => {}
            }
        }

        ValidityReport { is_rooted_dag, is_complete, is_decomposable, offending_nodes: offending }
    }

    /// Divides each sum's outgoing weights by their total, absorbing each
    /// child's normalization constant into the parent edge first.
    ///
    /// The absorption step keeps every node's value a constant multiple of
    /// its old value, so ratios of network values under identical evidence
    /// are unchanged; plain per-sum division alone would reweight mixtures
    /// whose children carried different totals.
    pub fn normalize_weights(&mut self) -> Result<(), SpnError> {
        let order = toposort_all(&self.nodes).expect("node table is acyclic");
        let mut correction = vec![1.0f64; self.nodes.len()];
        for id in order {
            match &mut self.nodes[id] {
                SpnNode::Indicator { .. } => {}
                SpnNode::Product { children } => {
                    correction[id] = children.iter().map(|&c| correction[c.0]).product();
                }
                SpnNode::Sum { children } => {
                    for slot in children.iter_mut() {
                        slot.1 *= correction[slot.0 .0];
                    }
                    let total: f64 = children.iter().map(|&(_, w)| w).sum();
                    if total <= 0.0 || !total.is_finite() {
                        return Err(SpnError::NonPositiveSumTotal(id));
                    }
                    for slot in children.iter_mut() {
                        slot.1 /= total;
                    }
                    correction[id] = total;
                }
            }
        }
        Ok(())
    }
}

/// Topological order (children first) over the entire node table; errors on
/// any cycle, reachable or not.
fn toposort_all(nodes: &[SpnNode]) -> Result<Vec<usize>, SpnError> {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; nodes.len()];
    let mut order = Vec::with_capacity(nodes.len());
    for start in 0..nodes.len() {
        if color[start] != WHITE {
            continue;
        }
        // Iterative DFS; the stack holds (node, next-child-index).
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = GRAY;
        while let Some(&mut (id, ref mut next)) = stack.last_mut() {
            match child_at(&nodes[id], *next) {
                Some(c) => {
                    *next += 1;
                    match color[c] {
                        WHITE => {
                            color[c] = GRAY;
                            stack.push((c, 0));
                        }
                        GRAY => return Err(SpnError::CycleDetected(c)),
                        _ => {}
                    }
                }
                None => {
                    color[id] = BLACK;
                    order.push(id);
                    stack.pop();
                }
            }
        }
    }
    Ok(order)
}

fn reachable_from(nodes: &[SpnNode], root: usize) -> Vec<bool> {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(id) = stack.pop() {
        let mut i = 0;
        while let Some(c) = child_at(&nodes[id], i) {
            i += 1;
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

fn child_at(node: &SpnNode, idx: usize) -> Option<usize> {
    match node {
        SpnNode::Indicator { .. } => None,
        SpnNode::Sum { children } => children.get(idx).map(|&(c, _)| c.0),
        SpnNode::Product { children } => children.get(idx).map(|&c| c.0),
    }
}

/// Compact bitset over variable indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct VarSet {
    words: Vec<u64>,
}

impl VarSet {
    pub fn empty(num_vars: usize) -> Self {
        VarSet { words: vec![0; num_vars.div_ceil(64)] }
    }

    pub fn singleton(num_vars: usize, var: usize) -> Self {
        let mut s = Self::empty(num_vars);
        s.insert(var);
        s
    }

    pub fn insert(&mut self, var: usize) {
        self.words[var / 64] |= 1 << (var % 64);
    }

    pub fn union_with(&mut self, other: &VarSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersects(&self, other: &VarSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| wi * 64 + b)
        })
    }
}
