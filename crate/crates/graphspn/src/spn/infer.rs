//! Exact inference passes, entirely in natural-log space.
//!
//! Zero probability is represented by `f64::NEG_INFINITY`. Sums use a
//! stable log-of-summed-exponentials; instance networks multiply hundreds of
//! sub-network values, which underflows in linear space.

use super::{NodeId, Spn, SpnError, SpnNode, VarId};

/// Evidence state of one variable.
#[derive(Debug, Clone, PartialEq)]
pub enum VarEvidence {
    /// Indicator of the value set to 1, siblings to 0.
    Observed(usize),
    /// Per-state non-negative multipliers scaling the indicators.
    Soft(Vec<f64>),
    /// All indicators set to 1.
    Marginalized,
}

/// Evidence for every variable of a network, indexed by variable id.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    entries: Vec<VarEvidence>,
}

impl Evidence {
    /// Evidence with every variable marginalized out.
    pub fn marginalized(num_vars: usize) -> Self {
        Evidence { entries: vec![VarEvidence::Marginalized; num_vars] }
    }

    pub fn from_entries(entries: Vec<VarEvidence>) -> Self {
        Evidence { entries }
    }

    /// Complete assignment, one observed value per variable.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        Evidence {
            entries: assignment.iter().map(|&v| VarEvidence::Observed(v)).collect(),
        }
    }

    pub fn set_observed(&mut self, var: VarId, value: usize) {
        self.entries[var.0] = VarEvidence::Observed(value);
    }

    pub fn set_soft(&mut self, var: VarId, multipliers: Vec<f64>) {
        self.entries[var.0] = VarEvidence::Soft(multipliers);
    }

    pub fn get(&self, var: VarId) -> &VarEvidence {
        &self.entries[var.0]
    }

    pub fn entries(&self) -> &[VarEvidence] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Result of MPE inference.
#[derive(Debug, Clone, PartialEq)]
pub struct MpeResult {
    /// One value per variable, observed variables kept.
    pub assignment: Vec<usize>,
    /// Root value of the max-circuit under the evidence.
    pub log_value: f64,
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

impl Spn {
    fn check_evidence(&self, evidence: &Evidence) -> Result<(), SpnError> {
        if evidence.len() != self.num_variables() {
            return Err(SpnError::EvidenceArityMismatch {
                got: evidence.len(),
                expected: self.num_variables(),
            });
        }
        for (var, entry) in evidence.entries().iter().enumerate() {
            match entry {
                VarEvidence::Observed(v) => {
                    if *v >= self.cardinality(VarId(var)) {
                        return Err(SpnError::IndicatorOutOfRange {
                            var,
                            value: *v,
                            cardinality: self.cardinality(VarId(var)),
                        });
                    }
                }
                VarEvidence::Soft(m) => {
                    if m.len() != self.cardinality(VarId(var)) {
                        return Err(SpnError::InvalidSoftEvidence {
                            var,
                            reason: format!(
                                "{} multipliers for cardinality {}",
                                m.len(),
                                self.cardinality(VarId(var))
                            ),
                        });
                    }
                    if m.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return Err(SpnError::InvalidSoftEvidence {
                            var,
                            reason: "multipliers must be finite and non-negative".into(),
                        });
                    }
                    if !m.iter().any(|&x| x > 0.0) {
                        return Err(SpnError::InvalidSoftEvidence {
                            var,
                            reason: "all multipliers are zero".into(),
                        });
                    }
                }
                VarEvidence::Marginalized => {}
            }
        }
        Ok(())
    }

    fn leaf_log_value(evidence: &Evidence, var: VarId, value: usize) -> f64 {
        match evidence.get(var) {
            VarEvidence::Observed(v) => {
                if *v == value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            VarEvidence::Soft(m) => m[value].ln(),
            VarEvidence::Marginalized => 0.0,
        }
    }

    /// Per-node log values of the sum circuit, bottom-up.
    fn upward_pass(&self, evidence: &Evidence) -> Vec<f64> {
        let mut values = vec![f64::NEG_INFINITY; self.num_nodes()];
        for &id in self.topo_order() {
            values[id.0] = match self.node(id).expect("topo node") {
                SpnNode::Indicator { var, value } => Self::leaf_log_value(evidence, *var, *value),
                SpnNode::Sum { children } => {
                    let mut max = f64::NEG_INFINITY;
                    for &(c, w) in children {
                        if w > 0.0 {
                            let t = w.ln() + values[c.0];
                            if t > max {
                                max = t;
                            }
                        }
                    }
                    if max == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        let mut acc = 0.0;
                        for &(c, w) in children {
                            if w > 0.0 {
                                acc += (w.ln() + values[c.0] - max).exp();
                            }
                        }
                        max + acc.ln()
                    }
                }
                SpnNode::Product { children } => {
                    children.iter().map(|&c| values[c.0]).sum()
                }
            };
        }
        values
    }

    /// Log value of the network under the evidence (single bottom-up pass).
    pub fn eval_log(&self, evidence: &Evidence) -> Result<f64, SpnError> {
        self.check_evidence(evidence)?;
        let values = self.upward_pass(evidence);
        Ok(values[self.root().0])
    }

    /// Fast path for a complete observed assignment.
    pub(crate) fn eval_log_assignment(&self, assignment: &[usize]) -> f64 {
        let evidence = Evidence::from_assignment(assignment);
        let values = self.upward_pass(&evidence);
        values[self.root().0]
    }

    /// Posterior distribution of every variable given the evidence.
    ///
    /// One upward pass, then one downward derivative pass; the posterior of
    /// variable `v` at value `k` is the root derivative with respect to the
    /// `(v, k)` indicator times its multiplier, renormalized per variable.
    pub fn marginals(&self, evidence: &Evidence) -> Result<Vec<Vec<f64>>, SpnError> {
        self.check_evidence(evidence)?;
        let values = self.upward_pass(evidence);
        let root_val = values[self.root().0];
        if root_val == f64::NEG_INFINITY {
            return Err(SpnError::ZeroLikelihood);
        }

        let mut grads = vec![f64::NEG_INFINITY; self.num_nodes()];
        grads[self.root().0] = 0.0;
        for &id in self.topo_order().iter().rev() {
            let g = grads[id.0];
            if g == f64::NEG_INFINITY {
                continue;
            }
            match self.node(id).expect("topo node") {
                SpnNode::Indicator { .. } => {}
                SpnNode::Sum { children } => {
                    for &(c, w) in children {
                        if w > 0.0 {
                            grads[c.0] = log_add_exp(grads[c.0], g + w.ln());
                        }
                    }
                }
                SpnNode::Product { children } => {
                    // Leave-one-out product of child values; track zeros so a
                    // single zero child still receives the gradient of the
                    // remaining finite product.
                    let mut zeros = 0usize;
                    let mut finite_sum = 0.0;
                    for &c in children {
                        let v = values[c.0];
                        if v == f64::NEG_INFINITY {
                            zeros += 1;
                        } else {
                            finite_sum += v;
                        }
                    }
                    for &c in children {
                        let v = values[c.0];
                        let contrib = if zeros == 0 {
                            g + finite_sum - v
                        } else if zeros == 1 && v == f64::NEG_INFINITY {
                            g + finite_sum
                        } else {
                            f64::NEG_INFINITY
                        };
                        if contrib > f64::NEG_INFINITY {
                            grads[c.0] = log_add_exp(grads[c.0], contrib);
                        }
                    }
                }
            }
        }

        // Accumulate indicator gradients per (variable, value).
        let mut acc: Vec<Vec<f64>> = self
            .variables()
            .iter()
            .map(|v| vec![f64::NEG_INFINITY; v.cardinality])
            .collect();
        for (id, node) in self.nodes().iter().enumerate() {
            if let SpnNode::Indicator { var, value } = node {
                acc[var.0][*value] = log_add_exp(acc[var.0][*value], grads[id]);
            }
        }

        let mut out = Vec::with_capacity(self.num_variables());
        for (var, grad_row) in acc.into_iter().enumerate() {
            let card = self.cardinality(VarId(var));
            let mut log_post: Vec<f64> = (0..card)
                .map(|k| {
                    let mult = Self::leaf_log_value(evidence, VarId(var), k);
                    grad_row[k] + mult
                })
                .collect();
            let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                // Variable absent from the network: posterior follows the
                // evidence alone.
                log_post = (0..card)
                    .map(|k| Self::leaf_log_value(evidence, VarId(var), k))
                    .collect();
            }
            let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut row: Vec<f64> = log_post.iter().map(|&l| (l - max).exp()).collect();
            let total: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= total;
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Per-node values of the max circuit (sums replaced by weighted max).
    pub(crate) fn max_pass(&self, evidence: &Evidence, values: &mut Vec<f64>) {
        values.clear();
        values.resize(self.num_nodes(), f64::NEG_INFINITY);
        for &id in self.topo_order() {
            values[id.0] = match self.node(id).expect("topo node") {
                SpnNode::Indicator { var, value } => Self::leaf_log_value(evidence, *var, *value),
                SpnNode::Sum { children } => {
                    let mut best = f64::NEG_INFINITY;
                    for &(c, w) in children {
                        if w > 0.0 {
                            let t = w.ln() + values[c.0];
                            if t > best {
                                best = t;
                            }
                        }
                    }
                    best
                }
                SpnNode::Product { children } => {
                    children.iter().map(|&c| values[c.0]).sum()
                }
            };
        }
    }

    /// Most probable explanation: upward max pass, then a downward traversal
    /// selecting the maximizing child of every sum (ties broken towards the
    /// lowest child position) and all children of products.
    pub fn mpe(&self, evidence: &Evidence) -> Result<MpeResult, SpnError> {
        self.check_evidence(evidence)?;
        let mut values = Vec::new();
        self.max_pass(evidence, &mut values);
        let log_value = values[self.root().0];
        if log_value == f64::NEG_INFINITY {
            return Err(SpnError::ZeroLikelihood);
        }

        let mut assignment: Vec<Option<usize>> = vec![None; self.num_variables()];
        let mut visited = vec![false; self.num_nodes()];
        let mut stack = vec![self.root()];
        visited[self.root().0] = true;
        while let Some(id) = stack.pop() {
            match self.node(id).expect("selected node") {
                SpnNode::Indicator { var, value } => {
                    debug_assert!(
                        assignment[var.0].is_none() || assignment[var.0] == Some(*value),
                        "conflicting indicator selection for variable {}",
                        var.0
                    );
                    assignment[var.0] = Some(*value);
                }
                SpnNode::Sum { children } => {
                    let mut best: Option<(NodeId, f64)> = None;
                    for &(c, w) in children {
                        if w <= 0.0 {
                            continue;
                        }
                        let t = w.ln() + values[c.0];
                        if best.map_or(true, |(_, b)| t > b) {
                            best = Some((c, t));
                        }
                    }
                    let (c, _) = best.expect("max value is finite");
                    if !visited[c.0] {
                        visited[c.0] = true;
                        stack.push(c);
                    }
                }
                SpnNode::Product { children } => {
                    for &c in children {
                        if !visited[c.0] {
                            visited[c.0] = true;
                            stack.push(c);
                        }
                    }
                }
            }
        }

        // Variables outside the selected sub-circuit fall back to the
        // evidence: the observed value, the best multiplier, or state 0.
        let assignment = assignment
            .into_iter()
            .enumerate()
            .map(|(var, slot)| {
                slot.unwrap_or_else(|| match evidence.get(VarId(var)) {
                    VarEvidence::Observed(v) => *v,
                    VarEvidence::Soft(m) => {
                        let mut best = 0;
                        for (k, &x) in m.iter().enumerate() {
                            if x > m[best] {
                                best = k;
                            }
                        }
                        best
                    }
                    VarEvidence::Marginalized => 0,
                })
            })
            .collect();
        Ok(MpeResult { assignment, log_value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spn::CategoricalVariable;

    fn two_state_mixture() -> Spn {
        // P(X0=0)=0.3, P(X0=1)=0.7
        let vars = vec![CategoricalVariable { id: VarId(0), cardinality: 2 }];
        let nodes = vec![
            SpnNode::Indicator { var: VarId(0), value: 0 },
            SpnNode::Indicator { var: VarId(0), value: 1 },
            SpnNode::Sum { children: vec![(NodeId(0), 0.3), (NodeId(1), 0.7)] },
        ];
        Spn::new(vars, nodes, NodeId(2)).unwrap()
    }

    #[test]
    fn marginalized_normalized_network_evaluates_to_log_one() {
        let spn = two_state_mixture();
        let v = spn.eval_log(&Evidence::marginalized(1)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn observed_assignment_reads_off_the_weight() {
        let spn = two_state_mixture();
        let mut ev = Evidence::marginalized(1);
        ev.set_observed(VarId(0), 1);
        assert!((spn.eval_log(&ev).unwrap() - 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn soft_evidence_scales_states() {
        let spn = two_state_mixture();
        let mut ev = Evidence::marginalized(1);
        ev.set_soft(VarId(0), vec![0.5, 2.0]);
        // 0.3*0.5 + 0.7*2.0
        assert!((spn.eval_log(&ev).unwrap() - (0.15f64 + 1.4).ln()).abs() < 1e-12);
    }

    #[test]
    fn evidence_arity_mismatch_is_an_error() {
        let spn = two_state_mixture();
        assert!(matches!(
            spn.eval_log(&Evidence::marginalized(3)),
            Err(SpnError::EvidenceArityMismatch { got: 3, expected: 1 })
        ));
    }

    #[test]
    fn all_zero_soft_evidence_rejected() {
        let spn = two_state_mixture();
        let mut ev = Evidence::marginalized(1);
        ev.set_soft(VarId(0), vec![0.0, 0.0]);
        assert!(matches!(
            spn.eval_log(&ev),
            Err(SpnError::InvalidSoftEvidence { .. })
        ));
    }

    #[test]
    fn observed_variable_posterior_is_one_hot() {
        let spn = two_state_mixture();
        let mut ev = Evidence::marginalized(1);
        ev.set_observed(VarId(0), 0);
        let m = spn.marginals(&ev).unwrap();
        assert_eq!(m[0], vec![1.0, 0.0]);
    }

    #[test]
    fn marginalized_posterior_matches_weights() {
        let spn = two_state_mixture();
        let m = spn.marginals(&Evidence::marginalized(1)).unwrap();
        assert!((m[0][0] - 0.3).abs() < 1e-12);
        assert!((m[0][1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn zero_likelihood_evidence_errors() {
        // Indicator for state 1 missing entirely.
        let vars = vec![CategoricalVariable { id: VarId(0), cardinality: 2 }];
        let nodes = vec![
            SpnNode::Indicator { var: VarId(0), value: 0 },
            SpnNode::Sum { children: vec![(NodeId(0), 1.0)] },
        ];
        let spn = Spn::new(vars, nodes, NodeId(1)).unwrap();
        let mut ev = Evidence::marginalized(1);
        ev.set_observed(VarId(0), 1);
        assert!(matches!(spn.marginals(&ev), Err(SpnError::ZeroLikelihood)));
        assert!(matches!(spn.mpe(&ev), Err(SpnError::ZeroLikelihood)));
    }

    #[test]
    fn mpe_keeps_observed_assignment() {
        let spn = two_state_mixture();
        let mut ev = Evidence::marginalized(1);
        ev.set_observed(VarId(0), 0);
        let r = spn.mpe(&ev).unwrap();
        assert_eq!(r.assignment, vec![0]);
    }

    #[test]
    fn mpe_is_deterministic() {
        let spn = super::super::tests::naive_bayes_mixture();
        let ev = Evidence::marginalized(2);
        let a = spn.mpe(&ev).unwrap();
        let b = spn.mpe(&ev).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_add_exp_handles_negative_infinity() {
        assert_eq!(
            log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.5), 1.5);
        let v = log_add_exp(1000.0, 1000.0);
        assert!((v - (1000.0 + 2.0f64.ln())).abs() < 1e-9);
    }
}
