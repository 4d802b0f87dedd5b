//! Structure generation and parameter learning for template networks.
//!
//! Structures are generated densely by recursively splitting the variable
//! set: every sub-scope gets a few random decompositions into subsets,
//! products combine the subsets of each decomposition, and sums mix all
//! products of a sub-scope. Parameters are then fit with hard EM: each
//! sample is routed down the max circuit, the winning child of every sum on
//! the selected sub-tree is counted, and weights are renormalized from the
//! (smoothed) counts. Near-zero weights can finally be pruned.

use crate::spn::{CategoricalVariable, Evidence, NodeId, Spn, SpnError, SpnNode, VarId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("cannot generate a structure over an empty variable set")]
    EmptyVariables,
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("sample {index} has {got} values but the network has {expected} variables")]
    SampleArityMismatch { index: usize, got: usize, expected: usize },
    #[error("sample {index}: value {value} out of range for variable {var}")]
    SampleValueOutOfRange { index: usize, var: usize, value: usize },
    #[error(transparent)]
    Spn(#[from] SpnError),
}

/// Knobs of the dense structure generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureParams {
    pub num_decompositions_per_scope: usize,
    pub num_subsets_per_decomposition: usize,
    pub num_sums_per_subscope: usize,
    pub rng_seed: u64,
}

impl Default for StructureParams {
    fn default() -> Self {
        StructureParams {
            num_decompositions_per_scope: 2,
            num_subsets_per_decomposition: 2,
            num_sums_per_subscope: 4,
            rng_seed: 0,
        }
    }
}

/// Hard-EM training configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub rel_loglik_tolerance: f64,
    pub count_smoothing: f64,
    pub prune_epsilon: f64,
    /// Independent hard-EM runs; the run with the best final training
    /// log-likelihood wins. Hard EM's tie-breaking makes its fixed point
    /// init-dependent, and restarts are the standard escape.
    pub restarts: usize,
    /// Seed for breaking exact ties among sum children during the E-step.
    /// Structures start with uniform weights, so first-epoch ties are the
    /// norm rather than the exception.
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 50,
            rel_loglik_tolerance: 1e-4,
            count_smoothing: 0.1,
            prune_epsilon: 1e-4,
            restarts: 1,
            rng_seed: 0,
        }
    }
}

/// Per-epoch log-likelihood trace returned by [`train`].
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub loglik_trace: Vec<f64>,
}

struct Generator<'a> {
    vars: &'a [CategoricalVariable],
    params: &'a StructureParams,
    rng: ChaCha8Rng,
    nodes: Vec<SpnNode>,
    indicators: HashMap<(usize, usize), NodeId>,
    regions: HashMap<Vec<usize>, Vec<NodeId>>,
}

impl<'a> Generator<'a> {
    fn indicator(&mut self, var: usize, value: usize) -> NodeId {
        if let Some(&id) = self.indicators.get(&(var, value)) {
            return id;
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(SpnNode::Indicator { var: VarId(var), value });
        self.indicators.insert((var, value), id);
        id
    }

    fn push_sum(&mut self, children: Vec<NodeId>) -> NodeId {
        let w = 1.0 / children.len() as f64;
        let id = NodeId(self.nodes.len());
        self.nodes.push(SpnNode::Sum {
            children: children.into_iter().map(|c| (c, w)).collect(),
        });
        id
    }

    fn push_product(&mut self, children: Vec<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(SpnNode::Product { children });
        id
    }

    /// Samples up to `num_decompositions_per_scope` distinct partitions of
    /// the scope into non-empty subsets.
    fn sample_partitions(&mut self, scope: &[usize]) -> Vec<Vec<Vec<usize>>> {
        let k = self.params.num_subsets_per_decomposition.min(scope.len());
        let wanted = self.params.num_decompositions_per_scope;
        let mut seen: Vec<Vec<Vec<usize>>> = Vec::new();
        for _ in 0..wanted * 10 {
            if seen.len() == wanted {
                break;
            }
            let mut shuffled = scope.to_vec();
            shuffled.shuffle(&mut self.rng);
            let base = scope.len() / k;
            let extra = scope.len() % k;
            let mut parts = Vec::with_capacity(k);
            let mut at = 0;
            for i in 0..k {
                let take = base + usize::from(i < extra);
                let mut part: Vec<usize> = shuffled[at..at + take].to_vec();
                part.sort_unstable();
                parts.push(part);
                at += take;
            }
            parts.sort();
            if !seen.contains(&parts) {
                seen.push(parts);
            }
        }
        seen
    }

    /// Exposed mixing nodes of the region covering `scope` (sorted).
    fn region(&mut self, scope: &[usize], is_root: bool) -> Vec<NodeId> {
        if !is_root {
            if let Some(nodes) = self.regions.get(scope) {
                return nodes.clone();
            }
        }
        let count = if is_root { 1 } else { self.params.num_sums_per_subscope };
        let exposed = if scope.len() == 1 {
            let var = scope[0];
            let leaves: Vec<NodeId> = (0..self.vars[var].cardinality)
                .map(|v| self.indicator(var, v))
                .collect();
            (0..count).map(|_| self.push_sum(leaves.clone())).collect::<Vec<_>>()
        } else {
            let partitions = self.sample_partitions(scope);
            let mut products = Vec::new();
            for parts in partitions {
                let part_nodes: Vec<Vec<NodeId>> =
                    parts.iter().map(|p| self.region(p, false)).collect();
                // Cartesian combinations: one exposed node per subset.
                let mut odometer = vec![0usize; part_nodes.len()];
                'combos: loop {
                    let children: Vec<NodeId> = part_nodes
                        .iter()
                        .zip(&odometer)
                        .map(|(nodes, &i)| nodes[i])
                        .collect();
                    products.push(self.push_product(children));
                    for pos in (0..part_nodes.len()).rev() {
                        odometer[pos] += 1;
                        if odometer[pos] < part_nodes[pos].len() {
                            continue 'combos;
                        }
                        odometer[pos] = 0;
                    }
                    break;
                }
            }
            (0..count).map(|_| self.push_sum(products.clone())).collect::<Vec<_>>()
        };
        if !is_root {
            self.regions.insert(scope.to_vec(), exposed.clone());
        }
        exposed
    }
}

/// Generates a complete, decomposable network over the variables with all
/// sum weights uniform. Deterministic per seed.
pub fn generate_dense_structure(
    variables: &[CategoricalVariable],
    params: &StructureParams,
) -> Result<Spn, LearnError> {
    if variables.is_empty() {
        return Err(LearnError::EmptyVariables);
    }
    let mut gen = Generator {
        vars: variables,
        params,
        rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
        nodes: Vec::new(),
        indicators: HashMap::new(),
        regions: HashMap::new(),
    };
    let scope: Vec<usize> = (0..variables.len()).collect();
    let roots = gen.region(&scope, true);
    debug_assert_eq!(roots.len(), 1);
    Ok(Spn::new(variables.to_vec(), gen.nodes, roots[0])?)
}

fn check_dataset(spn: &Spn, data: &[Vec<usize>]) -> Result<(), LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    for (index, sample) in data.iter().enumerate() {
        if sample.len() != spn.num_variables() {
            return Err(LearnError::SampleArityMismatch {
                index,
                got: sample.len(),
                expected: spn.num_variables(),
            });
        }
        for (var, &value) in sample.iter().enumerate() {
            if value >= spn.cardinality(VarId(var)) {
                return Err(LearnError::SampleValueOutOfRange { index, var, value });
            }
        }
    }
    Ok(())
}

/// One full-batch hard-EM epoch.
///
/// Routes every sample down the max circuit, counts the winning child of
/// each sum on the selected sub-tree (exact ties broken uniformly at random
/// from `rng`), then replaces each sum's weights with
/// `(count + smoothing) / sum(count + smoothing)`. Returns the total
/// log-likelihood of the dataset under the pre-update weights.
pub fn hard_em_epoch(
    spn: &mut Spn,
    data: &[Vec<usize>],
    smoothing: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, LearnError> {
    check_dataset(spn, data)?;

    let mut counts: Vec<Vec<f64>> = spn
        .nodes()
        .iter()
        .map(|n| match n {
            SpnNode::Sum { children } => vec![0.0; children.len()],
            _ => Vec::new(),
        })
        .collect();

    let mut loglik = 0.0;
    let mut values = Vec::new();
    let mut stack: Vec<NodeId> = Vec::new();
    let mut stamp = vec![0u32; spn.num_nodes()];
    for (sample_idx, sample) in data.iter().enumerate() {
        loglik += spn.eval_log_assignment(sample);

        let evidence = Evidence::from_assignment(sample);
        spn.max_pass(&evidence, &mut values);
        let mark = sample_idx as u32 + 1;
        stack.clear();
        stack.push(spn.root());
        stamp[spn.root().0] = mark;
        while let Some(id) = stack.pop() {
            match spn.node(id)? {
                SpnNode::Indicator { .. } => {}
                SpnNode::Product { children } => {
                    for &c in children {
                        if stamp[c.0] != mark {
                            stamp[c.0] = mark;
                            stack.push(c);
                        }
                    }
                }
                SpnNode::Sum { children } => {
                    let mut best = f64::NEG_INFINITY;
                    for &(c, w) in children {
                        if w > 0.0 {
                            best = best.max(w.ln() + values[c.0]);
                        }
                    }
                    let ties = children
                        .iter()
                        .filter(|&&(c, w)| w > 0.0 && w.ln() + values[c.0] == best)
                        .count();
                    let pick = if ties > 1 { rng.gen_range(0..ties) } else { 0 };
                    let mut seen = 0usize;
                    for (pos, &(c, w)) in children.iter().enumerate() {
                        if w > 0.0 && w.ln() + values[c.0] == best {
                            if seen == pick {
                                counts[id.0][pos] += 1.0;
                                if stamp[c.0] != mark {
                                    stamp[c.0] = mark;
                                    stack.push(c);
                                }
                                break;
                            }
                            seen += 1;
                        }
                    }
                }
            }
        }
    }

    for (id, count_row) in counts.iter().enumerate() {
        if count_row.is_empty() {
            continue;
        }
        let total: f64 = count_row.iter().map(|c| c + smoothing).sum();
        if total <= 0.0 {
            // Sum untouched by every sample and no smoothing: keep weights.
            continue;
        }
        let weights: Vec<f64> = count_row.iter().map(|c| (c + smoothing) / total).collect();
        spn.set_sum_weights(NodeId(id), &weights)?;
    }
    Ok(loglik)
}

/// Epoch loop around [`hard_em_epoch`], stopping at `max_epochs` or when the
/// relative log-likelihood change falls below the tolerance. With
/// `restarts > 1` the loop runs from scratch per restart (fresh tie-break
/// stream) and the model with the best final training log-likelihood wins.
pub fn train(
    spn: Spn,
    data: &[Vec<usize>],
    config: &TrainConfig,
) -> Result<(Spn, TrainReport), LearnError> {
    let mut best: Option<(f64, Spn, TrainReport)> = None;
    for restart in 0..config.restarts.max(1) {
        let mut candidate = spn.clone();
        candidate.normalize_weights()?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(crate::seed::derive(config.rng_seed, &[restart as u64]));
        let mut trace = Vec::new();
        for epoch in 0..config.max_epochs {
            let ll = hard_em_epoch(&mut candidate, data, config.count_smoothing, &mut rng)?;
            trace.push(ll);
            if epoch > 0 {
                let prev = trace[epoch - 1];
                let rel = (ll - prev).abs() / prev.abs().max(1e-12);
                if rel < config.rel_loglik_tolerance {
                    break;
                }
            }
        }
        let final_ll: f64 = data.iter().map(|s| candidate.eval_log_assignment(s)).sum();
        let report = TrainReport { epochs_run: trace.len(), loglik_trace: trace };
        if best.as_ref().map_or(true, |(b, _, _)| final_ll > *b) {
            best = Some((final_ll, candidate, report));
        }
    }
    let (_, spn, report) = best.expect("at least one restart");
    Ok((spn, report))
}

/// Removes sum edges with weight below `epsilon`, drops nodes that become
/// unreachable, and renormalizes. A sum whose weights all fall below the
/// threshold keeps its single largest edge.
pub fn prune(spn: &Spn, epsilon: f64) -> Result<Spn, LearnError> {
    let mut kept: Vec<SpnNode> = Vec::with_capacity(spn.num_nodes());
    for node in spn.nodes() {
        kept.push(match node {
            SpnNode::Sum { children } => {
                let survivors: Vec<(NodeId, f64)> = children
                    .iter()
                    .copied()
                    .filter(|&(_, w)| w >= epsilon)
                    .collect();
                if survivors.is_empty() {
                    let &best = children
                        .iter()
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .expect("sums have children");
                    SpnNode::Sum { children: vec![best] }
                } else {
                    SpnNode::Sum { children: survivors }
                }
            }
            other => other.clone(),
        });
    }

    // Reachability over the pruned edges.
    let mut seen = vec![false; kept.len()];
    let mut stack = vec![spn.root().0];
    seen[spn.root().0] = true;
    while let Some(id) = stack.pop() {
        let mut visit = |c: usize, stack: &mut Vec<usize>| {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        };
        match &kept[id] {
            SpnNode::Indicator { .. } => {}
            SpnNode::Sum { children } => {
                for &(c, _) in children {
                    visit(c.0, &mut stack);
                }
            }
            SpnNode::Product { children } => {
                for &c in children {
                    visit(c.0, &mut stack);
                }
            }
        }
    }

    let mut remap = vec![usize::MAX; kept.len()];
    let mut nodes = Vec::new();
    for (old, node) in kept.into_iter().enumerate() {
        if !seen[old] {
            continue;
        }
        remap[old] = nodes.len();
        nodes.push(node);
    }
    for node in nodes.iter_mut() {
        match node {
            SpnNode::Indicator { .. } => {}
            SpnNode::Sum { children } => {
                for slot in children.iter_mut() {
                    slot.0 = NodeId(remap[slot.0 .0]);
                }
            }
            SpnNode::Product { children } => {
                for c in children.iter_mut() {
                    *c = NodeId(remap[c.0]);
                }
            }
        }
    }
    let mut pruned = Spn::new(
        spn.variables().to_vec(),
        nodes,
        NodeId(remap[spn.root().0]),
    )?;
    pruned.normalize_weights()?;
    Ok(pruned)
}

/// Writes a `(epoch, loglik)` CSV of a training trace.
pub fn write_loglik_trace_csv<W: Write>(mut w: W, trace: &[f64]) -> std::io::Result<()> {
    writeln!(w, "epoch,loglik")?;
    for (epoch, ll) in trace.iter().enumerate() {
        writeln!(w, "{},{}", epoch, ll)?;
    }
    Ok(())
}
