//! Template networks and their instantiation over a specific graph.
//!
//! One template SPN is trained per sub-graph template, from the label tuples
//! of matching components extracted across repeated decompositions of the
//! training graphs (augmented over template automorphisms, so the learned
//! distributions are approximately orientation-invariant). A graph instance
//! is then a mixture: the root sums over one product per decomposition, and
//! each product combines template SPNs bound to that decomposition's
//! components.
//!
//! An [`InstanceSpn`] stores only the bindings; inference takes the model by
//! reference, so template weights stay shared — updating a template weight
//! is immediately visible to every instantiation. [`InstanceSpn::to_spn`]
//! flattens the instance into a standalone network for validation and
//! cross-checking.

use crate::data::{GraphError, PlaceCategory, TopoGraph, NUM_CATEGORIES};
use crate::learn::{
    generate_dense_structure, prune, train, LearnError, StructureParams, TrainConfig,
};
use crate::spn::{
    log_add_exp, CategoricalVariable, Evidence, MpeResult, NodeId, Spn, SpnError, SpnNode,
    VarEvidence, VarId,
};
use crate::templates::{
    multi_decompose, Component, Decomposition, DecomposeError, SubGraphTemplate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("node {0} is missing a groundtruth label")]
    MissingGroundtruth(usize),
    #[error("no template network for template {0}")]
    UnknownTemplate(String),
    #[error("graph does not match the instance: {0}")]
    GraphMismatch(String),
    #[error("node {node}: evidence over {got} categories, model has {expected}")]
    EvidenceCardinality { node: usize, got: usize, expected: usize },
    #[error("node {0} has no label in the assignment")]
    UnlabeledNode(usize),
    #[error("label {label} out of range for node {node}")]
    LabelOutOfRange { node: usize, label: usize },
    #[error("invalid root weights: {0}")]
    BadRootWeights(String),
    #[error("evidence has zero likelihood under every decomposition")]
    ZeroLikelihood,
    #[error("malformed model bundle: {0}")]
    Format(String),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Spn(#[from] SpnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained network over one template's slot variables.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSpn {
    pub template_id: String,
    pub spn: Spn,
}

/// The full template model: one network per sub-graph template.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpnModel {
    num_categories: usize,
    templates: Vec<SubGraphTemplate>,
    template_spns: BTreeMap<String, TemplateSpn>,
}

/// Uniform joint over `n` slot variables of the given cardinality.
fn uniform_template_spn(n: usize, cardinality: usize) -> Spn {
    let variables: Vec<CategoricalVariable> = (0..n)
        .map(|i| CategoricalVariable { id: VarId(i), cardinality })
        .collect();
    let mut nodes = Vec::new();
    let mut sums = Vec::new();
    for var in 0..n {
        let first = nodes.len();
        for value in 0..cardinality {
            nodes.push(SpnNode::Indicator { var: VarId(var), value });
        }
        let children = (0..cardinality)
            .map(|v| (NodeId(first + v), 1.0 / cardinality as f64))
            .collect();
        nodes.push(SpnNode::Sum { children });
        sums.push(NodeId(nodes.len() - 1));
    }
    let root = if n == 1 {
        sums[0]
    } else {
        nodes.push(SpnNode::Product { children: sums });
        NodeId(nodes.len() - 1)
    };
    Spn::new(variables, nodes, root).expect("uniform template network is well-formed")
}

impl GraphSpnModel {
    /// Assembles a model from pre-built template networks.
    pub fn from_parts(
        templates: Vec<SubGraphTemplate>,
        template_spns: BTreeMap<String, TemplateSpn>,
        num_categories: usize,
    ) -> Result<Self, ModelError> {
        for t in &templates {
            let tspn = template_spns
                .get(&t.id)
                .ok_or_else(|| ModelError::UnknownTemplate(t.id.clone()))?;
            if tspn.spn.num_variables() != t.node_count {
                return Err(ModelError::Format(format!(
                    "template {}: network over {} variables, template has {} nodes",
                    t.id,
                    tspn.spn.num_variables(),
                    t.node_count
                )));
            }
        }
        Ok(GraphSpnModel { num_categories, templates, template_spns })
    }

    /// All templates backed by uniform networks.
    pub fn uniform(templates: Vec<SubGraphTemplate>, num_categories: usize) -> Self {
        let template_spns = templates
            .iter()
            .map(|t| {
                (
                    t.id.clone(),
                    TemplateSpn {
                        template_id: t.id.clone(),
                        spn: uniform_template_spn(t.node_count, num_categories),
                    },
                )
            })
            .collect();
        GraphSpnModel { num_categories, templates, template_spns }
    }

    /// Dense generated structures with uniform initial weights, no training.
    pub fn untrained(
        templates: Vec<SubGraphTemplate>,
        num_categories: usize,
        structure: &StructureParams,
    ) -> Result<Self, ModelError> {
        let mut template_spns = BTreeMap::new();
        for (idx, t) in templates.iter().enumerate() {
            let spn = if t.node_count == 1 {
                uniform_template_spn(1, num_categories)
            } else {
                let vars: Vec<CategoricalVariable> = (0..t.node_count)
                    .map(|i| CategoricalVariable { id: VarId(i), cardinality: num_categories })
                    .collect();
                let params = StructureParams {
                    rng_seed: crate::seed::derive(structure.rng_seed, &[idx as u64]),
                    ..structure.clone()
                };
                generate_dense_structure(&vars, &params)?
            };
            template_spns.insert(t.id.clone(), TemplateSpn { template_id: t.id.clone(), spn });
        }
        GraphSpnModel::from_parts(templates, template_spns, num_categories)
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn templates(&self) -> &[SubGraphTemplate] {
        &self.templates
    }

    pub fn template_spn(&self, id: &str) -> Option<&TemplateSpn> {
        self.template_spns.get(id)
    }

    pub fn template_spn_mut(&mut self, id: &str) -> Option<&mut TemplateSpn> {
        self.template_spns.get_mut(id)
    }
}

/// Label tuples per template, in slot order, augmented over template
/// automorphisms. Single-node templates are skipped (their model stays
/// uniform and needs no data).
pub fn extract_training_components(
    graphs: &[TopoGraph],
    templates: &[SubGraphTemplate],
    repetitions: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<String, Vec<Vec<usize>>>, ModelError> {
    let mut tuples: BTreeMap<String, Vec<Vec<usize>>> = templates
        .iter()
        .filter(|t| t.node_count >= 2)
        .map(|t| (t.id.clone(), Vec::new()))
        .collect();
    let autos: HashMap<String, Vec<Vec<usize>>> = templates
        .iter()
        .map(|t| (t.id.clone(), t.automorphisms()))
        .collect();

    for graph in graphs {
        for node in graph.nodes() {
            if node.groundtruth.is_none() {
                return Err(ModelError::MissingGroundtruth(node.id));
            }
        }
        let decompositions = multi_decompose(graph, templates, repetitions, rng)?;
        for decomposition in decompositions {
            for component in decomposition.components {
                let Some(bucket) = tuples.get_mut(&component.template_id) else {
                    continue;
                };
                let labels: Vec<usize> = component
                    .node_ids
                    .iter()
                    .map(|&id| {
                        graph.node(id).expect("component node").groundtruth.unwrap().index()
                    })
                    .collect();
                for perm in &autos[&component.template_id] {
                    bucket.push(perm.iter().map(|&s| labels[s]).collect());
                }
            }
        }
    }
    Ok(tuples)
}

/// Trains one template network per template from the training graphs.
///
/// Templates with at least two nodes get a generated dense structure fit
/// with hard EM on their component tuples and then pruned; the single-node
/// template (and any template that matched no component) stays uniform.
pub fn train_templates(
    graphs: &[TopoGraph],
    templates: &[SubGraphTemplate],
    structure: &StructureParams,
    config: &TrainConfig,
    repetitions: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GraphSpnModel, ModelError> {
    let tuples = extract_training_components(graphs, templates, repetitions, rng)?;
    let mut template_spns = BTreeMap::new();
    for template in templates {
        let spn = if template.node_count == 1 {
            uniform_template_spn(1, NUM_CATEGORIES)
        } else {
            let data = &tuples[&template.id];
            if data.is_empty() {
                log::warn!(
                    "template {} matched no training component; keeping it uniform",
                    template.id
                );
                uniform_template_spn(template.node_count, NUM_CATEGORIES)
            } else {
                let vars: Vec<CategoricalVariable> = (0..template.node_count)
                    .map(|i| CategoricalVariable { id: VarId(i), cardinality: NUM_CATEGORIES })
                    .collect();
                let params = StructureParams { rng_seed: rng.gen(), ..structure.clone() };
                let dense = generate_dense_structure(&vars, &params)?;
                let em = TrainConfig { rng_seed: rng.gen(), ..config.clone() };
                let (trained, _) = train(dense, data, &em)?;
                prune(&trained, em.prune_epsilon)?
            }
        };
        template_spns.insert(
            template.id.clone(),
            TemplateSpn { template_id: template.id.clone(), spn },
        );
    }
    GraphSpnModel::from_parts(templates.to_vec(), template_spns, NUM_CATEGORIES)
}

/// Root mixture weights over the decompositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RootWeights {
    Uniform,
    Explicit(Vec<f64>),
}

/// Instantiation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InstantiationConfig {
    pub num_decompositions: usize,
    pub rng_seed: u64,
    pub root_weights: RootWeights,
}

impl Default for InstantiationConfig {
    fn default() -> Self {
        InstantiationConfig {
            num_decompositions: 5,
            rng_seed: 0,
            root_weights: RootWeights::Uniform,
        }
    }
}

/// A model instantiated for one graph: the decomposition bindings plus root
/// mixture weights. Template parameters stay in the model and are shared by
/// all instances.
#[derive(Debug, Clone)]
pub struct InstanceSpn {
    node_ids: Vec<usize>,
    var_of: HashMap<usize, usize>,
    decompositions: Vec<Decomposition>,
    root_log_weights: Vec<f64>,
}

impl GraphSpnModel {
    /// Decomposes the graph `num_decompositions` times and assembles the
    /// mixture instance.
    pub fn instantiate(
        &self,
        graph: &TopoGraph,
        config: &InstantiationConfig,
    ) -> Result<InstanceSpn, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let decompositions =
            multi_decompose(graph, &self.templates, config.num_decompositions, &mut rng)?;
        for decomposition in &decompositions {
            for component in &decomposition.components {
                if !self.template_spns.contains_key(&component.template_id) {
                    return Err(ModelError::UnknownTemplate(component.template_id.clone()));
                }
            }
        }
        let node_ids = graph.node_ids();
        let var_of = node_ids.iter().enumerate().map(|(v, &id)| (id, v)).collect();
        let n = decompositions.len();
        let root_log_weights = match &config.root_weights {
            RootWeights::Uniform => vec![-(n as f64).ln(); n],
            RootWeights::Explicit(w) => {
                if w.len() != n {
                    return Err(ModelError::BadRootWeights(format!(
                        "{} weights for {} decompositions",
                        w.len(),
                        n
                    )));
                }
                if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                    return Err(ModelError::BadRootWeights(
                        "weights must be finite and positive".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                w.iter().map(|x| (x / total).ln()).collect()
            }
        };
        Ok(InstanceSpn { node_ids, var_of, decompositions, root_log_weights })
    }
}

impl InstanceSpn {
    /// Graph node ids in variable order: variable `i` is `node_ids()[i]`.
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn decompositions(&self) -> &[Decomposition] {
        &self.decompositions
    }

    pub fn var_of(&self, node_id: usize) -> Option<usize> {
        self.var_of.get(&node_id).copied()
    }

    fn template_spn<'m>(
        &self,
        model: &'m GraphSpnModel,
        component: &Component,
    ) -> Result<&'m TemplateSpn, ModelError> {
        model
            .template_spn(&component.template_id)
            .ok_or_else(|| ModelError::UnknownTemplate(component.template_id.clone()))
    }

    fn component_evidence(&self, evidence: &Evidence, component: &Component) -> Evidence {
        Evidence::from_entries(
            component
                .node_ids
                .iter()
                .map(|id| evidence.get(VarId(self.var_of[id])).clone())
                .collect(),
        )
    }

    fn check_evidence(&self, model: &GraphSpnModel, evidence: &Evidence) -> Result<(), ModelError> {
        if evidence.len() != self.node_ids.len() {
            return Err(ModelError::GraphMismatch(format!(
                "evidence over {} variables, instance has {} nodes",
                evidence.len(),
                self.node_ids.len()
            )));
        }
        for (var, entry) in evidence.entries().iter().enumerate() {
            if let VarEvidence::Soft(m) = entry {
                if m.len() != model.num_categories {
                    return Err(ModelError::EvidenceCardinality {
                        node: self.node_ids[var],
                        got: m.len(),
                        expected: model.num_categories,
                    });
                }
            }
        }
        Ok(())
    }

    /// Log value of the mixture: log sum over decompositions of the weighted
    /// product of component values.
    pub fn eval_log(&self, model: &GraphSpnModel, evidence: &Evidence) -> Result<f64, ModelError> {
        self.check_evidence(model, evidence)?;
        let mut total = f64::NEG_INFINITY;
        for (d, decomposition) in self.decompositions.iter().enumerate() {
            let mut log_term = self.root_log_weights[d];
            for component in &decomposition.components {
                let tspn = self.template_spn(model, component)?;
                log_term += tspn.spn.eval_log(&self.component_evidence(evidence, component))?;
            }
            total = log_add_exp(total, log_term);
        }
        Ok(total)
    }

    /// Per-node posterior over the categories.
    ///
    /// Each decomposition contributes its component posteriors weighted by
    /// the decomposition's posterior mass given the evidence.
    pub fn marginals(
        &self,
        model: &GraphSpnModel,
        evidence: &Evidence,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_evidence(model, evidence)?;
        let d_count = self.decompositions.len();
        let mut log_mix = vec![f64::NEG_INFINITY; d_count];
        for (d, decomposition) in self.decompositions.iter().enumerate() {
            let mut log_term = self.root_log_weights[d];
            for component in &decomposition.components {
                let tspn = self.template_spn(model, component)?;
                log_term += tspn.spn.eval_log(&self.component_evidence(evidence, component))?;
            }
            log_mix[d] = log_term;
        }
        let log_z = log_mix.iter().copied().fold(f64::NEG_INFINITY, log_add_exp);
        if log_z == f64::NEG_INFINITY {
            return Err(ModelError::ZeroLikelihood);
        }

        let mut out = vec![vec![0.0; model.num_categories]; self.node_ids.len()];
        for (d, decomposition) in self.decompositions.iter().enumerate() {
            if log_mix[d] == f64::NEG_INFINITY {
                continue;
            }
            let q = (log_mix[d] - log_z).exp();
            for component in &decomposition.components {
                let tspn = self.template_spn(model, component)?;
                let posts = tspn
                    .spn
                    .marginals(&self.component_evidence(evidence, component))?;
                for (slot, node) in component.node_ids.iter().enumerate() {
                    let var = self.var_of[node];
                    for (k, p) in posts[slot].iter().enumerate() {
                        out[var][k] += q * p;
                    }
                }
            }
        }
        for row in out.iter_mut() {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                for p in row.iter_mut() {
                    *p /= total;
                }
            }
        }
        Ok(out)
    }

    /// Most probable assignment: the best decomposition (ties towards the
    /// lowest index) with per-component MPE assignments.
    pub fn mpe(&self, model: &GraphSpnModel, evidence: &Evidence) -> Result<Vec<usize>, ModelError> {
        self.check_evidence(model, evidence)?;
        let mut best: Option<(usize, f64, Vec<MpeResult>)> = None;
        for (d, decomposition) in self.decompositions.iter().enumerate() {
            let mut total = self.root_log_weights[d];
            let mut results = Vec::with_capacity(decomposition.components.len());
            let mut dead = false;
            for component in &decomposition.components {
                let tspn = self.template_spn(model, component)?;
                match tspn.spn.mpe(&self.component_evidence(evidence, component)) {
                    Ok(r) => {
                        total += r.log_value;
                        results.push(r);
                    }
                    Err(SpnError::ZeroLikelihood) => {
                        dead = true;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if !dead && best.as_ref().map_or(true, |&(_, b, _)| total > b) {
                best = Some((d, total, results));
            }
        }
        let (d, _, results) = best.ok_or(ModelError::ZeroLikelihood)?;
        let mut assignment = vec![0usize; self.node_ids.len()];
        for (component, r) in self.decompositions[d].components.iter().zip(&results) {
            for (slot, node) in component.node_ids.iter().enumerate() {
                assignment[self.var_of[node]] = r.assignment[slot];
            }
        }
        Ok(assignment)
    }

    /// Flattens the instance into a standalone network (template nodes are
    /// copied per component, indicators shared per graph variable).
    pub fn to_spn(&self, model: &GraphSpnModel) -> Result<Spn, ModelError> {
        let variables: Vec<CategoricalVariable> = (0..self.node_ids.len())
            .map(|i| CategoricalVariable { id: VarId(i), cardinality: model.num_categories })
            .collect();
        let mut nodes: Vec<SpnNode> = Vec::new();
        let mut indicators: HashMap<(usize, usize), NodeId> = HashMap::new();
        let mut products = Vec::with_capacity(self.decompositions.len());
        for decomposition in &self.decompositions {
            let mut component_roots = Vec::with_capacity(decomposition.components.len());
            for component in &decomposition.components {
                let tspn = self.template_spn(model, component)?;
                let mut local: HashMap<usize, NodeId> = HashMap::new();
                for &tid in tspn.spn.topo_order() {
                    let new_id = match tspn.spn.node(tid)? {
                        SpnNode::Indicator { var, value } => {
                            let gvar = self.var_of[&component.node_ids[var.0]];
                            *indicators.entry((gvar, *value)).or_insert_with(|| {
                                nodes.push(SpnNode::Indicator {
                                    var: VarId(gvar),
                                    value: *value,
                                });
                                NodeId(nodes.len() - 1)
                            })
                        }
                        SpnNode::Sum { children } => {
                            let mapped =
                                children.iter().map(|&(c, w)| (local[&c.0], w)).collect();
                            nodes.push(SpnNode::Sum { children: mapped });
                            NodeId(nodes.len() - 1)
                        }
                        SpnNode::Product { children } => {
                            let mapped = children.iter().map(|&c| local[&c.0]).collect();
                            nodes.push(SpnNode::Product { children: mapped });
                            NodeId(nodes.len() - 1)
                        }
                    };
                    local.insert(tid.0, new_id);
                }
                component_roots.push(local[&tspn.spn.root().0]);
            }
            nodes.push(SpnNode::Product { children: component_roots });
            products.push(NodeId(nodes.len() - 1));
        }
        let children = products
            .into_iter()
            .zip(&self.root_log_weights)
            .map(|(p, &lw)| (p, lw.exp()))
            .collect();
        nodes.push(SpnNode::Sum { children });
        let root = NodeId(nodes.len() - 1);
        Ok(Spn::new(variables, nodes, root)?)
    }
}

// ---------------------------------------------------------------------------
// Graph-level inference

/// Converts a graph's per-node evidence into instance evidence: soft
/// multipliers where local evidence exists, everything else marginalized.
pub fn evidence_from_graph(
    graph: &TopoGraph,
    num_categories: usize,
) -> Result<Evidence, ModelError> {
    let mut ids = graph.node_ids();
    ids.sort_unstable();
    let entries = ids
        .iter()
        .map(|&id| {
            let node = graph.node(id).expect("listed node");
            match &node.evidence {
                Some(ev) => {
                    if ev.len() != num_categories {
                        return Err(ModelError::EvidenceCardinality {
                            node: id,
                            got: ev.len(),
                            expected: num_categories,
                        });
                    }
                    Ok(VarEvidence::Soft(ev.clone()))
                }
                None => Ok(VarEvidence::Marginalized),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evidence::from_entries(entries))
}

fn check_same_nodes(instance: &InstanceSpn, graph: &TopoGraph) -> Result<(), ModelError> {
    if instance.node_ids() != graph.node_ids().as_slice() {
        return Err(ModelError::GraphMismatch(
            "graph node ids differ from the instantiated graph".into(),
        ));
    }
    Ok(())
}

fn argmax_label(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = k;
        }
    }
    best
}

/// Posterior per node plus the maximum-posterior label.
#[derive(Debug, Clone)]
pub struct Classification {
    pub posteriors: BTreeMap<usize, Vec<f64>>,
    pub argmax: BTreeMap<usize, usize>,
}

/// Marginal classification of every node given the graph's local evidence.
pub fn classify_marginal(
    model: &GraphSpnModel,
    instance: &InstanceSpn,
    graph: &TopoGraph,
) -> Result<Classification, ModelError> {
    check_same_nodes(instance, graph)?;
    let evidence = evidence_from_graph(graph, model.num_categories())?;
    let marginals = instance.marginals(model, &evidence)?;
    let mut posteriors = BTreeMap::new();
    let mut argmax = BTreeMap::new();
    for (var, row) in marginals.into_iter().enumerate() {
        let id = instance.node_ids()[var];
        argmax.insert(id, argmax_label(&row));
        posteriors.insert(id, row);
    }
    Ok(Classification { posteriors, argmax })
}

/// Marginal distributions for the placeholder nodes only. Empty when the
/// graph has no placeholders.
pub fn infer_placeholders(
    model: &GraphSpnModel,
    instance: &InstanceSpn,
    graph: &TopoGraph,
) -> Result<BTreeMap<usize, Vec<f64>>, ModelError> {
    let classification = classify_marginal(model, instance, graph)?;
    Ok(classification
        .posteriors
        .into_iter()
        .filter(|(id, _)| graph.node(*id).expect("classified node").is_placeholder)
        .collect())
}

/// Most probable label per node.
pub fn mpe_labels(
    model: &GraphSpnModel,
    instance: &InstanceSpn,
    graph: &TopoGraph,
) -> Result<BTreeMap<usize, usize>, ModelError> {
    check_same_nodes(instance, graph)?;
    let evidence = evidence_from_graph(graph, model.num_categories())?;
    let assignment = instance.mpe(model, &evidence)?;
    Ok(assignment
        .into_iter()
        .enumerate()
        .map(|(var, label)| (instance.node_ids()[var], label))
        .collect())
}

/// Instance log-likelihood of a complete labeling, divided by the number of
/// nodes.
pub fn normalized_log_likelihood(
    model: &GraphSpnModel,
    instance: &InstanceSpn,
    labels: &BTreeMap<usize, usize>,
) -> Result<f64, ModelError> {
    let entries = instance
        .node_ids()
        .iter()
        .map(|&id| {
            let &label = labels.get(&id).ok_or(ModelError::UnlabeledNode(id))?;
            if label >= model.num_categories() {
                return Err(ModelError::LabelOutOfRange { node: id, label });
            }
            Ok(VarEvidence::Observed(label))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let evidence = Evidence::from_entries(entries);
    let total = instance.eval_log(model, &evidence)?;
    Ok(total / instance.num_nodes() as f64)
}

/// Groundtruth labels of a graph as a node-to-index map.
pub fn groundtruth_labels(graph: &TopoGraph) -> Result<BTreeMap<usize, usize>, ModelError> {
    graph
        .nodes()
        .iter()
        .map(|n| {
            n.groundtruth
                .map(|c| (n.id, c.index()))
                .ok_or(ModelError::MissingGroundtruth(n.id))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Model bundle

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    format: String,
    num_categories: usize,
    categories: Vec<String>,
    templates: Vec<SubGraphTemplate>,
    spn_files: BTreeMap<String, String>,
    meta: serde_json::Value,
}

impl GraphSpnModel {
    /// Writes the model as a directory: a manifest plus one network file per
    /// template.
    pub fn save_bundle(&self, dir: &Path, meta: serde_json::Value) -> Result<(), ModelError> {
        std::fs::create_dir_all(dir)?;
        let mut spn_files = BTreeMap::new();
        for (id, tspn) in &self.template_spns {
            let file = format!("template_{id}.json");
            tspn.spn.save(&dir.join(&file))?;
            spn_files.insert(id.clone(), file);
        }
        let categories = if self.num_categories == NUM_CATEGORIES {
            PlaceCategory::ALL.iter().map(|c| c.code().to_string()).collect()
        } else {
            (0..self.num_categories).map(|i| i.to_string()).collect()
        };
        let manifest = BundleManifest {
            format: "graphspn-model".into(),
            num_categories: self.num_categories,
            categories,
            templates: self.templates.clone(),
            spn_files,
            meta,
        };
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| ModelError::Format(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    /// Loads a bundle written by [`GraphSpnModel::save_bundle`]; returns the
    /// model plus the caller-supplied metadata.
    pub fn load_bundle(dir: &Path) -> Result<(Self, serde_json::Value), ModelError> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: BundleManifest =
            serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
        if manifest.format != "graphspn-model" {
            return Err(ModelError::Format(format!("unknown format {:?}", manifest.format)));
        }
        let mut template_spns = BTreeMap::new();
        for (id, file) in &manifest.spn_files {
            let spn = Spn::load(&dir.join(file))?;
            template_spns.insert(id.clone(), TemplateSpn { template_id: id.clone(), spn });
        }
        let model = GraphSpnModel::from_parts(
            manifest.templates,
            template_spns,
            manifest.num_categories,
        )?;
        Ok((model, manifest.meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SynthFloorParams, TopoNode};
    use crate::templates::default_template_set;

    fn tiny_graph(n: usize, edges: Vec<(usize, usize)>) -> TopoGraph {
        let nodes = (0..n)
            .map(|id| TopoNode {
                id,
                groundtruth: Some(PlaceCategory::Corridor),
                is_placeholder: false,
                evidence: None,
            })
            .collect();
        TopoGraph::new("t".into(), "b".into(), nodes, edges).unwrap()
    }

    #[test]
    fn uniform_single_node_instance_is_the_uniform_distribution() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let graph = tiny_graph(1, vec![]);
        let config = InstantiationConfig { num_decompositions: 1, ..Default::default() };
        let instance = model.instantiate(&graph, &config).unwrap();
        let v = instance.eval_log(&model, &Evidence::marginalized(1)).unwrap();
        assert!(v.abs() < 1e-12);
        let mut ev = Evidence::marginalized(1);
        ev.set_observed(VarId(0), 3);
        let v = instance.eval_log(&model, &ev).unwrap();
        assert!((v - (0.1f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn instance_flattening_is_valid_and_matches_composed_eval() {
        let model = GraphSpnModel::uniform(default_template_set(), 4);
        let graph = tiny_graph(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let config = InstantiationConfig {
            num_decompositions: 3,
            rng_seed: 2,
            ..Default::default()
        };
        let instance = model.instantiate(&graph, &config).unwrap();
        let flat = instance.to_spn(&model).unwrap();
        assert!(flat.validate().is_valid());
        let mut ev = Evidence::marginalized(5);
        ev.set_observed(VarId(1), 2);
        ev.set_soft(VarId(3), vec![0.4, 0.3, 0.2, 0.1]);
        let composed = instance.eval_log(&model, &ev).unwrap();
        let flattened = flat.eval_log(&ev).unwrap();
        assert!((composed - flattened).abs() < 1e-9);
    }

    #[test]
    fn single_only_model_gives_uniform_posteriors() {
        let singles: Vec<SubGraphTemplate> = default_template_set()
            .into_iter()
            .filter(|t| t.id == "SINGLE")
            .collect();
        let model = GraphSpnModel::uniform(singles, 10);
        let graph = tiny_graph(3, vec![(0, 1), (1, 2)]);
        let instance = model.instantiate(&graph, &InstantiationConfig::default()).unwrap();
        let classification = classify_marginal(&model, &instance, &graph).unwrap();
        for row in classification.posteriors.values() {
            for &p in row {
                assert!((p - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_evidence_classifies_to_groundtruth() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let params = SynthFloorParams { rng_seed: 8, ..Default::default() };
        let floor = crate::data::generate_synthetic_floor(&params).unwrap();
        // Near-one-hot evidence on the groundtruth class.
        let level = crate::data::NoiseLevel {
            level: 1,
            gt_range: (0.97, 0.99),
            inc_range: (0.0, 0.0),
            incorrect_fraction: 0.0,
        };
        let noisy = crate::data::apply_noise(&floor, &level, 4).unwrap();
        let instance = model.instantiate(&noisy, &InstantiationConfig::default()).unwrap();
        let classification = classify_marginal(&model, &instance, &noisy).unwrap();
        for node in noisy.nodes() {
            assert_eq!(
                classification.argmax[&node.id],
                node.groundtruth.unwrap().index(),
                "node {}",
                node.id
            );
        }
    }

    #[test]
    fn placeholder_inference_returns_only_placeholders() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let graph = tiny_graph(4, vec![(0, 1), (1, 2), (2, 3)]);
        let demoted = graph.demote_to_placeholders(&[2]).unwrap();
        let instance = model.instantiate(&demoted, &InstantiationConfig::default()).unwrap();
        let marginals = infer_placeholders(&model, &instance, &demoted).unwrap();
        assert_eq!(marginals.len(), 1);
        assert!((marginals[&2].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // No placeholders: empty result.
        let instance = model.instantiate(&graph, &InstantiationConfig::default()).unwrap();
        assert!(infer_placeholders(&model, &instance, &graph).unwrap().is_empty());
    }

    #[test]
    fn mpe_with_one_hot_evidence_returns_the_evidence_labels() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let graph = tiny_graph(4, vec![(0, 1), (1, 2), (2, 3)]);
        let mut ev = Evidence::marginalized(4);
        for (var, label) in [(0, 3), (1, 4), (2, 3), (3, 7)] {
            let mut soft = vec![0.0; 10];
            soft[label] = 1.0;
            ev.set_soft(VarId(var), soft);
        }
        let instance = model.instantiate(&graph, &InstantiationConfig::default()).unwrap();
        let a = instance.mpe(&model, &ev).unwrap();
        assert_eq!(a, vec![3, 4, 3, 7]);
        let b = instance.mpe(&model, &ev).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_model_normalized_loglik_is_log_uniform_per_node() {
        let singles: Vec<SubGraphTemplate> = default_template_set()
            .into_iter()
            .filter(|t| t.id == "SINGLE")
            .collect();
        let model = GraphSpnModel::uniform(singles, 10);
        for n in [1, 4, 9] {
            let graph = tiny_graph(n, (1..n).map(|i| (i - 1, i)).collect());
            let instance =
                model.instantiate(&graph, &InstantiationConfig::default()).unwrap();
            let labels = groundtruth_labels(&graph).unwrap();
            let nll = normalized_log_likelihood(&model, &instance, &labels).unwrap();
            assert!((nll - (0.1f64).ln()).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn normalized_loglik_requires_every_node() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let graph = tiny_graph(2, vec![(0, 1)]);
        let instance = model.instantiate(&graph, &InstantiationConfig::default()).unwrap();
        let mut labels = BTreeMap::new();
        labels.insert(0, 3);
        assert!(matches!(
            normalized_log_likelihood(&model, &instance, &labels),
            Err(ModelError::UnlabeledNode(1))
        ));
    }

    #[test]
    fn explicit_root_weights_are_validated() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let graph = tiny_graph(2, vec![(0, 1)]);
        let config = InstantiationConfig {
            num_decompositions: 2,
            root_weights: RootWeights::Explicit(vec![1.0]),
            ..Default::default()
        };
        assert!(matches!(
            model.instantiate(&graph, &config),
            Err(ModelError::BadRootWeights(_))
        ));
    }

    #[test]
    fn extraction_augments_path_components_with_both_orientations() {
        let nodes = vec![
            TopoNode {
                id: 0,
                groundtruth: Some(PlaceCategory::Corridor),
                is_placeholder: false,
                evidence: None,
            },
            TopoNode {
                id: 1,
                groundtruth: Some(PlaceCategory::Doorway),
                is_placeholder: false,
                evidence: None,
            },
        ];
        let graph = TopoGraph::new("g".into(), "b".into(), nodes, vec![(0, 1)]).unwrap();
        let templates: Vec<SubGraphTemplate> = default_template_set()
            .into_iter()
            .filter(|t| t.id == "PATH2" || t.id == "SINGLE")
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tuples = extract_training_components(&[graph], &templates, 1, &mut rng).unwrap();
        let cr = PlaceCategory::Corridor.index();
        let dw = PlaceCategory::Doorway.index();
        let mut got = tuples["PATH2"].clone();
        got.sort();
        assert_eq!(got, vec![vec![cr, dw], vec![dw, cr]]);
        // Single-node components are skipped entirely.
        assert!(!tuples.contains_key("SINGLE"));
    }

    #[test]
    fn extraction_node_slot_budget_matches_partition_times_repetitions() {
        let params = SynthFloorParams { rng_seed: 10, ..Default::default() };
        let graph = crate::data::generate_synthetic_floor(&params).unwrap();
        let n = graph.num_nodes();
        let templates = default_template_set();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reps = 10;
        // Count raw node slots before automorphism augmentation by dividing
        // each bucket by its automorphism count.
        let tuples =
            extract_training_components(std::slice::from_ref(&graph), &templates, reps, &mut rng)
                .unwrap();
        let mut slots = 0usize;
        let mut singles_estimate = 0usize;
        for t in &templates {
            if t.node_count == 1 {
                continue;
            }
            let auto = t.automorphisms().len();
            let raw = tuples[&t.id].len() / auto;
            slots += raw * t.node_count;
        }
        // Whatever is not covered by multi-node templates is SINGLE nodes.
        singles_estimate += reps * n - slots;
        assert_eq!(slots + singles_estimate, reps * n);
        assert!(slots > 0);
    }

    #[test]
    fn missing_groundtruth_fails_extraction() {
        let nodes = vec![TopoNode {
            id: 0,
            groundtruth: None,
            is_placeholder: false,
            evidence: None,
        }];
        let graph = TopoGraph::new("g".into(), "b".into(), nodes, vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            extract_training_components(&[graph], &default_template_set(), 1, &mut rng),
            Err(ModelError::MissingGroundtruth(0))
        ));
    }

    #[test]
    fn training_twice_with_the_same_seed_gives_identical_models() {
        let graphs: Vec<TopoGraph> = (0..2)
            .map(|i| {
                let params = SynthFloorParams {
                    rng_seed: 20 + i,
                    corridor_length: 6,
                    rooms_per_corridor: 2,
                    ..Default::default()
                };
                crate::data::generate_synthetic_floor(&params).unwrap()
            })
            .collect();
        let templates = default_template_set();
        let structure = StructureParams::default();
        let config = TrainConfig { max_epochs: 5, ..Default::default() };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            train_templates(&graphs, &templates, &structure, &config, 3, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bundle_round_trip() {
        let model = GraphSpnModel::uniform(default_template_set(), 10);
        let dir = std::env::temp_dir().join("graphspn-bundle-test");
        let _ = std::fs::remove_dir_all(&dir);
        let meta = serde_json::json!({"seed": 7});
        model.save_bundle(&dir, meta.clone()).unwrap();
        let (loaded, loaded_meta) = GraphSpnModel::load_bundle(&dir).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded_meta, meta);
    }
}
