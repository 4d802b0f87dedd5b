//! Markov random field baseline: unary evidence potentials plus a single
//! shared co-occurrence table applied to every edge (order 2) or connected
//! node triple (order 3). Inference runs damped loopy belief propagation in
//! log space; a brute-force exact oracle covers small state spaces.

use crate::data::{GraphError, TopoGraph, NUM_CATEGORIES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MrfError {
    #[error("co-occurrence order {0} unsupported (only 2 and 3)")]
    BadOrder(u8),
    #[error("node {0} is missing a groundtruth label")]
    MissingGroundtruth(usize),
    #[error("factor references variable {0} out of range")]
    UnknownVariable(usize),
    #[error("factor variables must be distinct: {0:?}")]
    RepeatedVariable(Vec<usize>),
    #[error("factor table has {got} entries, expected {expected}")]
    BadTableSize { got: usize, expected: usize },
    #[error("factor tables must be non-negative and finite")]
    BadTableEntry,
    #[error("joint state space of {0} states exceeds the exact-inference limit")]
    StateSpaceTooLarge(f64),
    #[error("node {node}: label {label} out of range")]
    LabelOutOfRange { node: usize, label: usize },
    #[error("node {0} has no label in the assignment")]
    UnlabeledNode(usize),
    #[error("malformed potential table document: {0}")]
    Format(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A factor over variable positions of a [`FactorGraph`].
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Unary { var: usize, table: Vec<f64> },
    Pairwise { vars: (usize, usize), table: Vec<f64> },
    Triple { vars: (usize, usize, usize), table: Vec<f64> },
}

impl Factor {
    fn vars(&self) -> Vec<usize> {
        match self {
            Factor::Unary { var, .. } => vec![*var],
            Factor::Pairwise { vars, .. } => vec![vars.0, vars.1],
            Factor::Triple { vars, .. } => vec![vars.0, vars.1, vars.2],
        }
    }

    fn table(&self) -> &[f64] {
        match self {
            Factor::Unary { table, .. }
            | Factor::Pairwise { table, .. }
            | Factor::Triple { table, .. } => table,
        }
    }

    /// Row-major table lookup for an assignment of the factor's variables.
    fn value(&self, states: &[usize], cards: &[usize]) -> f64 {
        let vars = self.vars();
        let mut idx = 0;
        for &v in &vars {
            idx = idx * cards[v] + states[v];
        }
        self.table()[idx]
    }
}

/// Discrete factor graph: `variables[i]` is `(node id, cardinality)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph {
    variables: Vec<(usize, usize)>,
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new(variables: Vec<(usize, usize)>, factors: Vec<Factor>) -> Result<Self, MrfError> {
        let n = variables.len();
        for factor in &factors {
            let vars = factor.vars();
            let mut sorted = vars.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != vars.len() {
                return Err(MrfError::RepeatedVariable(vars));
            }
            let mut expected = 1usize;
            for &v in &vars {
                if v >= n {
                    return Err(MrfError::UnknownVariable(v));
                }
                expected *= variables[v].1;
            }
            if factor.table().len() != expected {
                return Err(MrfError::BadTableSize {
                    got: factor.table().len(),
                    expected,
                });
            }
            if factor.table().iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(MrfError::BadTableEntry);
            }
        }
        Ok(FactorGraph { variables, factors })
    }

    pub fn variables(&self) -> &[(usize, usize)] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }
}

/// A shared co-occurrence table estimated from training graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub order: u8,
    pub num_categories: usize,
    /// Row-major; `num_categories.pow(order)` entries.
    pub table: Vec<f64>,
}

impl PotentialTable {
    pub fn save(&self, path: &Path) -> Result<(), MrfError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| MrfError::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MrfError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| MrfError::Format(e.to_string()))
    }
}

/// All connected three-node subsets (paths and triangles), as sorted id
/// triples.
pub fn connected_triples(graph: &TopoGraph) -> Vec<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for node in graph.nodes() {
        let nbrs = graph.neighbors(node.id);
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                let mut ids = [a, node.id, b];
                ids.sort_unstable();
                out.insert((ids[0], ids[1], ids[2]));
            }
        }
    }
    out.into_iter().collect()
}

/// Symmetrized co-occurrence counts of groundtruth labels over edges (order
/// 2) or connected triples (order 3), plus Laplace smoothing on every cell.
pub fn estimate_potentials(
    graphs: &[TopoGraph],
    order: u8,
    smoothing: f64,
) -> Result<PotentialTable, MrfError> {
    if order != 2 && order != 3 {
        return Err(MrfError::BadOrder(order));
    }
    let l = NUM_CATEGORIES;
    let mut table = vec![smoothing; l.pow(order as u32)];
    for graph in graphs {
        let label = |id: usize| -> Result<usize, MrfError> {
            graph
                .node(id)
                .and_then(|n| n.groundtruth)
                .map(|c| c.index())
                .ok_or(MrfError::MissingGroundtruth(id))
        };
        if order == 2 {
            for &(a, b) in graph.edges() {
                let (ya, yb) = (label(a)?, label(b)?);
                table[ya * l + yb] += 1.0;
                table[yb * l + ya] += 1.0;
            }
        } else {
            for (a, b, c) in connected_triples(graph) {
                let labels = [label(a)?, label(b)?, label(c)?];
                for perm in [
                    [0, 1, 2],
                    [0, 2, 1],
                    [1, 0, 2],
                    [1, 2, 0],
                    [2, 0, 1],
                    [2, 1, 0],
                ] {
                    let (x, y, z) = (labels[perm[0]], labels[perm[1]], labels[perm[2]]);
                    table[(x * l + y) * l + z] += 1.0;
                }
            }
        }
    }
    Ok(PotentialTable { order, num_categories: l, table })
}

/// Builds the factor graph for one topological map: a unary factor per node
/// (the local evidence; all-ones on placeholders) and the shared structural
/// potential per edge (order 2) or per connected triple (order 3).
pub fn build_mrf(graph: &TopoGraph, potentials: &PotentialTable) -> Result<FactorGraph, MrfError> {
    if potentials.order != 2 && potentials.order != 3 {
        return Err(MrfError::BadOrder(potentials.order));
    }
    let node_ids = graph.node_ids();
    let pos_of = |id: usize| node_ids.binary_search(&id).expect("listed node");
    let variables: Vec<(usize, usize)> =
        node_ids.iter().map(|&id| (id, potentials.num_categories)).collect();
    let mut factors = Vec::new();
    for &id in &node_ids {
        let node = graph.node(id).expect("listed node");
        let table = match &node.evidence {
            Some(ev) => ev.clone(),
            None => vec![1.0; potentials.num_categories],
        };
        factors.push(Factor::Unary { var: pos_of(id), table });
    }
    if potentials.order == 2 {
        for &(a, b) in graph.edges() {
            factors.push(Factor::Pairwise {
                vars: (pos_of(a), pos_of(b)),
                table: potentials.table.clone(),
            });
        }
    } else {
        for (a, b, c) in connected_triples(graph) {
            factors.push(Factor::Triple {
                vars: (pos_of(a), pos_of(b), pos_of(c)),
                table: potentials.table.clone(),
            });
        }
    }
    FactorGraph::new(variables, factors)
}

/// Loopy belief propagation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BpConfig {
    pub max_iterations: usize,
    pub damping: f64,
    /// Convergence threshold on the largest message change, in probability
    /// space.
    pub tolerance: f64,
    /// Seed of the random sequential update schedule.
    pub rng_seed: u64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig { max_iterations: 200, damping: 0.5, tolerance: 1e-6, rng_seed: 0 }
    }
}

/// Outcome of [`loopy_bp`]; non-convergence is reported, not thrown.
#[derive(Debug, Clone)]
pub struct BpResult {
    pub marginals: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

fn log_normalize(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let u = -(row.len() as f64).ln();
        row.iter_mut().for_each(|x| *x = u);
        return;
    }
    let total = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    row.iter_mut().for_each(|x| *x -= total);
}

/// Damped loopy BP with factor-to-variable messages in log space and a
/// random sequential schedule. Variable-to-factor messages are recomputed on
/// demand from the current factor messages.
pub fn loopy_bp(fg: &FactorGraph, config: &BpConfig) -> BpResult {
    let n = fg.variables.len();
    let cards: Vec<usize> = fg.variables.iter().map(|&(_, c)| c).collect();
    // incident[v] = (factor index, slot within the factor)
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (f, factor) in fg.factors.iter().enumerate() {
        for (slot, v) in factor.vars().into_iter().enumerate() {
            incident[v].push((f, slot));
        }
    }
    // Messages factor -> variable, log space, normalized.
    let mut messages: Vec<Vec<Vec<f64>>> = fg
        .factors
        .iter()
        .map(|factor| {
            factor
                .vars()
                .iter()
                .map(|&v| vec![-(cards[v] as f64).ln(); cards[v]])
                .collect()
        })
        .collect();

    let var_to_factor = |messages: &Vec<Vec<Vec<f64>>>, v: usize, skip: usize| -> Vec<f64> {
        let mut out = vec![0.0; cards[v]];
        for &(f, slot) in &incident[v] {
            if f == skip {
                continue;
            }
            for (k, x) in out.iter_mut().enumerate() {
                *x += messages[f][slot][k];
            }
        }
        log_normalize(&mut out);
        out
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..fg.factors.len()).collect();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iterations {
        iterations += 1;
        order.shuffle(&mut rng);
        let mut max_change: f64 = 0.0;
        for &f in &order {
            let factor = &fg.factors[f];
            let vars = factor.vars();
            let table = factor.table();
            // Incoming messages for each slot.
            let incoming: Vec<Vec<f64>> = vars
                .iter()
                .map(|&v| var_to_factor(&messages, v, f))
                .collect();
            for (slot, &target) in vars.iter().enumerate() {
                let mut fresh = vec![f64::NEG_INFINITY; cards[target]];
                // Enumerate the factor table; vars are ordered row-major.
                let mut states = vec![0usize; vars.len()];
                for (idx, &phi) in table.iter().enumerate() {
                    let mut rem = idx;
                    for (j, &v) in vars.iter().enumerate().rev() {
                        states[j] = rem % cards[v];
                        rem /= cards[v];
                    }
                    let mut term = if phi > 0.0 { phi.ln() } else { f64::NEG_INFINITY };
                    for (j, msg) in incoming.iter().enumerate() {
                        if j != slot {
                            term += msg[states[j]];
                        }
                    }
                    let cell = &mut fresh[states[slot]];
                    *cell = log_add_exp_local(*cell, term);
                }
                log_normalize(&mut fresh);
                let old = &mut messages[f][slot];
                // Residual of the undamped fixed-point equation, probability
                // space; damping alone must not fake convergence.
                for k in 0..fresh.len() {
                    max_change = max_change.max((fresh[k].exp() - old[k].exp()).abs());
                    old[k] = config.damping * old[k] + (1.0 - config.damping) * fresh[k];
                }
                log_normalize(old);
            }
        }
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }

    let marginals = (0..n)
        .map(|v| {
            let mut row = vec![0.0; cards[v]];
            for &(f, slot) in &incident[v] {
                for (k, x) in row.iter_mut().enumerate() {
                    *x += messages[f][slot][k];
                }
            }
            log_normalize(&mut row);
            row.iter().map(|&x| x.exp()).collect()
        })
        .collect();
    BpResult { marginals, converged, iterations }
}

fn log_add_exp_local(a: f64, b: f64) -> f64 {
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

/// Brute-force marginals by summing the factor product over every joint
/// assignment. Limited to 10^7 states.
pub fn exact_marginals(fg: &FactorGraph) -> Result<Vec<Vec<f64>>, MrfError> {
    let cards: Vec<usize> = fg.variables.iter().map(|&(_, c)| c).collect();
    let total_states: f64 = cards.iter().map(|&c| c as f64).product();
    if total_states > 1e7 {
        return Err(MrfError::StateSpaceTooLarge(total_states));
    }
    let total = total_states as usize;
    let mut acc: Vec<Vec<f64>> = cards.iter().map(|&c| vec![f64::NEG_INFINITY; c]).collect();
    let mut states = vec![0usize; cards.len()];
    for _ in 0..total {
        let mut log_w = 0.0;
        for factor in &fg.factors {
            let phi = factor.value(&states, &cards);
            log_w += if phi > 0.0 { phi.ln() } else { f64::NEG_INFINITY };
            if log_w == f64::NEG_INFINITY {
                break;
            }
        }
        for (v, &s) in states.iter().enumerate() {
            acc[v][s] = log_add_exp_local(acc[v][s], log_w);
        }
        for i in (0..states.len()).rev() {
            states[i] += 1;
            if states[i] < cards[i] {
                break;
            }
            states[i] = 0;
        }
    }
    Ok(acc
        .into_iter()
        .map(|mut row| {
            log_normalize(&mut row);
            row.iter().map(|&x| x.exp()).collect()
        })
        .collect())
}

/// Mean log of the unnormalized factor product under a complete labeling,
/// divided by the node count. One-hot unaries from certain labels contribute
/// zero, so only the structural potentials matter. The partition function is
/// omitted.
pub fn mean_log_factor_score(
    graph: &TopoGraph,
    potentials: &PotentialTable,
    labels: &std::collections::BTreeMap<usize, usize>,
) -> Result<f64, MrfError> {
    let l = potentials.num_categories;
    let label = |id: usize| -> Result<usize, MrfError> {
        let &y = labels.get(&id).ok_or(MrfError::UnlabeledNode(id))?;
        if y >= l {
            return Err(MrfError::LabelOutOfRange { node: id, label: y });
        }
        Ok(y)
    };
    let mut total = 0.0;
    if potentials.order == 2 {
        for &(a, b) in graph.edges() {
            let phi = potentials.table[label(a)? * l + label(b)?];
            total += if phi > 0.0 { phi.ln() } else { f64::NEG_INFINITY };
        }
    } else if potentials.order == 3 {
        for (a, b, c) in connected_triples(graph) {
            let phi = potentials.table[(label(a)? * l + label(b)?) * l + label(c)?];
            total += if phi > 0.0 { phi.ln() } else { f64::NEG_INFINITY };
        }
    } else {
        return Err(MrfError::BadOrder(potentials.order));
    }
    Ok(total / graph.num_nodes() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PlaceCategory, TopoNode};

    fn labeled_graph(labels: &[PlaceCategory], edges: Vec<(usize, usize)>) -> TopoGraph {
        let nodes = labels
            .iter()
            .enumerate()
            .map(|(id, &c)| TopoNode {
                id,
                groundtruth: Some(c),
                is_placeholder: false,
                evidence: None,
            })
            .collect();
        TopoGraph::new("g".into(), "b".into(), nodes, edges).unwrap()
    }

    #[test]
    fn single_edge_counts_land_symmetrically() {
        use PlaceCategory::{Corridor, Doorway};
        let g = labeled_graph(&[Corridor, Doorway], vec![(0, 1)]);
        let t = estimate_potentials(&[g], 2, 0.0).unwrap();
        let l = NUM_CATEGORIES;
        let (cr, dw) = (Corridor.index(), Doorway.index());
        let mass: f64 = t.table.iter().sum();
        assert_eq!(mass, 2.0);
        assert_eq!(t.table[cr * l + dw], 1.0);
        assert_eq!(t.table[dw * l + cr], 1.0);
    }

    #[test]
    fn smoothing_on_empty_data_gives_a_uniform_table() {
        let t = estimate_potentials(&[], 3, 1.0).unwrap();
        assert!(t.table.iter().all(|&x| x == 1.0));
        assert_eq!(t.table.len(), 1000);
    }

    #[test]
    fn triple_enumeration_on_triangle_and_path() {
        use PlaceCategory::Corridor as C;
        let triangle = labeled_graph(&[C, C, C], vec![(0, 1), (1, 2), (0, 2)]);
        assert_eq!(connected_triples(&triangle).len(), 1);
        let path = labeled_graph(&[C, C, C], vec![(0, 1), (1, 2)]);
        assert_eq!(connected_triples(&path), vec![(0, 1, 2)]);
    }

    #[test]
    fn bad_order_is_rejected() {
        assert!(matches!(estimate_potentials(&[], 4, 1.0), Err(MrfError::BadOrder(4))));
    }

    #[test]
    fn mrf2_has_one_pairwise_per_edge() {
        use PlaceCategory::Corridor as C;
        let g = labeled_graph(&[C, C, C], vec![(0, 1), (1, 2)]);
        let t = estimate_potentials(std::slice::from_ref(&g), 2, 1.0).unwrap();
        let fg = build_mrf(&g, &t).unwrap();
        let pairwise = fg.factors().iter().filter(|f| matches!(f, Factor::Pairwise { .. }));
        assert_eq!(pairwise.count(), 2);
        assert_eq!(fg.variables().len(), 3);
    }

    #[test]
    fn mrf3_replaces_pairwise_with_triples() {
        use PlaceCategory::Corridor as C;
        let g = labeled_graph(&[C, C, C], vec![(0, 1), (1, 2), (0, 2)]);
        let t = estimate_potentials(std::slice::from_ref(&g), 3, 1.0).unwrap();
        let fg = build_mrf(&g, &t).unwrap();
        assert_eq!(
            fg.factors().iter().filter(|f| matches!(f, Factor::Triple { .. })).count(),
            1
        );
        assert_eq!(
            fg.factors().iter().filter(|f| matches!(f, Factor::Pairwise { .. })).count(),
            0
        );
    }

    #[test]
    fn placeholder_gets_an_all_ones_unary() {
        use PlaceCategory::Corridor as C;
        let g = labeled_graph(&[C, C], vec![(0, 1)]);
        let g = g.demote_to_placeholders(&[1]).unwrap();
        let t = estimate_potentials(std::slice::from_ref(&g), 2, 1.0).unwrap();
        let fg = build_mrf(&g, &t).unwrap();
        let unary = fg
            .factors()
            .iter()
            .find_map(|f| match f {
                Factor::Unary { var: 1, table } => Some(table.clone()),
                _ => None,
            })
            .unwrap();
        assert!(unary.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn single_variable_belief_is_the_normalized_unary() {
        let fg = FactorGraph::new(
            vec![(0, 2)],
            vec![Factor::Unary { var: 0, table: vec![0.7, 0.3] }],
        )
        .unwrap();
        let config = BpConfig { tolerance: 1e-12, ..Default::default() };
        let r = loopy_bp(&fg, &config);
        assert!(r.converged);
        assert!((r.marginals[0][0] - 0.7).abs() < 1e-9);
        assert!((r.marginals[0][1] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn pairwise_exact_marginals_match_closed_form() {
        // Two binary variables, one pairwise table.
        let table = vec![0.4, 0.1, 0.2, 0.3];
        let fg = FactorGraph::new(
            vec![(0, 2), (1, 2)],
            vec![Factor::Pairwise { vars: (0, 1), table }],
        )
        .unwrap();
        let m = exact_marginals(&fg).unwrap();
        assert!((m[0][0] - 0.5).abs() < 1e-12);
        assert!((m[1][0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn bp_is_exact_on_a_tree() {
        let unaries = [vec![0.6, 0.4], vec![0.2, 0.8], vec![0.5, 0.5]];
        let pair = vec![0.8, 0.2, 0.3, 0.7];
        let mut factors: Vec<Factor> = unaries
            .iter()
            .enumerate()
            .map(|(v, t)| Factor::Unary { var: v, table: t.clone() })
            .collect();
        factors.push(Factor::Pairwise { vars: (0, 1), table: pair.clone() });
        factors.push(Factor::Pairwise { vars: (1, 2), table: pair });
        let fg = FactorGraph::new(vec![(0, 2), (1, 2), (2, 2)], factors).unwrap();
        let config = BpConfig { tolerance: 1e-9, ..Default::default() };
        let bp = loopy_bp(&fg, &config);
        let exact = exact_marginals(&fg).unwrap();
        assert!(bp.converged);
        for (b, e) in bp.marginals.iter().flatten().zip(exact.iter().flatten()) {
            assert!((b - e).abs() < 1e-6);
        }
    }

    #[test]
    fn beliefs_stay_normalized_on_loopy_graphs() {
        let attractive = vec![0.7, 0.3, 0.3, 0.7];
        let mut factors = Vec::new();
        for v in 0..4 {
            factors.push(Factor::Unary {
                var: v,
                table: vec![0.5 + 0.1 * v as f64, 0.5 - 0.1 * v as f64],
            });
        }
        for (a, b) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            factors.push(Factor::Pairwise { vars: (a, b), table: attractive.clone() });
        }
        let fg = FactorGraph::new(vec![(0, 2); 4], factors).unwrap();
        let bp = loopy_bp(&fg, &BpConfig::default());
        for row in &bp.marginals {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let exact = exact_marginals(&fg).unwrap();
        for (b, e) in bp.marginals.iter().flatten().zip(exact.iter().flatten()) {
            assert!((b - e).abs() < 0.05);
        }
    }

    #[test]
    fn state_space_limit_enforced() {
        let fg = FactorGraph::new(vec![(0, 100); 5], vec![]).unwrap();
        assert!(matches!(
            exact_marginals(&fg),
            Err(MrfError::StateSpaceTooLarge(_))
        ));
    }

    #[test]
    fn factor_graph_rejects_repeated_variables() {
        assert!(matches!(
            FactorGraph::new(
                vec![(0, 2)],
                vec![Factor::Pairwise { vars: (0, 0), table: vec![1.0; 4] }]
            ),
            Err(MrfError::RepeatedVariable(_))
        ));
    }

    #[test]
    fn mean_log_factor_score_on_a_known_edge() {
        use PlaceCategory::{Corridor, Doorway};
        let g = labeled_graph(&[Corridor, Doorway], vec![(0, 1)]);
        let t = estimate_potentials(std::slice::from_ref(&g), 2, 0.0).unwrap();
        let labels = [(0usize, Corridor.index()), (1usize, Doorway.index())]
            .into_iter()
            .collect();
        let score = mean_log_factor_score(&g, &t, &labels).unwrap();
        // One edge with count 1, two nodes.
        assert!((score - 0.0f64).abs() < 1e-12);
        // A labeling never seen in training scores negative infinity
        // without smoothing.
        let labels = [(0usize, Corridor.index()), (1usize, Corridor.index())]
            .into_iter()
            .collect();
        let score = mean_log_factor_score(&g, &t, &labels).unwrap();
        assert_eq!(score, f64::NEG_INFINITY);
    }

    #[test]
    fn potential_table_round_trip() {
        let t = estimate_potentials(&[], 2, 0.5).unwrap();
        let dir = std::env::temp_dir().join("graphspn-mrf-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("potentials.json");
        t.save(&path).unwrap();
        assert_eq!(PotentialTable::load(&path).unwrap(), t);
    }
}
