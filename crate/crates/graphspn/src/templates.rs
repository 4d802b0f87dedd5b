//! Sub-graph templates and decomposition of a graph into disjoint,
//! template-isomorphic components.
//!
//! Matching embeds a template into the remaining nodes (the graph may carry
//! extra edges among the matched nodes). The search roots the template at
//! slot 0 and tries every remaining node as the root image in random order
//! with full backtracking behind each root, so a failed search proves no
//! embedding exists while still returning a uniformly randomized one when
//! several do.

use crate::data::TopoGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template {id}: node count {node_count} out of range 1..=5")]
    BadNodeCount { id: String, node_count: usize },
    #[error("template {id}: edge ({a}, {b}) invalid")]
    BadEdge { id: String, a: usize, b: usize },
    #[error("template {0} is not connected")]
    NotConnected(String),
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("no template matches the remaining nodes {0:?}; include a single-node template")]
    UncoveredNodes(Vec<usize>),
    #[error("decomposition is not a partition: node {0} covered {1} times")]
    NotAPartition(usize, usize),
}

/// A small connected graph used to partition arbitrary graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGraphTemplate {
    pub id: String,
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(rename = "rank")]
    pub complexity_rank: i32,
}

impl SubGraphTemplate {
    pub fn new(
        id: &str,
        node_count: usize,
        edges: Vec<(usize, usize)>,
        complexity_rank: i32,
    ) -> Result<Self, TemplateError> {
        let template = SubGraphTemplate { id: id.to_string(), node_count, edges, complexity_rank };
        template.check()?;
        Ok(template)
    }

    pub fn check(&self) -> Result<(), TemplateError> {
        if self.node_count == 0 || self.node_count > 5 {
            return Err(TemplateError::BadNodeCount {
                id: self.id.clone(),
                node_count: self.node_count,
            });
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &self.edges {
            let bad = a == b || a >= self.node_count || b >= self.node_count;
            if bad || !seen.insert((a.min(b), a.max(b))) {
                return Err(TemplateError::BadEdge { id: self.id.clone(), a, b });
            }
        }
        // Connectivity.
        let mut reach = vec![false; self.node_count];
        reach[0] = true;
        let mut frontier = vec![0usize];
        while let Some(s) = frontier.pop() {
            for &(a, b) in &self.edges {
                for (u, v) in [(a, b), (b, a)] {
                    if u == s && !reach[v] {
                        reach[v] = true;
                        frontier.push(v);
                    }
                }
            }
        }
        if reach.iter().any(|r| !r) {
            return Err(TemplateError::NotConnected(self.id.clone()));
        }
        Ok(())
    }

    fn slot_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Slot permutations mapping the edge set onto itself.
    pub fn automorphisms(&self) -> Vec<Vec<usize>> {
        let edges: BTreeSet<(usize, usize)> =
            self.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let mut perms = Vec::new();
        let mut perm: Vec<usize> = (0..self.node_count).collect();
        permute(&mut perm, 0, &mut |p| {
            let mapped: BTreeSet<(usize, usize)> = edges
                .iter()
                .map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b])))
                .collect();
            if mapped == edges {
                perms.push(p.to_vec());
            }
        });
        perms
    }
}

fn permute(items: &mut [usize], at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == items.len() {
        visit(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute(items, at + 1, visit);
        items.swap(at, i);
    }
}

/// The built-in template set, in decreasing complexity: a 5-node path, a
/// 4-node star, a 3-node path, an edge, and a single node.
pub fn default_template_set() -> Vec<SubGraphTemplate> {
    vec![
        SubGraphTemplate::new("PATH5", 5, vec![(0, 1), (1, 2), (2, 3), (3, 4)], 5).unwrap(),
        SubGraphTemplate::new("STAR4", 4, vec![(0, 1), (0, 2), (0, 3)], 4).unwrap(),
        SubGraphTemplate::new("PATH3", 3, vec![(0, 1), (1, 2)], 3).unwrap(),
        SubGraphTemplate::new("PATH2", 2, vec![(0, 1)], 2).unwrap(),
        SubGraphTemplate::new("SINGLE", 1, vec![], 1).unwrap(),
    ]
}

/// One matched component: `node_ids[s]` is the graph node bound to template
/// slot `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub template_id: String,
    pub node_ids: Vec<usize>,
}

/// A partition of a graph's nodes into template-isomorphic components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub components: Vec<Component>,
}

impl Decomposition {
    /// Checks disjointness and node coverage against the graph.
    pub fn validate_partition(&self, graph: &TopoGraph) -> Result<(), DecomposeError> {
        let mut covered: Vec<usize> = self
            .components
            .iter()
            .flat_map(|c| c.node_ids.iter().copied())
            .collect();
        covered.sort_unstable();
        for window in covered.windows(2) {
            if window[0] == window[1] {
                return Err(DecomposeError::NotAPartition(window[0], 2));
            }
        }
        let all = graph.node_ids();
        if covered != all {
            let missing = all.iter().copied().filter(|id| !covered.contains(id)).collect();
            return Err(DecomposeError::UncoveredNodes(missing));
        }
        Ok(())
    }
}

/// Searches the remaining nodes for a random embedding of the template.
///
/// Every remaining node is tried once, in random order, as the image of
/// template slot 0, with full backtracking and randomized branch order
/// behind it; `None` therefore means no embedding exists.
pub fn find_random_isomorphic_subgraph(
    graph: &TopoGraph,
    remaining: &BTreeSet<usize>,
    template: &SubGraphTemplate,
    rng: &mut ChaCha8Rng,
) -> Option<Component> {
    if template.node_count > remaining.len() {
        return None;
    }
    let slot_adj = template.slot_adjacency();
    // Assignment order: BFS from slot 0, each slot anchored to an earlier one.
    let mut order = vec![0usize];
    let mut anchor = vec![usize::MAX; template.node_count];
    while order.len() < template.node_count {
        for s in 0..template.node_count {
            if order.contains(&s) {
                continue;
            }
            if let Some(&a) = slot_adj[s].iter().find(|a| order.contains(a)) {
                anchor[s] = a;
                order.push(s);
                break;
            }
        }
    }

    let mut starts: Vec<usize> = remaining.iter().copied().collect();
    starts.shuffle(rng);
    let mut binding = vec![usize::MAX; template.node_count];
    for start in starts {
        binding[0] = start;
        if extend(graph, remaining, template, &slot_adj, &order, &anchor, &mut binding, 1, rng) {
            return Some(Component {
                template_id: template.id.clone(),
                node_ids: binding,
            });
        }
        binding = vec![usize::MAX; template.node_count];
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn extend(
    graph: &TopoGraph,
    remaining: &BTreeSet<usize>,
    template: &SubGraphTemplate,
    slot_adj: &[Vec<usize>],
    order: &[usize],
    anchor: &[usize],
    binding: &mut Vec<usize>,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let slot = order[depth];
    let anchored_at = binding[anchor[slot]];
    let mut candidates: Vec<usize> = graph
        .neighbors(anchored_at)
        .iter()
        .copied()
        .filter(|id| remaining.contains(id) && !binding.contains(id))
        .collect();
    candidates.shuffle(rng);
    'candidates: for cand in candidates {
        for &other in &slot_adj[slot] {
            let bound = binding[other];
            if bound != usize::MAX && !graph.has_edge(cand, bound) {
                continue 'candidates;
            }
        }
        binding[slot] = cand;
        if extend(graph, remaining, template, slot_adj, order, anchor, binding, depth + 1, rng) {
            return true;
        }
        binding[slot] = usize::MAX;
    }
    false
}

/// Greedy decomposition: templates in decreasing complexity, repeatedly
/// matched and removed until none fits, finishing with lower-rank templates.
pub fn decompose(
    graph: &TopoGraph,
    templates: &[SubGraphTemplate],
    rng: &mut ChaCha8Rng,
) -> Result<Decomposition, DecomposeError> {
    let mut by_rank: Vec<&SubGraphTemplate> = templates.iter().collect();
    by_rank.sort_by_key(|t| std::cmp::Reverse(t.complexity_rank));

    let mut remaining: BTreeSet<usize> = graph.node_ids().into_iter().collect();
    let mut components = Vec::new();
    for template in by_rank {
        while let Some(component) =
            find_random_isomorphic_subgraph(graph, &remaining, template, rng)
        {
            for id in &component.node_ids {
                remaining.remove(id);
            }
            components.push(component);
        }
    }
    if !remaining.is_empty() {
        return Err(DecomposeError::UncoveredNodes(remaining.into_iter().collect()));
    }
    Ok(Decomposition { components })
}

/// Runs [`decompose`] `count` times with independent seeds derived from the
/// caller's RNG. Decompositions of small graphs need not be distinct.
pub fn multi_decompose(
    graph: &TopoGraph,
    templates: &[SubGraphTemplate],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Decomposition>, DecomposeError> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut child = ChaCha8Rng::seed_from_u64(rng.gen());
        out.push(decompose(graph, templates, &mut child)?);
    }
    Ok(out)
}
