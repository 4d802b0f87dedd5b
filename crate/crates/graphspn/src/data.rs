//! Topological semantic maps: places, placeholders, navigability edges.
//!
//! Includes JSON (de)serialization, a synthetic office-floor generator
//! (corridor backbone, doorway-gated rooms), a simulator that replaces
//! groundtruth labels with noisy local-evidence distributions, and the
//! statistics used to audit the simulator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Number of semantic place categories.
pub const NUM_CATEGORIES: usize = 10;

/// Semantic place category. The integer encoding is alphabetical by code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlaceCategory {
    #[serde(rename = "1PO")]
    OnePersonOffice,
    #[serde(rename = "2PO")]
    TwoPersonOffice,
    #[serde(rename = "BA")]
    Bathroom,
    #[serde(rename = "CR")]
    Corridor,
    #[serde(rename = "DW")]
    Doorway,
    #[serde(rename = "KT")]
    Kitchen,
    #[serde(rename = "LAB")]
    Laboratory,
    #[serde(rename = "LO")]
    LargeOffice,
    #[serde(rename = "MR")]
    MeetingRoom,
    #[serde(rename = "UT")]
    UtilityRoom,
}

impl PlaceCategory {
    pub const ALL: [PlaceCategory; NUM_CATEGORIES] = [
        PlaceCategory::OnePersonOffice,
        PlaceCategory::TwoPersonOffice,
        PlaceCategory::Bathroom,
        PlaceCategory::Corridor,
        PlaceCategory::Doorway,
        PlaceCategory::Kitchen,
        PlaceCategory::Laboratory,
        PlaceCategory::LargeOffice,
        PlaceCategory::MeetingRoom,
        PlaceCategory::UtilityRoom,
    ];

    pub fn code(self) -> &'static str {
        match self {
            PlaceCategory::OnePersonOffice => "1PO",
            PlaceCategory::TwoPersonOffice => "2PO",
            PlaceCategory::Bathroom => "BA",
            PlaceCategory::Corridor => "CR",
            PlaceCategory::Doorway => "DW",
            PlaceCategory::Kitchen => "KT",
            PlaceCategory::Laboratory => "LAB",
            PlaceCategory::LargeOffice => "LO",
            PlaceCategory::MeetingRoom => "MR",
            PlaceCategory::UtilityRoom => "UT",
        }
    }

    pub fn from_code(code: &str) -> Option<PlaceCategory> {
        Self::ALL.iter().copied().find(|c| c.code() == code)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<PlaceCategory> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for PlaceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One place (or frontier placeholder) of a topological map.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoNode {
    pub id: usize,
    pub groundtruth: Option<PlaceCategory>,
    pub is_placeholder: bool,
    /// Local-evidence distribution over the categories; absent for
    /// placeholders by invariant.
    pub evidence: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateNodeId(usize),
    #[error("edge ({0}, {1}) is a self-loop")]
    SelfLoop(usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) references an unknown node")]
    UnknownEdgeEndpoint(usize, usize),
    #[error("graph is not connected (node {0} unreachable)")]
    Disconnected(usize),
    #[error("placeholder node {0} carries evidence")]
    PlaceholderWithEvidence(usize),
    #[error("node {node}: invalid evidence: {reason}")]
    BadEvidence { node: usize, reason: String },
    #[error("node {0} is missing a groundtruth label")]
    MissingGroundtruth(usize),
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
    #[error("malformed graph document: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A topological semantic map: simple, connected, undirected.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoGraph {
    pub id: String,
    pub building: String,
    nodes: Vec<TopoNode>,
    edges: Vec<(usize, usize)>,
    index: HashMap<usize, usize>,
    adjacency: Vec<Vec<usize>>,
    edge_set: HashSet<(usize, usize)>,
}

fn norm_edge(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl TopoGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(
        id: String,
        building: String,
        nodes: Vec<TopoNode>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut index = HashMap::new();
        for (pos, node) in nodes.iter().enumerate() {
            if index.insert(node.id, pos).is_some() {
                return Err(GraphError::DuplicateNodeId(node.id));
            }
            if node.is_placeholder && node.evidence.is_some() {
                return Err(GraphError::PlaceholderWithEvidence(node.id));
            }
            if let Some(ev) = &node.evidence {
                if ev.len() != NUM_CATEGORIES {
                    return Err(GraphError::BadEvidence {
                        node: node.id,
                        reason: format!("{} entries, expected {}", ev.len(), NUM_CATEGORIES),
                    });
                }
                if ev.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(GraphError::BadEvidence {
                        node: node.id,
                        reason: "entries must be finite and non-negative".into(),
                    });
                }
                let total: f64 = ev.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(GraphError::BadEvidence {
                        node: node.id,
                        reason: format!("sums to {total}, expected 1"),
                    });
                }
            }
        }
        let mut edge_set = HashSet::new();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in &edges {
            if a == b {
                return Err(GraphError::SelfLoop(a, b));
            }
            let (pa, pb) = match (index.get(&a), index.get(&b)) {
                (Some(&pa), Some(&pb)) => (pa, pb),
                _ => return Err(GraphError::UnknownEdgeEndpoint(a, b)),
            };
            if !edge_set.insert(norm_edge(a, b)) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            adjacency[pa].push(b);
            adjacency[pb].push(a);
        }
        for nbrs in adjacency.iter_mut() {
            nbrs.sort_unstable();
        }

        // Connectivity.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(pos) = stack.pop() {
            for &nbr in &adjacency[pos] {
                let npos = index[&nbr];
                if !seen[npos] {
                    seen[npos] = true;
                    stack.push(npos);
                }
            }
        }
        if let Some(pos) = seen.iter().position(|s| !s) {
            return Err(GraphError::Disconnected(nodes[pos].id));
        }

        Ok(TopoGraph { id, building, nodes, edges, index, adjacency, edge_set })
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node(&self, id: usize) -> Option<&TopoNode> {
        self.index.get(&id).map(|&pos| &self.nodes[pos])
    }

    /// Neighbor node ids, ascending.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[self.index[&id]]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_set.contains(&norm_edge(a, b))
    }

    /// Node ids, ascending.
    pub fn node_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Exchanges two groundtruth labels everywhere; topology untouched.
    /// Evidence vectors, when present, have the two entries exchanged too.
    pub fn swap_labels(&self, a: PlaceCategory, b: PlaceCategory) -> TopoGraph {
        let mut out = self.clone();
        for node in out.nodes.iter_mut() {
            node.groundtruth = match node.groundtruth {
                Some(c) if c == a => Some(b),
                Some(c) if c == b => Some(a),
                other => other,
            };
            if let Some(ev) = &mut node.evidence {
                ev.swap(a.index(), b.index());
            }
        }
        out
    }

    /// Marks the given nodes as placeholders, hiding their evidence (the
    /// groundtruth label is kept for scoring).
    pub fn demote_to_placeholders(&self, ids: &[usize]) -> Result<TopoGraph, GraphError> {
        let mut nodes = self.nodes.clone();
        let wanted: HashSet<usize> = ids.iter().copied().collect();
        for node in nodes.iter_mut() {
            if wanted.contains(&node.id) {
                node.is_placeholder = true;
                node.evidence = None;
            }
        }
        TopoGraph::new(self.id.clone(), self.building.clone(), nodes, self.edges.clone())
    }
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    id: String,
    building: String,
    nodes: Vec<NodeDoc>,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<PlaceCategory>,
    placeholder: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evidence: Option<Vec<f64>>,
}

impl TopoGraph {
    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            id: self.id.clone(),
            building: self.building.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    category: n.groundtruth,
                    placeholder: n.is_placeholder,
                    evidence: n.evidence.clone(),
                })
                .collect(),
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("graph document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDoc =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        let nodes = doc
            .nodes
            .into_iter()
            .map(|n| TopoNode {
                id: n.id,
                groundtruth: n.category,
                is_placeholder: n.placeholder,
                evidence: n.evidence,
            })
            .collect();
        TopoGraph::new(doc.id, doc.building, nodes, doc.edges)
    }
}

pub fn save_graph(graph: &TopoGraph, path: &Path) -> Result<(), GraphError> {
    std::fs::write(path, graph.to_json())?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<TopoGraph, GraphError> {
    TopoGraph::from_json(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Synthetic floors

/// Parameters of the synthetic floor generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthFloorParams {
    pub id: String,
    pub building: String,
    pub corridor_length: usize,
    pub rooms_per_corridor: usize,
    pub room_size_range: (usize, usize),
    /// Prior over the ten categories; corridor/doorway mass is redistributed
    /// over the eight room categories.
    pub category_priors: Vec<f64>,
    pub rng_seed: u64,
}

impl Default for SynthFloorParams {
    fn default() -> Self {
        SynthFloorParams {
            id: "floor".into(),
            building: "building".into(),
            corridor_length: 8,
            rooms_per_corridor: 4,
            room_size_range: (2, 4),
            category_priors: vec![0.1; NUM_CATEGORIES],
            rng_seed: 0,
        }
    }
}

fn sample_room_category(priors: &[f64], rng: &mut ChaCha8Rng) -> Result<PlaceCategory, GraphError> {
    let excluded = [PlaceCategory::Corridor, PlaceCategory::Doorway];
    let mass: f64 = PlaceCategory::ALL
        .iter()
        .filter(|c| !excluded.contains(c))
        .map(|c| priors[c.index()])
        .sum();
    if mass <= 0.0 {
        return Err(GraphError::DegenerateParams(
            "category priors assign no mass to room categories".into(),
        ));
    }
    let mut t = rng.gen_range(0.0..mass);
    for c in PlaceCategory::ALL {
        if excluded.contains(&c) {
            continue;
        }
        if t < priors[c.index()] {
            return Ok(c);
        }
        t -= priors[c.index()];
    }
    Ok(PlaceCategory::UtilityRoom)
}

/// Generates one synthetic office floor.
///
/// The corridor is a path of CR nodes. Each room is a connected cluster of a
/// single room category, reachable from the corridor only through its one DW
/// node. Rooms of three or more places get extra internal edges, so the
/// graph is loopy rather than tree-shaped.
pub fn generate_synthetic_floor(params: &SynthFloorParams) -> Result<TopoGraph, GraphError> {
    if params.corridor_length == 0 {
        return Err(GraphError::DegenerateParams("corridor_length must be positive".into()));
    }
    let (lo, hi) = params.room_size_range;
    if lo == 0 || lo > hi {
        return Err(GraphError::DegenerateParams(format!(
            "room_size_range ({lo}, {hi}) must satisfy 1 <= lo <= hi"
        )));
    }
    if params.category_priors.len() != NUM_CATEGORIES {
        return Err(GraphError::DegenerateParams(format!(
            "{} category priors, expected {}",
            params.category_priors.len(),
            NUM_CATEGORIES
        )));
    }
    let prior_total: f64 = params.category_priors.iter().sum();
    if (prior_total - 1.0).abs() > 1e-9 {
        return Err(GraphError::DegenerateParams(format!(
            "category priors sum to {prior_total}, expected 1"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let place = |cat: PlaceCategory, id: usize| TopoNode {
        id,
        groundtruth: Some(cat),
        is_placeholder: false,
        evidence: None,
    };

    for i in 0..params.corridor_length {
        nodes.push(place(PlaceCategory::Corridor, i));
        if i > 0 {
            edges.push((i - 1, i));
        }
    }

    let mut next_id = params.corridor_length;
    for _ in 0..params.rooms_per_corridor {
        let attach = rng.gen_range(0..params.corridor_length);
        let dw = next_id;
        nodes.push(place(PlaceCategory::Doorway, dw));
        edges.push((attach, dw));
        // Doorways are usually navigable from two adjacent corridor places,
        // closing a triangle on the backbone.
        if attach + 1 < params.corridor_length && rng.gen_bool(0.75) {
            edges.push((attach + 1, dw));
        }
        next_id += 1;

        let size = rng.gen_range(lo..=hi);
        let category = sample_room_category(&params.category_priors, &mut rng)?;
        let room: Vec<usize> = (0..size).map(|k| next_id + k).collect();
        next_id += size;
        for (k, &id) in room.iter().enumerate() {
            nodes.push(place(category, id));
            if k == 0 {
                edges.push((dw, id));
            } else {
                let parent = room[rng.gen_range(0..k)];
                edges.push((parent, id));
            }
        }
        // The doorway reaches a second place of larger rooms, and room
        // interiors are densely interconnected open space.
        if size >= 2 {
            let other = room[rng.gen_range(1..size)];
            edges.push((dw, other));
        }
        let mut have: HashSet<(usize, usize)> = edges.iter().map(|&(a, b)| norm_edge(a, b)).collect();
        for _ in 0..size {
            for _attempt in 0..4 {
                let a = room[rng.gen_range(0..size)];
                let b = room[rng.gen_range(0..size)];
                if a != b && !have.contains(&norm_edge(a, b)) {
                    have.insert(norm_edge(a, b));
                    edges.push((a, b));
                    break;
                }
            }
        }
    }

    TopoGraph::new(params.id.clone(), params.building.clone(), nodes, edges)
}

// ---------------------------------------------------------------------------
// Evidence noise

/// One row of the noise model: ranges for the two evidence-gap draws.
///
/// `gt_range` bounds the gap between the groundtruth probability and the
/// runner-up on correct nodes; `inc_range` bounds the gap between the
/// (wrong) top probability and the groundtruth on the flagged fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseLevel {
    pub level: u8,
    pub gt_range: (f64, f64),
    pub inc_range: (f64, f64),
    pub incorrect_fraction: f64,
}

/// The six default noise levels. The ranges are uniform intervals moment-
/// matched to the target mean/std of each gap statistic (mean = midpoint,
/// std = width / sqrt(12)), with lower bounds clamped at zero.
pub fn default_noise_levels() -> Vec<NoiseLevel> {
    // (level, gt mean, gt std, inc mean, inc std)
    const TARGETS: [(u8, f64, f64, f64, f64); 6] = [
        (1, 0.991, 0.001, 0.0, 0.0),
        (2, 0.913, 0.015, 0.085, 0.056),
        (3, 0.720, 0.040, 0.090, 0.061),
        (4, 0.434, 0.054, 0.092, 0.062),
        (5, 0.316, 0.030, 0.154, 0.055),
        (6, 0.154, 0.021, 0.217, 0.074),
    ];
    TARGETS
        .iter()
        .map(|&(level, gm, gs, im, is)| NoiseLevel {
            level,
            gt_range: moment_matched_range(gm, gs),
            inc_range: moment_matched_range(im, is),
            incorrect_fraction: 0.2,
        })
        .collect()
}

/// Uniform interval with the given mean and standard deviation, clamped to
/// non-negative probabilities.
pub fn moment_matched_range(mean: f64, std: f64) -> (f64, f64) {
    let half_width = std * 3.0f64.sqrt();
    ((mean - half_width).max(0.0), mean + half_width)
}

fn range_draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Fills `count` probabilities summing to `total`, each at most `cap`, from
/// a flat random simplex. Infeasible draws are projected towards the
/// centroid, which preserves the total.
fn simplex_fill(rng: &mut ChaCha8Rng, count: usize, total: f64, cap: f64) -> Vec<f64> {
    if count == 0 || total <= 0.0 {
        return vec![0.0; count];
    }
    let mut raw: Vec<f64> = (0..count).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let raw_total: f64 = raw.iter().sum();
    for x in raw.iter_mut() {
        *x *= total / raw_total;
    }
    let mean = total / count as f64;
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > cap && max > mean {
        let alpha = ((cap - mean) / (max - mean)).clamp(0.0, 1.0);
        for x in raw.iter_mut() {
            *x = mean + alpha * (*x - mean);
        }
    }
    raw
}

/// Evidence distribution for a node whose top class is the groundtruth,
/// with a fixed gap `g` to the runner-up.
fn correct_evidence(rng: &mut ChaCha8Rng, gt: usize, g: f64) -> Vec<f64> {
    let second_lo = (1.0 - g) / NUM_CATEGORIES as f64;
    let second_hi = (1.0 - g) / 2.0;
    let second = range_draw(rng, (second_lo, second_hi));
    let p_gt = g + second;
    let leftover = 1.0 - p_gt - second;
    let rest = simplex_fill(rng, NUM_CATEGORIES - 2, leftover, second);

    let mut others: Vec<usize> = (0..NUM_CATEGORIES).filter(|&k| k != gt).collect();
    others.shuffle(rng);
    let mut out = vec![0.0; NUM_CATEGORIES];
    out[gt] = p_gt;
    out[others[0]] = second;
    for (slot, &k) in others[1..].iter().enumerate() {
        out[k] = rest[slot];
    }
    out
}

/// Evidence distribution for a flagged node: a random wrong class takes the
/// top probability, `g` above the groundtruth.
fn incorrect_evidence(rng: &mut ChaCha8Rng, gt: usize, g: f64) -> Vec<f64> {
    let wrong_classes: Vec<usize> = (0..NUM_CATEGORIES).filter(|&k| k != gt).collect();
    let wrong = wrong_classes[rng.gen_range(0..wrong_classes.len())];
    let top_lo = g.max((1.0 + g) / NUM_CATEGORIES as f64);
    let top_hi = (1.0 + g) / 2.0;
    let p_top = range_draw(rng, (top_lo, top_hi));
    let p_gt = p_top - g;
    let leftover = 1.0 - p_top - p_gt;
    let rest = simplex_fill(rng, NUM_CATEGORIES - 2, leftover, p_top);

    let mut others: Vec<usize> = (0..NUM_CATEGORIES).filter(|&k| k != gt && k != wrong).collect();
    others.shuffle(rng);
    let mut out = vec![0.0; NUM_CATEGORIES];
    out[gt] = p_gt;
    out[wrong] = p_top;
    for (slot, &k) in others.iter().enumerate() {
        out[k] = rest[slot];
    }
    out
}

/// Attaches a noisy evidence distribution to every non-placeholder node.
///
/// Exactly `ceil(incorrect_fraction * N)` nodes (over the N non-placeholder
/// nodes) are flagged: a uniformly chosen wrong class receives the top
/// probability, `inc_range`-distributed above the groundtruth. Remaining
/// nodes keep the groundtruth on top with a `gt_range`-distributed lead over
/// the runner-up.
pub fn apply_noise(
    graph: &TopoGraph,
    level: &NoiseLevel,
    rng_seed: u64,
) -> Result<TopoGraph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = graph.clone();
    let mut targets: Vec<usize> = Vec::new();
    for (pos, node) in out.nodes.iter().enumerate() {
        if node.is_placeholder {
            continue;
        }
        if node.groundtruth.is_none() {
            return Err(GraphError::MissingGroundtruth(node.id));
        }
        targets.push(pos);
    }
    let n = targets.len();
    let n_incorrect = (((level.incorrect_fraction * n as f64).max(0.0) - 1e-9).ceil() as usize)
        .min(n);
    targets.shuffle(&mut rng);
    for (rank, &pos) in targets.iter().enumerate() {
        let gt = out.nodes[pos].groundtruth.expect("checked above").index();
        let evidence = if rank < n_incorrect {
            let g = range_draw(&mut rng, level.inc_range);
            incorrect_evidence(&mut rng, gt, g)
        } else {
            let g = range_draw(&mut rng, level.gt_range);
            correct_evidence(&mut rng, gt, g)
        };
        out.nodes[pos].evidence = Some(evidence);
    }
    Ok(out)
}

/// Gap statistics recomputed directly from evidence vectors, used to audit
/// the noise simulator.
#[derive(Debug, Clone, Default)]
pub struct NoiseStats {
    pub nodes: usize,
    pub incorrect: usize,
    pub mean_d_groundtruth: f64,
    pub std_d_groundtruth: f64,
    pub mean_d_incorrect: f64,
    pub std_d_incorrect: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Classifies a node as incorrect-flagged when some non-groundtruth class
/// reaches the groundtruth probability.
pub fn is_incorrect_evidence(evidence: &[f64], gt: PlaceCategory) -> bool {
    let p_gt = evidence[gt.index()];
    evidence
        .iter()
        .enumerate()
        .any(|(k, &p)| k != gt.index() && p >= p_gt)
}

/// Recomputes the two gap statistics over every evidence-carrying node.
pub fn noise_stats(graphs: &[&TopoGraph]) -> Result<NoiseStats, GraphError> {
    let mut d_gt = Vec::new();
    let mut d_inc = Vec::new();
    for graph in graphs {
        for node in graph.nodes() {
            let Some(evidence) = &node.evidence else { continue };
            let gt = node.groundtruth.ok_or(GraphError::MissingGroundtruth(node.id))?;
            let p_gt = evidence[gt.index()];
            let best_other = evidence
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != gt.index())
                .map(|(_, &p)| p)
                .fold(f64::NEG_INFINITY, f64::max);
            if best_other >= p_gt {
                d_inc.push(best_other - p_gt);
            } else {
                d_gt.push(p_gt - best_other);
            }
        }
    }
    let (mean_gt, std_gt) = mean_std(&d_gt);
    let (mean_inc, std_inc) = mean_std(&d_inc);
    Ok(NoiseStats {
        nodes: d_gt.len() + d_inc.len(),
        incorrect: d_inc.len(),
        mean_d_groundtruth: mean_gt,
        std_d_groundtruth: std_gt,
        mean_d_incorrect: mean_inc,
        std_d_incorrect: std_inc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> TopoGraph {
        let nodes = (0..n)
            .map(|id| TopoNode {
                id,
                groundtruth: Some(PlaceCategory::Corridor),
                is_placeholder: false,
                evidence: None,
            })
            .collect();
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        TopoGraph::new("p".into(), "b".into(), nodes, edges).unwrap()
    }

    #[test]
    fn category_encoding_is_alphabetical_by_code() {
        let codes: Vec<&str> = PlaceCategory::ALL.iter().map(|c| c.code()).collect();
        let mut sorted = codes.clone();
        sorted.sort_unstable();
        assert_eq!(codes, sorted);
        assert_eq!(PlaceCategory::OnePersonOffice.index(), 0);
        assert_eq!(PlaceCategory::UtilityRoom.index(), 9);
        for (i, c) in PlaceCategory::ALL.iter().enumerate() {
            assert_eq!(PlaceCategory::from_index(i), Some(*c));
            assert_eq!(PlaceCategory::from_code(c.code()), Some(*c));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("graphspn-data-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.json");
        let graph = path_graph(3);
        save_graph(&graph, &path).unwrap();
        let loaded = load_graph(&path).unwrap();
        assert_eq!(loaded, graph);
    }

    #[test]
    fn duplicate_edge_is_rejected_by_name() {
        let nodes = (0..2)
            .map(|id| TopoNode {
                id,
                groundtruth: None,
                is_placeholder: false,
                evidence: None,
            })
            .collect();
        let err =
            TopoGraph::new("g".into(), "b".into(), nodes, vec![(0, 1), (1, 0)]).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge(1, 0)));
    }

    #[test]
    fn placeholder_with_evidence_is_rejected() {
        let nodes = vec![
            TopoNode {
                id: 0,
                groundtruth: None,
                is_placeholder: true,
                evidence: Some(vec![0.1; NUM_CATEGORIES]),
            },
        ];
        let err = TopoGraph::new("g".into(), "b".into(), nodes, vec![]).unwrap_err();
        assert!(matches!(err, GraphError::PlaceholderWithEvidence(0)));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let nodes = (0..3)
            .map(|id| TopoNode {
                id,
                groundtruth: None,
                is_placeholder: false,
                evidence: None,
            })
            .collect();
        let err = TopoGraph::new("g".into(), "b".into(), nodes, vec![(0, 1)]).unwrap_err();
        assert!(matches!(err, GraphError::Disconnected(2)));
    }

    #[test]
    fn corridor_only_floor_is_a_cr_path() {
        let params = SynthFloorParams {
            corridor_length: 5,
            rooms_per_corridor: 0,
            ..Default::default()
        };
        let g = generate_synthetic_floor(&params).unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.edges().len(), 4);
        assert!(g
            .nodes()
            .iter()
            .all(|n| n.groundtruth == Some(PlaceCategory::Corridor)));
    }

    #[test]
    fn rooms_are_gated_by_exactly_one_doorway() {
        let params = SynthFloorParams {
            corridor_length: 6,
            rooms_per_corridor: 3,
            room_size_range: (2, 4),
            rng_seed: 11,
            ..Default::default()
        };
        let g = generate_synthetic_floor(&params).unwrap();
        for node in g.nodes() {
            let cat = node.groundtruth.unwrap();
            if cat == PlaceCategory::Corridor || cat == PlaceCategory::Doorway {
                continue;
            }
            // Room nodes may touch only their own room's category and DW.
            for &nbr in g.neighbors(node.id) {
                let ncat = g.node(nbr).unwrap().groundtruth.unwrap();
                assert!(ncat == cat || ncat == PlaceCategory::Doorway);
            }
        }
        // Doorways bridge corridor and room.
        for node in g.nodes() {
            if node.groundtruth == Some(PlaceCategory::Doorway) {
                let cats: Vec<PlaceCategory> = g
                    .neighbors(node.id)
                    .iter()
                    .map(|&n| g.node(n).unwrap().groundtruth.unwrap())
                    .collect();
                assert!(cats.contains(&PlaceCategory::Corridor));
                assert!(cats.iter().any(|&c| c != PlaceCategory::Corridor
                    && c != PlaceCategory::Doorway));
            }
        }
    }

    #[test]
    fn synthetic_floors_always_satisfy_graph_invariants() {
        for seed in 0..100 {
            let params = SynthFloorParams {
                corridor_length: 4 + (seed as usize % 8),
                rooms_per_corridor: seed as usize % 5,
                room_size_range: (1, 5),
                rng_seed: seed,
                ..Default::default()
            };
            // Construction runs the invariant checks.
            let g = generate_synthetic_floor(&params).unwrap();
            assert!(g.num_nodes() >= 4);
        }
    }

    #[test]
    fn degenerate_corridor_is_an_error() {
        let params = SynthFloorParams { corridor_length: 0, ..Default::default() };
        assert!(matches!(
            generate_synthetic_floor(&params),
            Err(GraphError::DegenerateParams(_))
        ));
    }

    #[test]
    fn swap_is_an_involution() {
        let params = SynthFloorParams { rng_seed: 5, ..Default::default() };
        let g = generate_synthetic_floor(&params).unwrap();
        let twice = g
            .swap_labels(PlaceCategory::Corridor, PlaceCategory::Doorway)
            .swap_labels(PlaceCategory::Corridor, PlaceCategory::Doorway);
        assert_eq!(twice, g);
    }

    #[test]
    fn swap_exchanges_histogram_counts() {
        let params = SynthFloorParams { rng_seed: 6, ..Default::default() };
        let g = generate_synthetic_floor(&params).unwrap();
        let count = |g: &TopoGraph, c: PlaceCategory| {
            g.nodes().iter().filter(|n| n.groundtruth == Some(c)).count()
        };
        let a = PlaceCategory::OnePersonOffice;
        let b = PlaceCategory::TwoPersonOffice;
        let swapped = g.swap_labels(a, b);
        assert_eq!(count(&g, a), count(&swapped, b));
        assert_eq!(count(&g, b), count(&swapped, a));
    }

    #[test]
    fn swap_relabels_the_corridor_backbone() {
        let params = SynthFloorParams {
            corridor_length: 5,
            rooms_per_corridor: 0,
            ..Default::default()
        };
        let g = generate_synthetic_floor(&params).unwrap();
        let swapped = g.swap_labels(PlaceCategory::Corridor, PlaceCategory::OnePersonOffice);
        assert!(swapped
            .nodes()
            .iter()
            .all(|n| n.groundtruth == Some(PlaceCategory::OnePersonOffice)));
    }

    #[test]
    fn noise_produces_normalized_evidence_with_exact_fraction() {
        let params = SynthFloorParams {
            corridor_length: 8,
            rooms_per_corridor: 4,
            rng_seed: 1,
            ..Default::default()
        };
        let g = generate_synthetic_floor(&params).unwrap();
        let levels = default_noise_levels();
        for level in &levels {
            let noisy = apply_noise(&g, level, 99).unwrap();
            let n = noisy.num_nodes();
            let expected_incorrect =
                ((level.incorrect_fraction * n as f64) - 1e-9).ceil() as usize;
            let mut flagged = 0;
            for node in noisy.nodes() {
                let ev = node.evidence.as_ref().unwrap();
                assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(ev.iter().all(|&p| p >= 0.0));
                if is_incorrect_evidence(ev, node.groundtruth.unwrap()) {
                    flagged += 1;
                }
            }
            assert_eq!(flagged, expected_incorrect, "level {}", level.level);
        }
    }

    #[test]
    fn zero_incorrect_fraction_keeps_groundtruth_on_top() {
        let g = path_graph(10);
        let level = NoiseLevel {
            level: 2,
            gt_range: (0.3, 0.5),
            inc_range: (0.0, 0.2),
            incorrect_fraction: 0.0,
        };
        let noisy = apply_noise(&g, &level, 3).unwrap();
        for node in noisy.nodes() {
            let ev = node.evidence.as_ref().unwrap();
            let gt = node.groundtruth.unwrap().index();
            let argmax = ev
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(argmax, gt);
        }
    }

    #[test]
    fn noise_needs_groundtruth() {
        let nodes = vec![
            TopoNode { id: 0, groundtruth: None, is_placeholder: false, evidence: None },
        ];
        let g = TopoGraph::new("g".into(), "b".into(), nodes, vec![]).unwrap();
        let level = &default_noise_levels()[0];
        assert!(matches!(
            apply_noise(&g, level, 0),
            Err(GraphError::MissingGroundtruth(0))
        ));
    }

    #[test]
    fn stats_on_hand_built_evidence() {
        // Correct node: gap 0.6 - 0.3 = 0.3.
        let mut correct = vec![0.0; NUM_CATEGORIES];
        correct[PlaceCategory::Corridor.index()] = 0.6;
        correct[PlaceCategory::Doorway.index()] = 0.3;
        correct[PlaceCategory::Kitchen.index()] = 0.1;
        // Flagged node: 0.5 on a wrong class, 0.4 on groundtruth.
        let mut flagged = vec![0.0; NUM_CATEGORIES];
        flagged[PlaceCategory::Doorway.index()] = 0.5;
        flagged[PlaceCategory::Corridor.index()] = 0.4;
        flagged[PlaceCategory::Kitchen.index()] = 0.1;
        let nodes = vec![
            TopoNode {
                id: 0,
                groundtruth: Some(PlaceCategory::Corridor),
                is_placeholder: false,
                evidence: Some(correct),
            },
            TopoNode {
                id: 1,
                groundtruth: Some(PlaceCategory::Corridor),
                is_placeholder: false,
                evidence: Some(flagged),
            },
        ];
        let g = TopoGraph::new("g".into(), "b".into(), nodes, vec![(0, 1)]).unwrap();
        let stats = noise_stats(&[&g]).unwrap();
        assert_eq!(stats.nodes, 2);
        assert_eq!(stats.incorrect, 1);
        assert!((stats.mean_d_groundtruth - 0.3).abs() < 1e-12);
        assert!((stats.mean_d_incorrect - 0.1).abs() < 1e-12);
    }

    #[test]
    fn moment_matched_level_four_range() {
        let levels = default_noise_levels();
        let l4 = &levels[3];
        assert!((l4.gt_range.0 - 0.3405).abs() < 1e-3);
        assert!((l4.gt_range.1 - 0.5275).abs() < 1e-3);
        assert_eq!(levels[0].inc_range, (0.0, 0.0));
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let params = SynthFloorParams { rng_seed: 4, ..Default::default() };
        let g = generate_synthetic_floor(&params).unwrap();
        let level = &default_noise_levels()[3];
        assert_eq!(
            apply_noise(&g, level, 17).unwrap(),
            apply_noise(&g, level, 17).unwrap()
        );
    }
}
