//! DOT rendering of semantic maps for visual audits.

use graphspn::data::{PlaceCategory, TopoGraph};
use std::collections::BTreeMap;
use std::fmt::Write;

/// One fill color per category, in encoding order.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#aec7e8", "#9467bd", "#d62728", "#ff7f0e", "#2ca02c", "#8c564b", "#e377c2",
    "#bcbd22", "#17becf",
];

/// Renders the graph as DOT. Nodes are colored by the maximum-posterior
/// label when `posteriors` are given (with the top probability in the
/// label), otherwise by the groundtruth category; unlabeled nodes stay gray.
pub fn export_dot(graph: &TopoGraph, posteriors: Option<&BTreeMap<usize, Vec<f64>>>) -> String {
    let mut out = String::new();
    out.push_str("graph semantic_map {\n");
    out.push_str("  node [shape=circle style=filled fontsize=10];\n");
    let mut ids = graph.node_ids();
    ids.sort_unstable();
    for id in ids {
        let node = graph.node(id).expect("listed node");
        let posterior = posteriors.and_then(|p| p.get(&id));
        let (label, color) = match posterior {
            Some(row) => {
                let mut best = 0;
                for (k, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = k;
                    }
                }
                let code = PlaceCategory::from_index(best)
                    .map(|c| c.code().to_string())
                    .unwrap_or_else(|| best.to_string());
                (format!("{id} {code} {:.2}", row[best]), PALETTE[best % PALETTE.len()])
            }
            None => match node.groundtruth {
                Some(category) => (
                    format!("{id} {}", category.code()),
                    PALETTE[category.index()],
                ),
                None => (format!("{id} ?"), "#cccccc"),
            },
        };
        let style = if node.is_placeholder { ",dashed" } else { "" };
        writeln!(
            out,
            "  n{id} [label=\"{label}\" fillcolor=\"{color}\" style=\"filled{style}\"];"
        )
        .expect("write to string");
    }
    let mut edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    for (a, b) in edges {
        writeln!(out, "  n{a} -- n{b};").expect("write to string");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphspn::data::TopoNode;

    fn graph() -> TopoGraph {
        let nodes = vec![
            TopoNode {
                id: 0,
                groundtruth: Some(PlaceCategory::Corridor),
                is_placeholder: false,
                evidence: None,
            },
            TopoNode { id: 1, groundtruth: None, is_placeholder: true, evidence: None },
        ];
        TopoGraph::new("g".into(), "b".into(), nodes, vec![(0, 1)]).unwrap()
    }

    /// Minimal structural check of the emitted DOT: one graph block, node
    /// statements with bracketed attributes, edge statements with `--`.
    fn assert_wellformed(text: &str) {
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("graph semantic_map {"));
        let mut depth = 1;
        for line in lines {
            let line = line.trim();
            if line == "}" {
                depth -= 1;
                continue;
            }
            assert!(depth == 1, "statement outside the graph block: {line}");
            let is_attr = line.starts_with("node [");
            let is_node = line.starts_with('n')
                && line.contains('[')
                && line.ends_with("];")
                && !line.contains("--");
            let is_edge = line.starts_with('n') && line.contains(" -- ") && line.ends_with(';');
            assert!(is_attr || is_node || is_edge, "unrecognized statement: {line}");
        }
        assert_eq!(depth, 0);
    }

    #[test]
    fn plain_graph_renders_every_node_and_edge() {
        let text = export_dot(&graph(), None);
        assert_wellformed(&text);
        assert_eq!(text.matches("label=").count(), 2);
        assert!(text.contains("n0 -- n1;"));
        assert!(text.contains("dashed"));
    }

    #[test]
    fn posteriors_change_colors_and_labels() {
        let mut posteriors = BTreeMap::new();
        let mut row = vec![0.0; 10];
        row[PlaceCategory::Kitchen.index()] = 0.93;
        row[PlaceCategory::Corridor.index()] = 0.07;
        posteriors.insert(0, row);
        let text = export_dot(&graph(), Some(&posteriors));
        assert_wellformed(&text);
        assert!(text.contains("0 KT 0.93"));
    }
}
