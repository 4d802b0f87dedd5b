//! JSON serialization of networks.
//!
//! Document shape:
//!
//! ```json
//! {
//!   "variables": [{"id": 0, "cardinality": 10}],
//!   "nodes": [
//!     {"id": 0, "kind": "indicator", "var": 0, "value": 3},
//!     {"id": 1, "kind": "sum", "children": [0], "weights": [1.0]},
//!     {"id": 2, "kind": "product", "children": [1]}
//!   ],
//!   "root": 2
//! }
//! ```
//!
//! Node ids are dense and written in ascending order, so save/load
//! round-trips are byte-stable.

use super::{CategoricalVariable, NodeId, Spn, SpnError, SpnNode, VarId};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct SpnDoc {
    variables: Vec<VarDoc>,
    nodes: Vec<NodeDoc>,
    root: usize,
}

#[derive(Serialize, Deserialize)]
struct VarDoc {
    id: usize,
    cardinality: usize,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<usize>,
}

impl Spn {
    pub fn to_json(&self) -> String {
        let doc = SpnDoc {
            variables: self
                .variables()
                .iter()
                .map(|v| VarDoc { id: v.id.0, cardinality: v.cardinality })
                .collect(),
            nodes: self
                .nodes()
                .iter()
                .enumerate()
                .map(|(id, node)| match node {
                    SpnNode::Indicator { var, value } => NodeDoc {
                        id,
                        kind: "indicator".into(),
                        children: None,
                        weights: None,
                        var: Some(var.0),
                        value: Some(*value),
                    },
                    SpnNode::Sum { children } => NodeDoc {
                        id,
                        kind: "sum".into(),
                        children: Some(children.iter().map(|&(c, _)| c.0).collect()),
                        weights: Some(children.iter().map(|&(_, w)| w).collect()),
                        var: None,
                        value: None,
                    },
                    SpnNode::Product { children } => NodeDoc {
                        id,
                        kind: "product".into(),
                        children: Some(children.iter().map(|&c| c.0).collect()),
                        weights: None,
                        var: None,
                        value: None,
                    },
                })
                .collect(),
            root: self.root().0,
        };
        serde_json::to_string_pretty(&doc).expect("network document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SpnError> {
        let doc: SpnDoc =
            serde_json::from_str(text).map_err(|e| SpnError::Format(e.to_string()))?;
        let variables: Vec<CategoricalVariable> = doc
            .variables
            .iter()
            .map(|v| CategoricalVariable { id: VarId(v.id), cardinality: v.cardinality })
            .collect();
        let mut nodes = vec![None; doc.nodes.len()];
        for nd in doc.nodes {
            let slot = nodes
                .get_mut(nd.id)
                .ok_or_else(|| SpnError::Format(format!("node id {} not dense", nd.id)))?;
            if slot.is_some() {
                return Err(SpnError::Format(format!("duplicate node id {}", nd.id)));
            }
            let node = match nd.kind.as_str() {
                "indicator" => SpnNode::Indicator {
                    var: VarId(nd.var.ok_or_else(|| {
                        SpnError::Format(format!("indicator {} missing var", nd.id))
                    })?),
                    value: nd.value.ok_or_else(|| {
                        SpnError::Format(format!("indicator {} missing value", nd.id))
                    })?,
                },
                "sum" => {
                    let children = nd.children.ok_or_else(|| {
                        SpnError::Format(format!("sum {} missing children", nd.id))
                    })?;
                    let weights = nd.weights.ok_or_else(|| {
                        SpnError::Format(format!("sum {} missing weights", nd.id))
                    })?;
                    if children.len() != weights.len() {
                        return Err(SpnError::Format(format!(
                            "sum {}: {} children but {} weights",
                            nd.id,
                            children.len(),
                            weights.len()
                        )));
                    }
                    SpnNode::Sum {
                        children: children
                            .into_iter()
                            .map(NodeId)
                            .zip(weights)
                            .collect(),
                    }
                }
                "product" => SpnNode::Product {
                    children: nd
                        .children
                        .ok_or_else(|| {
                            SpnError::Format(format!("product {} missing children", nd.id))
                        })?
                        .into_iter()
                        .map(NodeId)
                        .collect(),
                },
                other => {
                    return Err(SpnError::Format(format!(
                        "node {}: unknown kind {:?}",
                        nd.id, other
                    )))
                }
            };
            *slot = Some(node);
        }
        let nodes: Vec<SpnNode> = nodes
            .into_iter()
            .enumerate()
            .map(|(id, n)| n.ok_or_else(|| SpnError::Format(format!("node id {id} missing"))))
            .collect::<Result<_, _>>()?;
        Spn::new(variables, nodes, NodeId(doc.root))
    }

    pub fn save(&self, path: &Path) -> Result<(), SpnError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SpnError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::naive_bayes_mixture;
    use super::*;

    #[test]
    fn json_round_trip_is_byte_stable() {
        let spn = naive_bayes_mixture();
        let text = spn.to_json();
        let reloaded = Spn::from_json(&text).unwrap();
        assert_eq!(reloaded.to_json(), text);
        assert_eq!(reloaded, spn);
    }

    #[test]
    fn malformed_document_is_rejected() {
        assert!(matches!(Spn::from_json("{"), Err(SpnError::Format(_))));
        let missing_weights = r#"{
            "variables": [{"id": 0, "cardinality": 2}],
            "nodes": [
                {"id": 0, "kind": "indicator", "var": 0, "value": 0},
                {"id": 1, "kind": "sum", "children": [0]}
            ],
            "root": 1
        }"#;
        assert!(matches!(
            Spn::from_json(missing_weights),
            Err(SpnError::Format(_))
        ));
    }
}
