//! User models loaded from JSON.
//!
//! ```json
//! {"kind": "linear",   "weights": [2.0], "bias": 1.0}
//! {"kind": "logistic", "weights": [0.5, -1.0], "bias": 0.0}
//! {"kind": "tree", "nodes": [
//!     {"feature": 0, "threshold": 5.0, "left": 1, "right": 2},
//!     {"leaf": 10.0},
//!     {"leaf": 20.0}]}
//! ```
//!
//! Tree nodes are addressed by index with the root at 0. An internal node
//! sends a row left iff `x[feature] < threshold`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel {
    nodes: Vec<TreeNode>,
    num_features: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Linear { weights: Vec<f64>, bias: f64 },
    Logistic { weights: Vec<f64>, bias: f64 },
    Tree(TreeModel),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawModel {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    #[serde(alias = "decision_tree_regressor")]
    Tree {
        nodes: Vec<TreeNode>,
        #[serde(default)]
        num_features: Option<usize>,
    },
}

fn model_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Model {
        path: path.into(),
        msg: msg.into(),
    }
}

fn check_weights(weights: &[f64], bias: f64) -> Result<()> {
    if weights.is_empty() {
        return Err(model_err("weights", "must contain at least one weight"));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(model_err(format!("weights[{i}]"), "must be finite"));
    }
    if !bias.is_finite() {
        return Err(model_err("bias", "must be finite"));
    }
    Ok(())
}

impl TreeModel {
    /// Validates that `nodes` form a single binary tree rooted at index 0.
    pub fn new(nodes: Vec<TreeNode>, num_features: Option<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(model_err("nodes", "a tree needs at least one node"));
        }
        let mut parent: Vec<Option<usize>> = vec![None; nodes.len()];
        let mut max_feature = None::<usize>;
        for (i, node) in nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf { leaf } => {
                    if !leaf.is_finite() {
                        return Err(model_err(format!("nodes[{i}].leaf"), "must be finite"));
                    }
                }
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if threshold.is_nan() {
                        return Err(model_err(format!("nodes[{i}].threshold"), "must not be NaN"));
                    }
                    max_feature = Some(max_feature.map_or(*feature, |m| m.max(*feature)));
                    for (side, &child) in [("left", left), ("right", right)] {
                        let path = format!("nodes[{i}].{side}");
                        if child >= nodes.len() {
                            return Err(model_err(path, format!("child index {child} out of range")));
                        }
                        if child == 0 {
                            return Err(model_err(path, "the root cannot be a child"));
                        }
                        if let Some(p) = parent[child] {
                            return Err(model_err(
                                path,
                                format!("node {child} already has parent {p}"),
                            ));
                        }
                        parent[child] = Some(i);
                    }
                }
            }
        }
        // Every node must hang off the root; with unique parents this also rules out cycles.
        let mut reached = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut reached[i], true) {
                return Err(model_err(format!("nodes[{i}]"), "cycle detected"));
            }
            if let TreeNode::Internal { left, right, .. } = nodes[i] {
                stack.push(left);
                stack.push(right);
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(model_err(format!("nodes[{i}]"), "not reachable from the root"));
        }
        let needed = max_feature.map_or(0, |m| m + 1);
        let num_features = match num_features {
            Some(f) if f < needed => {
                return Err(model_err(
                    "num_features",
                    format!("{f} features declared but feature {} is used", needed - 1),
                ))
            }
            Some(f) => f,
            None => needed,
        };
        Ok(TreeModel {
            nodes,
            num_features,
        })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Node indices of internal nodes, in node order.
    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], TreeNode::Internal { .. }))
            .collect()
    }

    /// Node indices of leaves, in node order. Leaf numbering elsewhere is
    /// the position in this list.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i], TreeNode::Leaf { .. }))
            .collect()
    }

    /// Leaf number reached by walking from the root.
    pub fn leaf_by_traversal(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => break,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
        self.leaves().binary_search(&i).expect("leaf index")
    }

    pub fn predict_by_traversal(&self, x: &[f64]) -> f64 {
        let leaf = self.leaves()[self.leaf_by_traversal(x)];
        match self.nodes[leaf] {
            TreeNode::Leaf { leaf } => leaf,
            TreeNode::Internal { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

impl ModelSpec {
    pub fn num_features(&self) -> usize {
        match self {
            ModelSpec::Linear { weights, .. } | ModelSpec::Logistic { weights, .. } => weights.len(),
            ModelSpec::Tree(t) => t.num_features(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::Logistic { .. } => "logistic",
            ModelSpec::Tree(_) => "tree",
        }
    }

    /// Row-at-a-time prediction by direct evaluation.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            ModelSpec::Linear { weights, bias } => dot(weights, x) + bias,
            ModelSpec::Logistic { weights, bias } => {
                let z = dot(weights, x) + bias;
                1.0 / (1.0 + (-z).exp())
            }
            ModelSpec::Tree(t) => t.predict_by_traversal(x),
        }
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// Parses and validates a model document.
pub fn load_model(json: &str) -> Result<ModelSpec> {
    let raw: RawModel = serde_json::from_str(json).map_err(|e| model_err("$", e.to_string()))?;
    match raw {
        RawModel::Linear { weights, bias } => {
            check_weights(&weights, bias)?;
            Ok(ModelSpec::Linear { weights, bias })
        }
        RawModel::Logistic { weights, bias } => {
            check_weights(&weights, bias)?;
            Ok(ModelSpec::Logistic { weights, bias })
        }
        RawModel::Tree {
            nodes,
            num_features,
        } => Ok(ModelSpec::Tree(TreeModel::new(nodes, num_features)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_linear() {
        let m = load_model(r#"{"kind":"linear","weights":[2.0],"bias":1.0}"#).unwrap();
        assert_eq!(m.num_features(), 1);
        assert_eq!(m.predict_row(&[4.0]), 9.0);
    }

    #[test]
    fn rejects_dangling_child() {
        let json = r#"{"kind":"tree","nodes":[{"feature":0,"threshold":1.0,"left":1,"right":5},{"leaf":1.0}]}"#;
        match load_model(json) {
            Err(Error::Model { path, .. }) => assert_eq!(path, "nodes[0].right"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_empty_logistic_weights() {
        let err = load_model(r#"{"kind":"logistic","weights":[],"bias":0.0}"#).unwrap_err();
        assert!(matches!(err, Error::Model { ref path, .. } if path == "weights"));
    }

    #[test]
    fn rejects_shared_children_and_orphans() {
        let shared = r#"{"kind":"tree","nodes":[
            {"feature":0,"threshold":1.0,"left":1,"right":2},
            {"feature":0,"threshold":0.0,"left":2,"right":3},
            {"leaf":1.0},{"leaf":2.0}]}"#;
        assert!(load_model(shared).is_err());
        let orphan = r#"{"kind":"tree","nodes":[{"leaf":1.0},{"leaf":2.0}]}"#;
        assert!(load_model(orphan).is_err());
    }

    #[test]
    fn single_leaf_is_a_constant() {
        let m = load_model(r#"{"kind":"tree","nodes":[{"leaf":3.5}]}"#).unwrap();
        assert_eq!(m.num_features(), 0);
        assert_eq!(m.predict_row(&[]), 3.5);
    }

    #[test]
    fn strict_less_than_goes_left() {
        let m = load_model(
            r#"{"kind":"tree","nodes":[{"feature":0,"threshold":5.0,"left":1,"right":2},{"leaf":10.0},{"leaf":20.0}]}"#,
        )
        .unwrap();
        assert_eq!(m.predict_row(&[4.999]), 10.0);
        assert_eq!(m.predict_row(&[5.0]), 20.0);
    }
}
