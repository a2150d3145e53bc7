//! Models as matrices.
//!
//! A tree with `I` internal nodes and `L` leaves over `F` features becomes
//!
//! * `A` (`F x I`): `A[f, i] = 1` iff internal node `i` tests feature `f`,
//! * `B` (`1 x I`): thresholds,
//! * `C` (`I x L`): `+1` if leaf `l` is in the left subtree of `i`, `-1` if in
//!   the right subtree, `0` otherwise,
//! * `D` (`1 x L`): number of `+1` entries in column `l` of `C`,
//! * `E` (`L x 1`): leaf values.
//!
//! With `S = [X A < B]` as 0/1, row `r` reaches leaf `l` iff `(S C)[r, l] == D[l]`.
//! Internal nodes and leaves are numbered in node order.

use super::{ModelSpec, TreeModel, TreeNode};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TreeMatrices {
    pub a: Tensor,
    pub b: Tensor,
    pub c: Tensor,
    pub d: Tensor,
    pub e: Tensor,
}

impl TreeMatrices {
    pub fn internal_count(&self) -> usize {
        self.a.width()
    }

    pub fn leaf_count(&self) -> usize {
        self.e.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorizedModel {
    /// `w` is `F x 1`.
    Linear { w: Tensor, b: f64, logistic: bool },
    Tree(TreeMatrices),
    /// A tree that is a single leaf.
    Constant(f64),
}

pub fn tensorize(spec: &ModelSpec) -> TensorizedModel {
    match spec {
        ModelSpec::Linear { weights, bias } | ModelSpec::Logistic { weights, bias } => TensorizedModel::Linear {
            w: Tensor::new(weights.clone(), weights.len(), 1).expect("F x 1"),
            b: *bias,
            logistic: matches!(spec, ModelSpec::Logistic { .. }),
        },
        ModelSpec::Tree(t) => tensorize_tree(t),
    }
}

fn subtree_leaves(nodes: &[TreeNode], root: usize, out: &mut Vec<usize>) {
    match nodes[root] {
        TreeNode::Leaf { .. } => out.push(root),
        TreeNode::Internal { left, right, .. } => {
            subtree_leaves(nodes, left, out);
            subtree_leaves(nodes, right, out);
        }
    }
}

fn tensorize_tree(t: &TreeModel) -> TensorizedModel {
    let nodes = t.nodes();
    let internal = t.internal_nodes();
    let leaves = t.leaves();
    if internal.is_empty() {
        let TreeNode::Leaf { leaf } = nodes[0] else { unreachable!() };
        return TensorizedModel::Constant(leaf);
    }
    let (f, i_n, l_n) = (t.num_features(), internal.len(), leaves.len());
    let leaf_pos = |node: usize| leaves.binary_search(&node).expect("leaf");
    let mut a = vec![0.0; f * i_n];
    let mut b = vec![0.0; i_n];
    let mut c = vec![0.0; i_n * l_n];
    for (i, &node) in internal.iter().enumerate() {
        let TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } = nodes[node]
        else {
            unreachable!()
        };
        a[feature * i_n + i] = 1.0;
        b[i] = threshold;
        for (child, sign) in [(left, 1.0), (right, -1.0)] {
            let mut under = Vec::new();
            subtree_leaves(nodes, child, &mut under);
            for leaf in under {
                c[i * l_n + leaf_pos(leaf)] = sign;
            }
        }
    }
    let d: Vec<f64> = (0..l_n)
        .map(|l| (0..i_n).filter(|&i| c[i * l_n + l] == 1.0).count() as f64)
        .collect();
    let e: Vec<f64> = leaves
        .iter()
        .map(|&n| match nodes[n] {
            TreeNode::Leaf { leaf } => leaf,
            TreeNode::Internal { .. } => unreachable!(),
        })
        .collect();
    TensorizedModel::Tree(TreeMatrices {
        a: Tensor::new(a, f, i_n).expect("F x I"),
        b: Tensor::new(b, 1, i_n).expect("1 x I"),
        c: Tensor::new(c, i_n, l_n).expect("I x L"),
        d: Tensor::new(d, 1, l_n).expect("1 x L"),
        e: Tensor::new(e, l_n, 1).expect("L x 1"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::load_model;

    #[test]
    fn depth_one_tree_matrices() {
        let m = load_model(
            r#"{"kind":"tree","nodes":[{"feature":0,"threshold":5.0,"left":1,"right":2},{"leaf":10.0},{"leaf":20.0}]}"#,
        )
        .unwrap();
        let TensorizedModel::Tree(t) = tensorize(&m) else { panic!() };
        assert_eq!(t.a.as_f64().unwrap(), [1.0]);
        assert_eq!(t.b.as_f64().unwrap(), [5.0]);
        assert_eq!(t.c.as_f64().unwrap(), [1.0, -1.0]);
        assert_eq!(t.d.as_f64().unwrap(), [1.0, 0.0]);
        assert_eq!(t.e.as_f64().unwrap(), [10.0, 20.0]);
    }

    #[test]
    fn single_leaf_is_constant() {
        let m = load_model(r#"{"kind":"tree","nodes":[{"leaf":2.5}]}"#).unwrap();
        assert_eq!(tensorize(&m), TensorizedModel::Constant(2.5));
    }
}
