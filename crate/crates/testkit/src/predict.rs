//! Random decision trees and a node-walking oracle for the GEMM lowering.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tensql::kernels::BackendKind;
use tensql::ml::{tensorize, tree_leaves, ModelSpec, TensorizedModel, TreeModel, TreeNode};
use tensql::Tensor;

/// Thresholds and features come from small grids so rows often hit a
/// threshold exactly.
const GRID: [f64; 9] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0];

fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>, depth: usize, features: usize) -> usize {
    let id = nodes.len();
    if depth == 0 || rng.gen_bool(0.25) {
        nodes.push(TreeNode::Leaf {
            leaf: rng.gen_range(-100..100) as f64,
        });
        return id;
    }
    nodes.push(TreeNode::Leaf { leaf: 0.0 });
    let feature = rng.gen_range(0..features);
    let threshold = GRID[rng.gen_range(0..GRID.len())];
    let left = grow(rng, nodes, depth - 1, features);
    let right = grow(rng, nodes, depth - 1, features);
    nodes[id] = TreeNode::Internal {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// A random tree of depth at most `max_depth` over `features` inputs.
pub fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize, features: usize) -> TreeModel {
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, max_depth, features);
    TreeModel::new(nodes, Some(features)).expect("generated trees are valid")
}

/// Leaf number (rank among leaves in node order) reached by walking `x`.
pub fn walk(nodes: &[TreeNode], x: &[f64]) -> usize {
    let mut i = 0;
    while let TreeNode::Internal {
        feature,
        threshold,
        left,
        right,
    } = nodes[i]
    {
        i = if x[feature] < threshold { left } else { right };
    }
    nodes[..i].iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
}

pub fn leaf_value(nodes: &[TreeNode], x: &[f64]) -> f64 {
    let rank = walk(nodes, x);
    nodes
        .iter()
        .filter_map(|n| match n {
            TreeNode::Leaf { leaf } => Some(*leaf),
            TreeNode::Internal { .. } => None,
        })
        .nth(rank)
        .expect("leaf rank in range")
}

pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, features: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..features)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        GRID[rng.gen_range(0..GRID.len())]
                    } else {
                        rng.gen_range(-3.0..4.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// `trees` random trees of depth ≤ `max_depth`, each over `rows` rows:
/// exactly one leaf must match per row, and GEMM leaf numbers must equal
/// the walked ones exactly, on both backends.
pub fn check_trees(trees: usize, rows: usize, max_depth: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trees {
        let features = rng.gen_range(1..5);
        let tree = random_tree(&mut rng, max_depth, features);
        let data = random_rows(&mut rng, rows, features);
        let x = Tensor::new(data.concat(), rows, features).expect("row-major features");
        let m = match tensorize(&ModelSpec::Tree(tree.clone())) {
            TensorizedModel::Tree(m) => m,
            TensorizedModel::Constant(v) if tree.nodes().len() == 1 => {
                if v != leaf_value(tree.nodes(), &data[0]) {
                    return Err(format!("tree {t}: constant {v} differs from its only leaf"));
                }
                continue;
            }
            other => return Err(format!("tree {t}: unexpected lowering {other:?}")),
        };
        let expect: Vec<i64> = data.iter().map(|r| walk(tree.nodes(), r) as i64).collect();
        for backend in BackendKind::all() {
            let (leaf, mask) = tree_leaves(backend.create(), &m, &x).map_err(|e| e.to_string())?;
            let got = leaf.as_i64().map_err(|e| e.to_string())?;
            let mask = mask.as_bool().map_err(|e| e.to_string())?;
            let l_n = m.leaf_count();
            if let Some(i) = (0..rows).find(|&i| mask[i * l_n..(i + 1) * l_n].iter().filter(|&&b| b).count() != 1) {
                return Err(format!("tree {t} ({backend}): row {i} {:?} matches {:?}", data[i], &mask[i * l_n..(i + 1) * l_n]));
            }
            if let Some(i) = (0..rows).find(|&i| got[i] != expect[i]) {
                return Err(format!(
                    "tree {t} (depth {}, {} nodes, {backend}): row {i} {:?} reached leaf {} but walking gives {}",
                    tree.depth(),
                    tree.nodes().len(),
                    data[i],
                    got[i],
                    expect[i]
                ));
            }
        }
    }
    Ok(())
}
