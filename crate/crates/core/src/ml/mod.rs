//! In-query model inference: model loading, conversion to matrices and
//! lowering onto the kernel set.

mod lower;
mod model;
mod tensorize;

pub use lower::{lower_predict, lower_tree, predict, tree_leaves, TreeSlots};
pub use model::{load_model, ModelSpec, TreeModel, TreeNode};
pub use tensorize::{tensorize, TensorizedModel, TreeMatrices};
