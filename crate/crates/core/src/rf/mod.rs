//! MAE-criterion regression trees and the median-aggregated forest.

mod forest;
mod split;
mod tree;

pub use forest::{fit_forest, Aggregation, Forest, ForestParams};
pub use split::{best_split, SplitDecision};
pub use tree::{candidate_count, fit_tree, TreeNode};

pub(crate) use forest::aggregate;

use crate::error::Result;
use crate::scalar::Scalar;

/// Prediction of a single tree for `row`.
pub fn predict_tree<T: Scalar>(tree: &TreeNode<T>, row: &[T]) -> Result<T> {
    tree.predict(row)
}

/// Forest prediction for `row` under the forest's aggregation rule.
pub fn predict_forest<T: Scalar>(forest: &Forest<T>, row: &[T]) -> Result<T> {
    forest.predict(row)
}
