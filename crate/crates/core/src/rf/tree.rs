use rand::Rng;
use serde::{Deserialize, Serialize};

use super::forest::ForestParams;
use super::split::find_split;
use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats;

/// A node of a fitted regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        threshold: T,
        /// Resident count at this node.
        count: usize,
        /// Sum of absolute deviations of the residents around their median.
        cost: T,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        /// Median of the resident targets.
        value: T,
        count: usize,
        /// Mean absolute deviation of the residents around `value`.
        mae: T,
    },
}

impl<T: Scalar> TreeNode<T> {
    /// Routes `row` to a leaf: `feature <= threshold` goes left.
    pub fn predict(&self, row: &[T]) -> Result<T> {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return Ok(*value),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let x = *row.get(*feature).ok_or(Error::Dimension {
                        expected: feature + 1,
                        got: row.len(),
                    })?;
                    node = if x <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Unchecked routing for rows already validated against the forest.
    #[inline]
    pub(crate) fn route(&self, row: &[T]) -> T {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            TreeNode::Leaf { count, .. } | TreeNode::Split { count, .. } => *count,
        }
    }

    /// Sum of absolute deviations held at this node.
    pub fn cost(&self) -> T {
        match self {
            TreeNode::Leaf { count, mae, .. } => *mae * T::of_usize(*count),
            TreeNode::Split { cost, .. } => *cost,
        }
    }

    pub fn leaves(&self) -> Vec<&TreeNode<T>> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { .. } => out.push(node),
                TreeNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out
    }

    /// `(feature, threshold)` of every split node, preorder.
    pub fn splits(&self) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = node
            {
                out.push((*feature, *threshold));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }
}

/// Number of features drawn per node: `ceil(fraction * d)`, at least one.
pub fn candidate_count(feature_fraction: f64, d: usize) -> usize {
    // The small offset keeps products like 0.3 * 10 from rounding up.
    let m = (feature_fraction * d as f64 - 1e-9).ceil() as usize;
    m.clamp(1, d.max(1))
}

fn leaf<T: Scalar>(targets: &mut [T]) -> TreeNode<T> {
    let count = targets.len();
    let value = stats::median_in_place(targets).unwrap_or_else(T::zero);
    let cost = stats::sorted_abs_dev_sum(targets);
    TreeNode::Leaf {
        value,
        count,
        mae: if count == 0 { T::zero() } else { cost / T::of_usize(count) },
    }
}

/// Grows one tree on the in-bag rows (duplicates allowed).
///
/// Every node attempting a split draws a fresh subset of candidate features
/// from `rng`; growth stops at `max_depth`, when children would fall below
/// `min_leaf`, or when no split lowers the node cost.
pub fn fit_tree<T: Scalar, R: Rng + ?Sized>(
    design: &DesignMatrix<T>,
    rows: &[usize],
    params: &ForestParams,
    rng: &mut R,
) -> TreeNode<T> {
    grow(design, rows.to_vec(), 0, params, rng)
}

fn grow<T: Scalar, R: Rng + ?Sized>(
    design: &DesignMatrix<T>,
    residents: Vec<usize>,
    depth: usize,
    params: &ForestParams,
    rng: &mut R,
) -> TreeNode<T> {
    let d = design.n_features();
    let n = residents.len();
    if depth >= params.max_depth || n < 2 * params.min_leaf.max(1) || d == 0 {
        let mut ys: Vec<T> = residents.iter().map(|&i| design.target()[i]).collect();
        return leaf(&mut ys);
    }
    let m = candidate_count(params.feature_fraction, d);
    let candidates = rand::seq::index::sample(rng, d, m).into_vec();
    let split = find_split(
        n,
        |i| design.target()[residents[i]],
        |i, f| design.value(residents[i], f),
        &candidates,
        params.min_leaf,
    );
    match split {
        None => {
            let mut ys: Vec<T> = residents.iter().map(|&i| design.target()[i]).collect();
            leaf(&mut ys)
        }
        Some(s) => {
            let left_rows = s.left.iter().map(|&i| residents[i]).collect();
            let right_rows = s.right.iter().map(|&i| residents[i]).collect();
            let left = grow(design, left_rows, depth + 1, params, rng);
            let right = grow(design, right_rows, depth + 1, params, rng);
            TreeNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                count: n,
                cost: s.parent_cost,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::rng_from_seed;

    fn stump_design() -> DesignMatrix<f64> {
        DesignMatrix::from_column(vec![1.0, 2.0, 10.0, 11.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    fn params(max_depth: usize) -> ForestParams {
        ForestParams {
            max_depth,
            feature_fraction: 1.0,
            bootstrap: false,
            ..ForestParams::default()
        }
    }

    #[test]
    fn depth_zero_is_median_leaf() {
        let t = fit_tree(&stump_design(), &[0, 1, 2, 3], &params(0), &mut rng_from_seed(0));
        assert_eq!(t.depth(), 0);
        assert_eq!(t.predict(&[100.0]).unwrap(), 6.0);
    }

    #[test]
    fn depth_one_stump() {
        let t = fit_tree(&stump_design(), &[0, 1, 2, 3], &params(1), &mut rng_from_seed(0));
        match &t {
            TreeNode::Split {
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(*threshold, 2.5);
                assert_eq!(left.predict(&[0.0]).unwrap(), 1.5);
                assert_eq!(right.predict(&[0.0]).unwrap(), 10.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&[2.0]).unwrap(), 1.5);
        assert_eq!(t.predict(&[2.5]).unwrap(), 1.5);
        assert_eq!(t.predict(&[2.6]).unwrap(), 10.5);
    }

    #[test]
    fn pure_node_stops_early() {
        let d = DesignMatrix::from_column(vec![3.0; 8], (0..8).map(f64::from).collect()).unwrap();
        let t = fit_tree(&d, &(0..8).collect::<Vec<_>>(), &params(15), &mut rng_from_seed(1));
        assert_eq!(t.depth(), 0);
        assert_eq!(t.predict(&[0.0]).unwrap(), 3.0);
    }

    #[test]
    fn predict_checks_dimension() {
        let t = fit_tree(&stump_design(), &[0, 1, 2, 3], &params(1), &mut rng_from_seed(0));
        assert!(matches!(t.predict(&[]), Err(Error::Dimension { .. })));
        let leaf = TreeNode::Leaf { value: 7.0, count: 1, mae: 0.0 };
        assert_eq!(leaf.predict(&[1.0, 2.0]).unwrap(), 7.0);
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(candidate_count(0.3, 10), 3);
        assert_eq!(candidate_count(0.3, 13), 4);
        assert_eq!(candidate_count(0.3, 1), 1);
        assert_eq!(candidate_count(1.0, 7), 7);
        assert_eq!(candidate_count(0.01, 7), 1);
    }
}
