//! Exhaustive MAE split search.
//!
//! A node's cost is the sum of absolute deviations of its targets around
//! their median. For every candidate feature the residents are sorted once
//! and swept left to right (and right to left) with a running median, which
//! prices every threshold in `O(n log n)`. Floating error in those running
//! sums is bounded, so all thresholds whose swept cost lies within that bound
//! of the minimum are re-priced exactly from sorted targets before the
//! winner is picked. Ties go to the lowest feature index, then the smallest
//! threshold.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::scalar::{total_cmp, Scalar};
use crate::stats::sorted_abs_dev_sum;

/// Outcome of a successful split search.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDecision<T> {
    pub feature: usize,
    pub threshold: T,
    /// Summed absolute deviation of both children around their medians.
    pub total_mae_after: T,
    /// Same quantity for the unsplit node.
    pub parent_cost: T,
    /// Local indices with `feature <= threshold`, ascending.
    pub left: Vec<usize>,
    /// Local indices with `feature > threshold`, ascending.
    pub right: Vec<usize>,
}

/// Best split of a node given its targets and row-major features.
///
/// `features[i]` is the feature vector of resident `i`. Returns `None` when
/// no threshold leaves `min_leaf` residents on both sides or none strictly
/// lowers the node cost.
pub fn best_split<T: Scalar>(
    targets: &[T],
    features: &[Vec<T>],
    candidate_features: &[usize],
    min_leaf: usize,
) -> Option<SplitDecision<T>> {
    assert_eq!(targets.len(), features.len(), "one feature row per target");
    find_split(
        targets.len(),
        |i| targets[i],
        |i, f| features[i][f],
        candidate_features,
        min_leaf,
    )
}

#[derive(Clone, Copy)]
struct Ordered<T>(T);

impl<T: Scalar> PartialEq for Ordered<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Ordered<T> {}
impl<T: Scalar> PartialOrd for Ordered<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Ordered<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        total_cmp(&self.0, &other.0)
    }
}

/// Streaming sum of absolute deviations around the median.
///
/// The lower half lives in a max-heap, the upper half in a min-heap; the cost
/// is `sum(upper) - sum(lower)` with the odd middle element excluded.
struct RunningAbsDev<T: Scalar> {
    low: BinaryHeap<Ordered<T>>,
    high: BinaryHeap<Reverse<Ordered<T>>>,
    sum_low: T,
    sum_high: T,
}

impl<T: Scalar> RunningAbsDev<T> {
    fn with_capacity(n: usize) -> Self {
        RunningAbsDev {
            low: BinaryHeap::with_capacity(n / 2 + 1),
            high: BinaryHeap::with_capacity(n / 2 + 1),
            sum_low: T::zero(),
            sum_high: T::zero(),
        }
    }

    fn push(&mut self, v: T) {
        match self.low.peek() {
            Some(top) if v > top.0 => {
                self.high.push(Reverse(Ordered(v)));
                self.sum_high = self.sum_high + v;
            }
            _ => {
                self.low.push(Ordered(v));
                self.sum_low = self.sum_low + v;
            }
        }
        if self.low.len() > self.high.len() + 1 {
            let Ordered(x) = self.low.pop().expect("non-empty");
            self.sum_low = self.sum_low - x;
            self.high.push(Reverse(Ordered(x)));
            self.sum_high = self.sum_high + x;
        } else if self.high.len() > self.low.len() {
            let Reverse(Ordered(x)) = self.high.pop().expect("non-empty");
            self.sum_high = self.sum_high - x;
            self.low.push(Ordered(x));
            self.sum_low = self.sum_low + x;
        }
    }

    fn cost(&self) -> T {
        if self.low.len() > self.high.len() {
            let mid = self.low.peek().expect("non-empty").0;
            self.sum_high - (self.sum_low - mid)
        } else {
            self.sum_high - self.sum_low
        }
    }
}

struct Candidate<T> {
    feature: usize,
    slot: usize,
    left_size: usize,
    approx: T,
}

fn exact_cost<T: Scalar>(buf: &mut Vec<T>, ids: &[usize], target_of: &impl Fn(usize) -> T) -> T {
    buf.clear();
    buf.extend(ids.iter().map(|&i| target_of(i)));
    buf.sort_unstable_by(total_cmp);
    sorted_abs_dev_sum(buf)
}

pub(crate) fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let mid = a + (b - a) / T::of(2.0);
    if mid >= b || mid < a {
        a
    } else {
        mid
    }
}

/// Core search over local residents `0..n`.
pub(crate) fn find_split<T, FT, FX>(
    n: usize,
    target_of: FT,
    feature_of: FX,
    candidate_features: &[usize],
    min_leaf: usize,
) -> Option<SplitDecision<T>>
where
    T: Scalar,
    FT: Fn(usize) -> T,
    FX: Fn(usize, usize) -> T,
{
    let min_leaf = min_leaf.max(1);
    if n < 2 || n < 2 * min_leaf || candidate_features.is_empty() {
        return None;
    }
    let all: Vec<usize> = (0..n).collect();
    let mut buf = Vec::with_capacity(n);
    let parent_cost = exact_cost(&mut buf, &all, &target_of);
    if parent_cost <= T::zero() {
        return None;
    }

    let mut features: Vec<usize> = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut orders: Vec<Vec<usize>> = Vec::with_capacity(features.len());
    let mut candidates: Vec<Candidate<T>> = Vec::new();
    let mut prefix = vec![T::zero(); n + 1];
    let mut suffix = vec![T::zero(); n + 1];
    for (slot, &f) in features.iter().enumerate() {
        let mut order = all.clone();
        order.sort_unstable_by(|&a, &b| {
            total_cmp(&feature_of(a, f), &feature_of(b, f)).then(a.cmp(&b))
        });
        let xs: Vec<T> = order.iter().map(|&i| feature_of(i, f)).collect();

        let mut run = RunningAbsDev::with_capacity(n);
        for (k, &i) in order.iter().enumerate() {
            run.push(target_of(i));
            prefix[k + 1] = run.cost();
        }
        let mut run = RunningAbsDev::with_capacity(n);
        for k in (0..n).rev() {
            run.push(target_of(order[k]));
            suffix[k] = run.cost();
        }
        for p in min_leaf..=(n - min_leaf) {
            if xs[p - 1] < xs[p] {
                candidates.push(Candidate {
                    feature: f,
                    slot,
                    left_size: p,
                    approx: prefix[p] + suffix[p],
                });
            }
        }
        orders.push(order);
    }

    let best_approx = candidates
        .iter()
        .map(|c| c.approx)
        .min_by(total_cmp)?;
    let magnitude = all.iter().fold(T::one(), |a, &i| a + target_of(i).abs());
    let band = T::epsilon() * T::of_usize(8 * n) * magnitude + T::of(T::TIE_EPS) * magnitude;

    let mut refined: Vec<(usize, T)> = Vec::new();
    for (idx, c) in candidates.iter().enumerate() {
        if c.approx <= best_approx + band {
            let order = &orders[c.slot];
            let left = exact_cost(&mut buf, &order[..c.left_size], &target_of);
            let right = exact_cost(&mut buf, &order[c.left_size..], &target_of);
            refined.push((idx, left + right));
        }
    }
    let best_exact = refined.iter().map(|&(_, v)| v).min_by(total_cmp)?;
    // Candidates are generated in (feature, threshold) ascending order.
    let &(winner, cost) = refined
        .iter()
        .find(|&&(_, v)| T::tied(v, best_exact))
        .expect("minimum is tied with itself");

    if cost >= parent_cost || T::tied(cost, parent_cost) {
        return None;
    }

    let c = &candidates[winner];
    let order = &orders[c.slot];
    let f = c.feature;
    let threshold = midpoint(feature_of(order[c.left_size - 1], f), feature_of(order[c.left_size], f));
    let mut left = order[..c.left_size].to_vec();
    let mut right = order[c.left_size..].to_vec();
    left.sort_unstable();
    right.sort_unstable();
    Some(SplitDecision {
        feature: f,
        threshold,
        total_mae_after: cost,
        parent_cost,
        left,
        right,
    })
}
