//! Small descriptive statistics used across the pipeline.
//!
//! Medians of even-length samples are the arithmetic mean of the two middle
//! values everywhere in the crate.

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};

/// Median of `values`, reordering the slice in place.
///
/// Returns `None` on an empty slice.
pub fn median_in_place<T: Scalar>(values: &mut [T]) -> Option<T> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    values.sort_unstable_by(total_cmp);
    Some(median_of_sorted(values))
}

pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    let mut buf = values.to_vec();
    median_in_place(&mut buf)
}

pub(crate) fn median_of_sorted<T: Scalar>(sorted: &[T]) -> T {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::of(2.0)
    }
}

/// Sum of absolute deviations around the median, computed directly over the
/// sorted values so identical multisets produce bit-identical sums.
pub fn abs_dev_sum<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(total_cmp);
    sorted_abs_dev_sum(&sorted)
}

pub(crate) fn sorted_abs_dev_sum<T: Scalar>(sorted: &[T]) -> T {
    let m = median_of_sorted(sorted);
    sorted.iter().fold(T::zero(), |acc, &v| acc + (v - m).abs())
}

pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let total = values.iter().fold(T::zero(), |a, &v| a + v);
    Some(total / T::of_usize(values.len()))
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std<T: Scalar>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let m = mean(values).unwrap_or_else(T::zero);
    let ss = values.iter().fold(T::zero(), |a, &v| a + (v - m) * (v - m));
    (ss / T::of_usize(n - 1)).sqrt()
}

/// Mean absolute error between predictions and observations.
pub fn mae<T: Scalar>(predictions: &[T], observed: &[T]) -> Result<T> {
    if predictions.len() != observed.len() {
        return Err(Error::Dimension {
            expected: observed.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("mae of empty vectors".into()));
    }
    let total = predictions
        .iter()
        .zip(observed)
        .fold(T::zero(), |a, (&p, &o)| a + (p - o).abs());
    Ok(total / T::of_usize(predictions.len()))
}

/// Linear-interpolation quantile of already sorted data (`q` in `[0, 1]`).
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
