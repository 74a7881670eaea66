//! Dense least-squares helpers for the small systems the baselines solve.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `a x = b` for square `a` (row-major, `n × n`) by Gaussian
/// elimination with partial pivoting.
pub(crate) fn solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, n: usize) -> Result<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = T::epsilon() * T::of_usize(n.max(1)) * scale.max(T::min_positive_value());
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty range");
        if a[pivot * n + col].abs() <= tiny {
            return Err(Error::Singular(format!("pivot {col} vanishes")));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                a[r * n + k] = a[r * n + k] - factor * a[col * n + k];
            }
            b[r] = b[r] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for k in r + 1..n {
            acc = acc - a[r * n + k] * x[k];
        }
        x[r] = acc / a[r * n + r];
    }
    Ok(x)
}

/// Ordinary least squares `min ||y - X beta||²` through the normal
/// equations; `rows` are the regressor vectors (include a constant column
/// for an intercept).
pub(crate) fn least_squares<T: Scalar>(rows: &[Vec<T>], y: &[T]) -> Result<Vec<T>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.len() < p || p == 0 {
        return Err(Error::InsufficientData(format!(
            "least squares with {} rows and {p} columns",
            rows.len()
        )));
    }
    let mut gram = vec![T::zero(); p * p];
    let mut rhs = vec![T::zero(); p];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..p {
            rhs[i] = rhs[i] + row[i] * yi;
            for j in i..p {
                gram[i * p + j] = gram[i * p + j] + row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[i * p + j] = gram[j * p + i];
        }
    }
    solve(gram, rhs, p)
}
