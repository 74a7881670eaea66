use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_partition, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::scalar::Scalar;
use crate::stats;

pub const LASSO_TOL: f64 = 1e-8;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
}

/// Penalized linear regression fitted on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub kind: Penalty,
    pub lambda: T,
    pub feature_names: Vec<String>,
    /// Raw-scale intercept.
    pub intercept: T,
    /// Raw-scale slopes.
    pub coefficients: Vec<T>,
    /// Slopes on the standardized features.
    pub standardized: Vec<T>,
    pub target_mean: T,
    pub means: Vec<T>,
    /// Population standard deviations; zero marks a dropped feature.
    pub stds: Vec<T>,
    pub converged: bool,
    pub sweeps: usize,
}

impl<T: Scalar> LinearModel<T> {
    pub fn predict(&self, row: &[T]) -> Result<T> {
        if row.len() != self.coefficients.len() {
            return Err(Error::Dimension {
                expected: self.coefficients.len(),
                got: row.len(),
            });
        }
        Ok(self.intercept + row.iter().zip(&self.coefficients).map(|(&x, &b)| x * b).sum::<T>())
    }

    /// Same prediction computed on the standardized scale.
    pub fn predict_standardized(&self, row: &[T]) -> Result<T> {
        if row.len() != self.standardized.len() {
            return Err(Error::Dimension {
                expected: self.standardized.len(),
                got: row.len(),
            });
        }
        let mut acc = self.target_mean;
        for j in 0..row.len() {
            if self.stds[j] > T::zero() {
                acc = acc + self.standardized[j] * (row[j] - self.means[j]) / self.stds[j];
            }
        }
        Ok(acc)
    }

    pub fn coefficient_norm(&self) -> T {
        self.standardized.iter().map(|&b| b * b).sum::<T>().sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Column-major standardized copy of the design plus its statistics.
struct Standardized<T> {
    cols: Vec<Vec<T>>,
    y: Vec<T>,
    y_mean: T,
    means: Vec<T>,
    stds: Vec<T>,
}

fn standardize<T: Scalar>(design: &DesignMatrix<T>) -> Result<Standardized<T>> {
    let n = design.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("linear model needs rows".into()));
    }
    let nn = T::of_usize(n);
    let y_mean = stats::mean(design.target()).expect("non-empty");
    let y = design.target().iter().map(|&v| v - y_mean).collect();
    let mut cols = Vec::with_capacity(design.n_features());
    let mut means = Vec::with_capacity(design.n_features());
    let mut stds = Vec::with_capacity(design.n_features());
    for j in 0..design.n_features() {
        let col = design.column(j);
        let m = stats::mean(&col).expect("non-empty");
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nn;
        let s = var.sqrt();
        // Spread at rounding level counts as constant.
        let s = if s <= T::epsilon() * m.abs().max(T::one()) * T::of(16.0) {
            T::zero()
        } else {
            s
        };
        cols.push(if s > T::zero() {
            col.iter().map(|&v| (v - m) / s).collect()
        } else {
            vec![T::zero(); n]
        });
        means.push(m);
        stds.push(s);
    }
    Ok(Standardized {
        cols,
        y,
        y_mean,
        means,
        stds,
    })
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "penalty must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

fn assemble<T: Scalar>(
    design: &DesignMatrix<T>,
    z: &Standardized<T>,
    kind: Penalty,
    lambda: T,
    beta: Vec<T>,
    converged: bool,
    sweeps: usize,
) -> LinearModel<T> {
    let coefficients: Vec<T> = beta
        .iter()
        .zip(&z.stds)
        .map(|(&b, &s)| if s > T::zero() { b / s } else { T::zero() })
        .collect();
    let intercept = z.y_mean
        - coefficients
            .iter()
            .zip(&z.means)
            .map(|(&c, &m)| c * m)
            .sum::<T>();
    LinearModel {
        kind,
        lambda,
        feature_names: design.feature_names().to_vec(),
        intercept,
        coefficients,
        standardized: beta,
        target_mean: z.y_mean,
        means: z.means.clone(),
        stds: z.stds.clone(),
        converged,
        sweeps,
    }
}

/// Ridge regression: minimizes `(1/2N)|y - Xb|^2 + (lambda/2)|b|^2` over
/// standardized features with an unpenalized intercept.
pub fn fit_ridge<T: Scalar>(design: &DesignMatrix<T>, lambda: T) -> Result<LinearModel<T>> {
    check_lambda(lambda)?;
    let z = standardize(design)?;
    let active: Vec<usize> = (0..z.cols.len()).filter(|&j| z.stds[j] > T::zero()).collect();
    let p = active.len();
    let mut beta = vec![T::zero(); z.cols.len()];
    if p > 0 {
        let nl = lambda * T::of_usize(design.n_rows());
        let mut gram = vec![T::zero(); p * p];
        let mut rhs = vec![T::zero(); p];
        for (a, &ja) in active.iter().enumerate() {
            rhs[a] = dot(&z.cols[ja], &z.y);
            for (b, &jb) in active.iter().enumerate().skip(a) {
                let g = dot(&z.cols[ja], &z.cols[jb]);
                gram[a * p + b] = g;
                gram[b * p + a] = g;
            }
            gram[a * p + a] = gram[a * p + a] + nl;
        }
        let sol = solve(gram, rhs, p).map_err(|e| match e {
            Error::Singular(_) => Error::Singular(format!(
                "ridge system is singular at lambda = {lambda} (collinear features)"
            )),
            other => other,
        })?;
        for (a, &j) in active.iter().enumerate() {
            beta[j] = sol[a];
        }
    }
    Ok(assemble(design, &z, Penalty::L2, lambda, beta, true, 0))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `sign(z) * max(|z| - gamma, 0)`.
pub fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z.abs() <= gamma {
        T::zero()
    } else if z > T::zero() {
        z - gamma
    } else {
        z + gamma
    }
}

/// Smallest penalty at which every lasso coefficient is zero:
/// `max_j |x_j . (y - mean y)| / N` on standardized features.
pub fn lambda_max<T: Scalar>(design: &DesignMatrix<T>) -> Result<T> {
    let z = standardize(design)?;
    let nn = T::of_usize(design.n_rows());
    Ok(z.cols
        .iter()
        .map(|c| (dot(c, &z.y) / nn).abs())
        .fold(T::zero(), T::max))
}

/// Lasso by cyclic coordinate descent on
/// `(1/2N)|y - Xb|^2 + lambda |b|_1` over standardized features. Stops when
/// the largest coefficient move in a sweep falls below `tol`; otherwise
/// returns after `max_sweeps` with `converged = false`.
pub fn fit_lasso<T: Scalar>(
    design: &DesignMatrix<T>,
    lambda: T,
    tol: T,
    max_sweeps: usize,
) -> Result<LinearModel<T>> {
    check_lambda(lambda)?;
    let z = standardize(design)?;
    let nn = T::of_usize(design.n_rows());
    let d = z.cols.len();
    let scale: Vec<T> = z.cols.iter().map(|c| dot(c, c) / nn).collect();
    let mut beta = vec![T::zero(); d];
    let mut resid = z.y.clone();
    let mut converged = d == 0;
    let mut sweeps = 0;
    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        let mut max_move = T::zero();
        for j in 0..d {
            if scale[j] <= T::zero() {
                continue;
            }
            let old = beta[j];
            let col = &z.cols[j];
            let rho = col
                .iter()
                .zip(&resid)
                .map(|(&x, &r)| x * (r + x * old))
                .sum::<T>()
                / nn;
            let new = soft_threshold(rho, lambda) / scale[j];
            if new != old {
                let delta = new - old;
                for (r, &x) in resid.iter_mut().zip(col) {
                    *r = *r - x * delta;
                }
                beta[j] = new;
                max_move = max_move.max(delta.abs());
            }
        }
        converged = max_move < tol;
    }
    Ok(assemble(design, &z, Penalty::L1, lambda, beta, converged, sweeps))
}

/// Largest violation of the lasso optimality conditions for `model` on
/// `design`, measured on the standardized scale with the model's own
/// standardization statistics.
pub fn lasso_kkt_violation<T: Scalar>(model: &LinearModel<T>, design: &DesignMatrix<T>) -> Result<T> {
    let z = standardize(design)?;
    let nn = T::of_usize(design.n_rows());
    let mut resid = z.y.clone();
    for (j, col) in z.cols.iter().enumerate() {
        for (r, &x) in resid.iter_mut().zip(col) {
            *r = *r - x * model.standardized[j];
        }
    }
    let mut worst = T::zero();
    for (j, col) in z.cols.iter().enumerate() {
        if z.stds[j] <= T::zero() {
            continue;
        }
        let g = dot(col, &resid) / nn;
        let b = model.standardized[j];
        let v = if b == T::zero() {
            (g.abs() - model.lambda).max(T::zero())
        } else {
            (g - model.lambda * b.signum()).abs()
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

pub fn fit_linear<T: Scalar>(design: &DesignMatrix<T>, kind: Penalty, lambda: T) -> Result<LinearModel<T>> {
    match kind {
        Penalty::L1 => fit_lasso(design, lambda, T::of(LASSO_TOL), LASSO_MAX_SWEEPS),
        Penalty::L2 => fit_ridge(design, lambda),
    }
}

/// `count` log-spaced penalties from `lambda_max` down to `lambda_max * 1e-4`.
pub fn default_lambda_grid<T: Scalar>(design: &DesignMatrix<T>, count: usize) -> Result<Vec<T>> {
    let top = lambda_max(design)?;
    let top = if top > T::zero() { top } else { T::one() };
    if count <= 1 {
        return Ok(vec![top]);
    }
    let span = T::of(1e-4).ln();
    Ok((0..count)
        .map(|i| top * (span * T::of_usize(i) / T::of_usize(count - 1)).exp())
        .collect())
}

/// Penalty from `grid` with the lowest mean k-fold MAE; ties pick the
/// larger penalty.
pub fn cv_lambda<T: Scalar>(
    design: &DesignMatrix<T>,
    kind: Penalty,
    grid: &[T],
    k: usize,
    seed: u64,
) -> Result<T> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty penalty grid".into()));
    }
    if grid.len() == 1 {
        check_lambda(grid[0])?;
        return Ok(grid[0]);
    }
    let folds = kfold_partition(design.n_rows(), k, seed)?;
    let splits: Vec<(DesignMatrix<T>, DesignMatrix<T>)> = (0..folds.len())
        .map(|f| {
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            train.sort_unstable();
            (design.subset(&train), design.subset(&folds[f]))
        })
        .collect();
    let scores: Vec<T> = grid
        .par_iter()
        .map(|&lambda| {
            let mut total = T::zero();
            for (train, held) in &splits {
                let model = fit_linear(train, kind, lambda)?;
                let preds = (0..held.n_rows())
                    .map(|i| model.predict(held.row(i)))
                    .collect::<Result<Vec<T>>>()?;
                total = total + stats::mae(&preds, held.target())?;
            }
            Ok(total / T::of_usize(splits.len()))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..grid.len() {
        let better = scores[i] < scores[best]
            || (scores[i] == scores[best] && grid[i] > grid[best]);
        if better {
            best = i;
        }
    }
    Ok(grid[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(y: Vec<f64>, x: Vec<f64>) -> DesignMatrix<f64> {
        DesignMatrix::from_column(y, x).unwrap()
    }

    #[test]
    fn ridge_exact_fit_at_zero() {
        let m = fit_ridge(&col(vec![-2.0, 2.0], vec![-1.0, 1.0]), 0.0).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
    }

    #[test]
    fn ridge_normal_equation_oracle() {
        // Standardized x is [-1, 1]; Sxy / (Sxx + N lambda) = 2 / 4.
        let m = fit_ridge(&col(vec![-1.0, 1.0], vec![-1.0, 1.0]), 1.0).unwrap();
        assert!((m.standardized[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_target_gives_zero_model() {
        let d = col(vec![0.0; 5], vec![1.0, 3.0, 2.0, 7.0, 5.0]);
        for m in [fit_ridge(&d, 0.3).unwrap(), fit_lasso(&d, 0.3, 1e-8, 100).unwrap()] {
            assert_eq!(m.coefficients, vec![0.0]);
            assert_eq!(m.intercept, 0.0);
        }
    }

    #[test]
    fn collinear_ridge_at_zero_is_singular() {
        let d = DesignMatrix::from_rows(
            vec![1.0, 2.0, 3.0, 5.0],
            vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]],
            vec!["a_t".into(), "b_t".into()],
            None,
        )
        .unwrap();
        assert!(matches!(fit_ridge(&d, 0.0), Err(Error::Singular(_))));
        assert!(fit_ridge(&d, 0.1).is_ok());
        assert!(fit_ridge(&d, -1.0).is_err());
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.5, 1.0), -1.5);
        assert_eq!(soft_threshold(0.7, 0.0), 0.7);
    }

    #[test]
    fn one_dimensional_lasso_closed_form() {
        let d = col(vec![1.0, 3.0, 2.0, 6.0], vec![-1.0, 0.0, 1.0, 2.0]);
        let z = standardize(&d).unwrap();
        let sxy = dot(&z.cols[0], &z.y) / 4.0;
        for lambda in [0.0, 0.2, 0.9, 5.0] {
            let m = fit_lasso(&d, lambda, 1e-12, 100).unwrap();
            assert!((m.standardized[0] - soft_threshold(sxy, lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let d = DesignMatrix::from_rows(
            vec![1.0, 4.0, 2.0, 8.0, 5.0],
            vec![
                vec![1.0, 0.5],
                vec![2.0, -1.0],
                vec![3.0, 2.0],
                vec![4.0, 0.0],
                vec![5.0, 1.0],
            ],
            vec!["a_t".into(), "b_t".into()],
            None,
        )
        .unwrap();
        let top = lambda_max(&d).unwrap();
        let m = fit_lasso(&d, top, 1e-8, 1000).unwrap();
        assert!(m.standardized.iter().all(|&b| b == 0.0));
        let below = fit_lasso(&d, top * 0.9, 1e-8, 1000).unwrap();
        assert!(below.standardized.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn standardized_and_raw_predictions_agree() {
        let d = DesignMatrix::from_rows(
            vec![1.0, 4.0, 2.0, 8.0, 5.0],
            vec![
                vec![10.0, 0.5, 3.0],
                vec![20.0, -1.0, 3.0],
                vec![35.0, 2.0, 3.0],
                vec![41.0, 0.0, 3.0],
                vec![50.0, 1.0, 3.0],
            ],
            vec!["a_t".into(), "b_t".into(), "c_t".into()],
            None,
        )
        .unwrap();
        for m in [fit_ridge(&d, 0.05).unwrap(), fit_lasso(&d, 0.05, 1e-10, 1000).unwrap()] {
            assert_eq!(m.coefficients[2], 0.0);
            for row in [[12.0, 0.1, 3.0], [60.0, -3.0, 9.0]] {
                let (a, b): (f64, f64) = (m.predict(&row).unwrap(), m.predict_standardized(&row).unwrap());
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cv_lambda_edges() {
        let d = col((0..20).map(f64::from).collect(), (0..20).map(|i| (i * 7 % 5) as f64).collect());
        assert!(cv_lambda(&d, Penalty::L1, &[], 10, 0).is_err());
        assert_eq!(cv_lambda(&d, Penalty::L2, &[0.3], 10, 0).unwrap(), 0.3);
        let g = default_lambda_grid(&d, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
        assert!((g[49] / g[0] - 1e-4).abs() < 1e-12);
    }
}
