//! Impurity importance and partial dependence for fitted forests.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::rf::{Forest, TreeNode};
use crate::scalar::{total_cmp, Scalar};
use crate::stats;

/// Default number of quantile grid points.
pub const DEFAULT_GRID_POINTS: usize = 50;

/// Normalized MAE-sum reduction credited to each feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImportanceReport<T> {
    pub features: Vec<String>,
    /// Mean per-tree reduction before normalization.
    pub raw: Vec<T>,
    /// `raw / sum(raw)`; all zero when no tree splits.
    pub shares: Vec<T>,
}

impl<T: Scalar> ImportanceReport<T> {
    /// `(name, share)` pairs, largest share first, ties in feature order.
    pub fn ranked(&self) -> Vec<(&str, T)> {
        let mut out: Vec<(usize, T)> = self.shares.iter().copied().enumerate().collect();
        out.sort_by(|a, b| total_cmp(&b.1, &a.1).then(a.0.cmp(&b.0)));
        out.into_iter()
            .map(|(i, s)| (self.features[i].as_str(), s))
            .collect()
    }

    pub fn share_of(&self, name: &str) -> Option<T> {
        self.features
            .iter()
            .position(|f| f == name)
            .map(|i| self.shares[i])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "share"])?;
        for (name, share) in self.ranked() {
            w.write_record([name.to_string(), share.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

fn check_names<T: Scalar>(forest: &Forest<T>, design: &DesignMatrix<T>) -> Result<()> {
    if forest.feature_names != design.feature_names() {
        return Err(Error::InvalidArgument(format!(
            "forest features {:?} do not match design features {:?}",
            forest.feature_names,
            design.feature_names()
        )));
    }
    Ok(())
}

fn credit<T: Scalar>(
    node: &TreeNode<T>,
    design: &DesignMatrix<T>,
    residents: &[usize],
    out: &mut [T],
) {
    if let TreeNode::Split {
        feature,
        threshold,
        left,
        right,
        ..
    } = node
    {
        let (l, r): (Vec<usize>, Vec<usize>) = residents
            .iter()
            .partition(|&&i| design.value(i, *feature) <= *threshold);
        let cost = |rows: &[usize]| {
            let ys: Vec<T> = rows.iter().map(|&i| design.target()[i]).collect();
            stats::abs_dev_sum(&ys)
        };
        let gain = cost(residents) - cost(&l) - cost(&r);
        out[*feature] = out[*feature] + gain.max(T::zero());
        credit(left, design, &l, out);
        credit(right, design, &r, out);
    }
}

/// Credits every split with the drop in absolute-deviation sum of the tree's
/// in-bag residents, averages over trees and normalizes to one.
///
/// `design` must be the design the forest was trained on; forests without
/// recorded in-bag rows are scored on every row of `design`.
pub fn impurity_importance<T: Scalar>(
    forest: &Forest<T>,
    design: &DesignMatrix<T>,
) -> Result<ImportanceReport<T>> {
    check_names(forest, design)?;
    let d = forest.n_features();
    let all: Vec<usize> = (0..design.n_rows()).collect();
    if let Some(&bad) = forest.in_bag.iter().flatten().find(|&&i| i >= design.n_rows()) {
        return Err(Error::Dimension {
            expected: design.n_rows(),
            got: bad + 1,
        });
    }
    let per_tree: Vec<Vec<T>> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let rows = forest.in_bag.get(t).unwrap_or(&all);
            let mut out = vec![T::zero(); d];
            credit(tree, design, rows, &mut out);
            out
        })
        .collect();
    let n_trees = T::of_usize(forest.trees.len());
    let raw: Vec<T> = (0..d)
        .map(|j| per_tree.iter().map(|v| v[j]).sum::<T>() / n_trees)
        .collect();
    let total: T = raw.iter().copied().sum();
    let shares = if total > T::zero() {
        raw.iter().map(|&v| v / total).collect()
    } else {
        vec![T::zero(); d]
    };
    Ok(ImportanceReport {
        features: forest.feature_names.clone(),
        raw,
        shares,
    })
}

/// How grid values for a partial dependence sweep are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec<T> {
    Values(Vec<T>),
    /// Equally spaced empirical quantiles; duplicates collapse.
    Quantiles(usize),
}

impl<T> Default for GridSpec<T> {
    fn default() -> Self {
        GridSpec::Quantiles(DEFAULT_GRID_POINTS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Pdp1d<T> {
    pub feature: String,
    pub grid: Vec<T>,
    pub response: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Pdp2d<T> {
    pub feature_a: String,
    pub feature_b: String,
    pub grid_a: Vec<T>,
    pub grid_b: Vec<T>,
    /// `response[i][j]` at `(grid_a[i], grid_b[j])`.
    pub response: Vec<Vec<T>>,
}

fn feature_index<T: Scalar>(design: &DesignMatrix<T>, name: &str) -> Result<usize> {
    design
        .feature_index(name)
        .ok_or_else(|| Error::UnknownFeature(name.to_string()))
}

fn resolve_grid<T: Scalar>(design: &DesignMatrix<T>, j: usize, spec: &GridSpec<T>) -> Result<Vec<T>> {
    let grid = match spec {
        GridSpec::Values(v) => {
            let mut g = v.clone();
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("grid values must be finite".into()));
            }
            g.sort_by(total_cmp);
            g.dedup();
            g
        }
        GridSpec::Quantiles(count) => {
            if *count == 0 || design.n_rows() == 0 {
                return Err(Error::InvalidArgument("empty grid".into()));
            }
            let mut col = design.column(j);
            col.sort_by(total_cmp);
            let mut g: Vec<T> = if *count == 1 {
                vec![stats::quantile_sorted(&col, 0.5)]
            } else {
                (0..*count)
                    .map(|i| stats::quantile_sorted(&col, i as f64 / (*count - 1) as f64))
                    .collect()
            };
            g.dedup();
            g
        }
    };
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    Ok(grid)
}

/// Mean forest prediction over the design with the listed features pinned.
fn mean_response<T: Scalar>(forest: &Forest<T>, design: &DesignMatrix<T>, pins: &[(usize, T)]) -> T {
    let mut row = vec![T::zero(); design.n_features()];
    let mut preds = vec![T::zero(); forest.trees.len()];
    // Deviations from the first prediction are averaged, so a constant
    // response comes back unrounded.
    let mut anchor = None;
    let mut sum = T::zero();
    for i in 0..design.n_rows() {
        row.copy_from_slice(design.row(i));
        for &(j, v) in pins {
            row[j] = v;
        }
        for (p, tree) in preds.iter_mut().zip(&forest.trees) {
            *p = tree.route(&row);
        }
        let y = crate::rf::aggregate(&mut preds, forest.params.aggregation);
        let a = *anchor.get_or_insert(y);
        sum = sum + (y - a);
    }
    anchor.unwrap_or_else(T::zero) + sum / T::of_usize(design.n_rows())
}

/// One-dimensional partial dependence of the forest on `feature`.
pub fn pdp_1d<T: Scalar>(
    forest: &Forest<T>,
    design: &DesignMatrix<T>,
    feature: &str,
    grid: &GridSpec<T>,
) -> Result<Pdp1d<T>> {
    check_names(forest, design)?;
    let j = feature_index(design, feature)?;
    if design.n_rows() == 0 {
        return Err(Error::InsufficientData("partial dependence needs rows".into()));
    }
    let grid = resolve_grid(design, j, grid)?;
    let response = grid
        .par_iter()
        .map(|&v| mean_response(forest, design, &[(j, v)]))
        .collect();
    Ok(Pdp1d {
        feature: feature.to_string(),
        grid,
        response,
    })
}

/// Joint partial dependence on two distinct features.
pub fn pdp_2d<T: Scalar>(
    forest: &Forest<T>,
    design: &DesignMatrix<T>,
    feature_a: &str,
    feature_b: &str,
    grid_a: &GridSpec<T>,
    grid_b: &GridSpec<T>,
) -> Result<Pdp2d<T>> {
    check_names(forest, design)?;
    if feature_a == feature_b {
        return Err(Error::InvalidArgument(format!(
            "two-way dependence needs distinct features, got '{feature_a}' twice"
        )));
    }
    let ja = feature_index(design, feature_a)?;
    let jb = feature_index(design, feature_b)?;
    if design.n_rows() == 0 {
        return Err(Error::InsufficientData("partial dependence needs rows".into()));
    }
    let ga = resolve_grid(design, ja, grid_a)?;
    let gb = resolve_grid(design, jb, grid_b)?;
    let cells: Vec<T> = (0..ga.len() * gb.len())
        .into_par_iter()
        .map(|c| mean_response(forest, design, &[(ja, ga[c / gb.len()]), (jb, gb[c % gb.len()])]))
        .collect();
    let response = cells.chunks(gb.len()).map(<[T]>::to_vec).collect();
    Ok(Pdp2d {
        feature_a: feature_a.to_string(),
        feature_b: feature_b.to_string(),
        grid_a: ga,
        grid_b: gb,
        response,
    })
}

impl<T: Scalar> Pdp1d<T> {
    /// Long format: `feature,value,response`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "value", "response"])?;
        for (g, r) in self.grid.iter().zip(&self.response) {
            w.write_record([self.feature.clone(), g.to_string(), r.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Grid point at which a continuous two-segment line fits the response
    /// best, i.e. where the slope changes most clearly.
    pub fn kink(&self) -> Option<T> {
        largest_slope_change(&self.grid, &self.response)
    }

    /// Least-squares slopes of the response at grid points `<= at` and `>= at`.
    pub fn slopes_around(&self, at: T) -> Option<(T, T)> {
        let below: Vec<usize> = (0..self.grid.len()).filter(|&i| self.grid[i] <= at).collect();
        let above: Vec<usize> = (0..self.grid.len()).filter(|&i| self.grid[i] >= at).collect();
        Some((self.slope(&below)?, self.slope(&above)?))
    }

    fn slope(&self, idx: &[usize]) -> Option<T> {
        if idx.len() < 2 {
            return None;
        }
        let rows: Vec<Vec<T>> = idx.iter().map(|&i| vec![T::one(), self.grid[i]]).collect();
        let y: Vec<T> = idx.iter().map(|&i| self.response[i]).collect();
        least_squares(&rows, &y).ok().map(|b| b[1])
    }
}

impl<T: Scalar> Pdp2d<T> {
    /// Long format: `feature_a,value_a,feature_b,value_b,response`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature_a", "value_a", "feature_b", "value_b", "response"])?;
        for (i, a) in self.grid_a.iter().enumerate() {
            for (j, b) in self.grid_b.iter().enumerate() {
                w.write_record([
                    self.feature_a.clone(),
                    a.to_string(),
                    self.feature_b.clone(),
                    b.to_string(),
                    self.response[i][j].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Mean response over cells with `b < cut` and with `b >= cut`.
    pub fn mean_split_on_b(&self, cut: T) -> Option<(T, T)> {
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for row in &self.response {
            for (j, &b) in self.grid_b.iter().enumerate() {
                if b < cut {
                    lo.push(row[j]);
                } else {
                    hi.push(row[j]);
                }
            }
        }
        Some((stats::mean(&lo)?, stats::mean(&hi)?))
    }
}

/// Interior grid point whose continuous hinge fit
/// `a + b x + c max(x - g, 0)` has the smallest squared error.
pub fn largest_slope_change<T: Scalar>(grid: &[T], response: &[T]) -> Option<T> {
    if grid.len() < 3 || grid.len() != response.len() {
        return None;
    }
    let mut best: Option<(T, T)> = None;
    for &g in &grid[1..grid.len() - 1] {
        let rows: Vec<Vec<T>> = grid
            .iter()
            .map(|&x| vec![T::one(), x, (x - g).max(T::zero())])
            .collect();
        let Ok(beta) = least_squares(&rows, response) else {
            continue;
        };
        let sse: T = rows
            .iter()
            .zip(response)
            .map(|(r, &y)| {
                let e = y - (beta[0] + beta[1] * r[1] + beta[2] * r[2]);
                e * e
            })
            .sum();
        if best.is_none_or(|(s, _)| sse < s) {
            best = Some((sse, g));
        }
    }
    best.map(|(_, g)| g)
}
