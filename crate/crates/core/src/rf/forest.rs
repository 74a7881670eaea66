use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, TreeNode};
use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Aggregation::Median),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidArgument(format!("unknown aggregation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Share of features drawn as split candidates at each node.
    pub feature_fraction: f64,
    pub min_leaf: usize,
    /// Resample rows with replacement for every tree.
    pub bootstrap: bool,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            max_depth: 15,
            feature_fraction: 0.30,
            min_leaf: 1,
            bootstrap: true,
            aggregation: Aggregation::Median,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "feature_fraction must lie in (0, 1], got {}",
                self.feature_fraction
            )));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidArgument("min_leaf must be >= 1".into()));
        }
        Ok(())
    }

    /// Random stream driving tree `index`; independent of scheduling.
    pub fn tree_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// A fitted ensemble of MAE regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Forest<T> {
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<TreeNode<T>>,
    /// Row indices (into the training design) each tree was grown on.
    pub in_bag: Vec<Vec<usize>>,
}

/// Fits `params.n_trees` trees, in parallel when a rayon pool is available.
/// Output is identical for any thread count.
pub fn fit_forest<T: Scalar>(design: &DesignMatrix<T>, params: &ForestParams) -> Result<Forest<T>> {
    params.validate()?;
    let n = design.n_rows();
    if n == 0 {
        return Err(Error::InsufficientData("cannot fit a forest on zero rows".into()));
    }
    let grown: Vec<(TreeNode<T>, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = params.tree_rng(i);
            let rows: Vec<usize> = if params.bootstrap {
                let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            let tree = fit_tree(design, &rows, params, &mut rng);
            (tree, rows)
        })
        .collect();
    let (trees, in_bag) = grown.into_iter().unzip();
    Ok(Forest {
        params: params.clone(),
        feature_names: design.feature_names().to_vec(),
        trees,
        in_bag,
    })
}

impl<T: Scalar> Forest<T> {
    /// Assembles a forest from hand-built trees.
    pub fn from_trees(
        trees: Vec<TreeNode<T>>,
        feature_names: Vec<String>,
        params: ForestParams,
        in_bag: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        if !in_bag.is_empty() && in_bag.len() != trees.len() {
            return Err(Error::Dimension {
                expected: trees.len(),
                got: in_bag.len(),
            });
        }
        Ok(Forest {
            params: ForestParams {
                n_trees: trees.len(),
                ..params
            },
            feature_names,
            trees,
            in_bag,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_row(&self, row: &[T]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        Ok(())
    }

    pub fn tree_predictions(&self, row: &[T]) -> Result<Vec<T>> {
        self.check_row(row)?;
        Ok(self.trees.iter().map(|t| t.route(row)).collect())
    }

    /// Median (or mean) of the per-tree predictions.
    pub fn predict(&self, row: &[T]) -> Result<T> {
        let mut preds = self.tree_predictions(row)?;
        Ok(aggregate(&mut preds, self.params.aggregation))
    }

    pub fn predict_design(&self, design: &DesignMatrix<T>) -> Result<Vec<T>> {
        (0..design.n_rows())
            .into_par_iter()
            .map(|i| self.predict(design.row(i)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn aggregate<T: Scalar>(preds: &mut [T], how: Aggregation) -> T {
    match how {
        Aggregation::Median => stats::median_in_place(preds).unwrap_or_else(T::zero),
        Aggregation::Mean => stats::mean(preds).unwrap_or_else(T::zero),
    }
}
