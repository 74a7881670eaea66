//! Grid search over forest hyperparameters by k-fold cross-validated MAE.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_partition, DesignMatrix};
use crate::error::{Error, Result};
use crate::rf::{fit_forest, ForestParams};
use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub feature_fraction: Vec<f64>,
    pub min_leaf: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    /// Settings shared by every configuration (aggregation, bootstrap).
    pub base: ForestParams,
}

impl Default for TuneGrid {
    fn default() -> Self {
        TuneGrid {
            n_trees: vec![100, 300, 500],
            max_depth: vec![5, 10, 15, 20],
            feature_fraction: vec![0.3],
            min_leaf: vec![1, 5],
            folds: 10,
            seed: 0,
            base: ForestParams::default(),
        }
    }
}

impl TuneGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees.is_empty()
            || self.max_depth.is_empty()
            || self.feature_fraction.is_empty()
            || self.min_leaf.is_empty()
        {
            return Err(Error::InvalidArgument("every grid axis needs a value".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        for p in self.configurations() {
            p.validate()?;
        }
        Ok(())
    }

    /// Cartesian product in axis order; forests are seeded from `seed`.
    pub fn configurations(&self) -> Vec<ForestParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &feature_fraction in &self.feature_fraction {
                    for &min_leaf in &self.min_leaf {
                        out.push(ForestParams {
                            n_trees,
                            max_depth,
                            feature_fraction,
                            min_leaf,
                            seed: self.seed,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TuneEntry<T> {
    pub params: ForestParams,
    pub fold_maes: Vec<T>,
    pub mean_mae: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TuneReport<T> {
    pub folds: Vec<Vec<usize>>,
    pub entries: Vec<TuneEntry<T>>,
    pub winner: ForestParams,
}

/// Scores every configuration on one shared fold partition and returns the
/// lowest mean held-out MAE. Ties prefer fewer trees, then shallower depth.
pub fn grid_search<T: Scalar>(design: &DesignMatrix<T>, grid: &TuneGrid) -> Result<TuneReport<T>> {
    grid.validate()?;
    let folds = kfold_partition(design.n_rows(), grid.folds, grid.seed)?;
    let configs = grid.configurations();
    let k = folds.len();
    let trains: Vec<Vec<usize>> = (0..k)
        .map(|f| {
            folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect::<Vec<_>>()
        })
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .collect();
    let scores: Vec<T> = (0..configs.len() * k)
        .into_par_iter()
        .map(|job| {
            let (c, f) = (job / k, job % k);
            let forest = fit_forest(&design.subset(&trains[f]), &configs[c])?;
            let held = design.subset(&folds[f]);
            stats::mae(&forest.predict_design(&held)?, held.target())
        })
        .collect::<Result<_>>()?;
    let entries: Vec<TuneEntry<T>> = configs
        .into_iter()
        .zip(scores.chunks(k))
        .map(|(params, maes)| TuneEntry {
            params,
            fold_maes: maes.to_vec(),
            mean_mae: stats::mean(maes).expect("k >= 2"),
        })
        .collect();
    let winner = entries
        .iter()
        .min_by(|a, b| {
            a.mean_mae
                .partial_cmp(&b.mean_mae)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.params.n_trees.cmp(&b.params.n_trees))
                .then(a.params.max_depth.cmp(&b.params.max_depth))
        })
        .expect("non-empty grid")
        .params
        .clone();
    Ok(TuneReport {
        folds,
        entries,
        winner,
    })
}

impl<T: Scalar> TuneReport<T> {
    /// One row per configuration with its per-fold scores.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let k = self.folds.len();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["n_trees", "max_depth", "feature_fraction", "min_leaf", "mean_mae"]
            .map(String::from)
            .to_vec();
        header.extend((1..=k).map(|f| format!("fold_{f}")));
        header.push("winner".into());
        w.write_record(&header)?;
        for e in &self.entries {
            let p = &e.params;
            let mut rec = vec![
                p.n_trees.to_string(),
                p.max_depth.to_string(),
                p.feature_fraction.to_string(),
                p.min_leaf.to_string(),
                e.mean_mae.to_string(),
            ];
            rec.extend(e.fold_maes.iter().map(T::to_string));
            rec.push((*p == self.winner).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let csv_path = dir.join("tune.csv");
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(f)?;
        let json_path = dir.join("tune.json");
        std::fs::write(&json_path, self.to_json()?).map_err(|e| Error::io(&json_path, e))
    }
}
