//! Lagged design matrices: the target vector plus the regressor block.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::frame::Panel;
use super::month::Month;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats;

/// Rows needed before a forest may be fitted inside the evaluation protocols.
pub const MIN_FIT_ROWS: usize = 30;

/// Column name → requested lags.
pub type LagSpec = IndexMap<String, BTreeSet<usize>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Contemporaneous regressors (lag 0) allowed, except for the target.
    #[default]
    Nowcast,
    /// Every regressor lagged at least one month.
    Forecast,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nowcast" => Ok(Mode::Nowcast),
            "forecast" => Ok(Mode::Forecast),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Fill missing feature cells with the column median over retained rows.
    #[default]
    Median,
    /// Any missing feature cell is an error.
    Strict,
}

/// `"<var>_t"` for lag 0, `"<var>_t-<k>"` otherwise.
pub fn feature_label(var: &str, lag: usize) -> String {
    if lag == 0 {
        format!("{var}_t")
    } else {
        format!("{var}_t-{lag}")
    }
}

/// Splits a feature label back into `(variable, lag)`.
pub fn parse_feature_label(label: &str) -> Option<(&str, usize)> {
    if let Some(var) = label.strip_suffix("_t") {
        return Some((var, 0));
    }
    let pos = label.rfind("_t-")?;
    let lag = label[pos + 3..].parse().ok()?;
    Some((&label[..pos], lag))
}

/// Target vector and a fully observed N×d feature matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    target: Vec<T>,
    values: Vec<T>,
    n_features: usize,
    feature_names: Vec<String>,
    months: Vec<Month>,
}

impl<T: Scalar> DesignMatrix<T> {
    /// Builds a design from explicit rows. Months default to a synthetic
    /// consecutive range starting 2000-01 when `months` is `None`.
    pub fn from_rows(
        target: Vec<T>,
        rows: Vec<Vec<T>>,
        feature_names: Vec<String>,
        months: Option<Vec<Month>>,
    ) -> Result<Self> {
        let n = target.len();
        if rows.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rows.len(),
            });
        }
        let d = feature_names.len();
        let mut values = Vec::with_capacity(n * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        if values.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design contains non-finite values".into()));
        }
        let months = match months {
            Some(m) if m.len() == n => m,
            Some(m) => {
                return Err(Error::Dimension {
                    expected: n,
                    got: m.len(),
                })
            }
            None => {
                let start = Month::new(2000, 1).expect("valid month");
                (0..n as i64).map(|k| start.offset(k)).collect()
            }
        };
        Ok(DesignMatrix {
            target,
            values,
            n_features: d,
            feature_names,
            months,
        })
    }

    /// Single-feature design, handy for small fixtures.
    pub fn from_column(target: Vec<T>, feature: Vec<T>) -> Result<Self> {
        let rows = feature.into_iter().map(|v| vec![v]).collect();
        Self::from_rows(target, rows, vec!["x_t".to_string()], None)
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> T {
        self.values[row * self.n_features + feature]
    }

    pub fn column(&self, feature: usize) -> Vec<T> {
        (0..self.n_rows()).map(|i| self.value(i, feature)).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Rows `indices` (duplicates allowed) as a new design.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let d = self.n_features;
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DesignMatrix {
            target: indices.iter().map(|&i| self.target[i]).collect(),
            values,
            n_features: d,
            feature_names: self.feature_names.clone(),
            months: indices.iter().map(|&i| self.months[i]).collect(),
        }
    }

    /// Copy of the design with every feature derived from `variable` removed.
    pub fn without_variable(&self, variable: &str) -> Self {
        let keep: Vec<usize> = (0..self.n_features)
            .filter(|&j| {
                parse_feature_label(&self.feature_names[j]).map(|(v, _)| v) != Some(variable)
            })
            .collect();
        let mut values = Vec::with_capacity(self.n_rows() * keep.len());
        for i in 0..self.n_rows() {
            values.extend(keep.iter().map(|&j| self.value(i, j)));
        }
        DesignMatrix {
            target: self.target.clone(),
            values,
            n_features: keep.len(),
            feature_names: keep.iter().map(|&j| self.feature_names[j].clone()).collect(),
            months: self.months.clone(),
        }
    }

    pub(crate) fn require_rows(&self, min: usize) -> Result<()> {
        if self.n_rows() < min {
            return Err(Error::InsufficientData(format!(
                "design has {} rows, at least {min} required",
                self.n_rows()
            )));
        }
        Ok(())
    }
}

fn validate_lags(target: &str, lags: &LagSpec, mode: Mode) -> Result<()> {
    for (var, set) in lags {
        for &k in set {
            if k == 0 && var == target {
                return Err(Error::InvalidArgument(format!(
                    "target '{target}' cannot enter with lag 0"
                )));
            }
            if k == 0 && mode == Mode::Forecast {
                return Err(Error::InvalidArgument(format!(
                    "forecast mode requires lags >= 1 (got '{var}' lag 0)"
                )));
            }
        }
    }
    Ok(())
}

fn feature_plan(lags: &LagSpec) -> Vec<(&str, usize)> {
    lags.iter()
        .flat_map(|(v, set)| set.iter().map(move |&k| (v.as_str(), k)))
        .collect()
}

/// Assembles the design: one row per month whose target is observed and
/// whose every requested lag stays inside the panel. Remaining missing
/// feature cells are imputed per `imputation`.
pub fn build_design<T: Scalar, P: Panel<T> + ?Sized>(
    panel: &P,
    target: &str,
    lags: &LagSpec,
    mode: Mode,
    imputation: Imputation,
) -> Result<DesignMatrix<T>> {
    build_design_impl(panel, target, lags, mode, imputation, None).map(|(d, _)| d)
}

/// Like [`build_design`] but also returns the regressor row at
/// `query_index` (whose target is never read), imputed with the training
/// medians. Only months before `query_index` enter the design.
pub fn build_design_with_query<T: Scalar, P: Panel<T> + ?Sized>(
    panel: &P,
    target: &str,
    lags: &LagSpec,
    mode: Mode,
    imputation: Imputation,
    query_index: usize,
) -> Result<(DesignMatrix<T>, Vec<T>)> {
    let (design, query) =
        build_design_impl(panel, target, lags, mode, imputation, Some(query_index))?;
    Ok((design, query.expect("query row requested")))
}

fn build_design_impl<T: Scalar, P: Panel<T> + ?Sized>(
    panel: &P,
    target: &str,
    lags: &LagSpec,
    mode: Mode,
    imputation: Imputation,
    query_index: Option<usize>,
) -> Result<(DesignMatrix<T>, Option<Vec<T>>)> {
    if !panel.has_column(target) {
        return Err(Error::UnknownColumn(target.to_string()));
    }
    for var in lags.keys() {
        if !panel.has_column(var) {
            return Err(Error::UnknownColumn(var.clone()));
        }
    }
    validate_lags(target, lags, mode)?;
    let plan = feature_plan(lags);
    let max_lag = plan.iter().map(|&(_, k)| k).max().unwrap_or(0);
    let months = panel.months();
    let end = query_index.unwrap_or(months.len()).min(months.len());
    if let Some(q) = query_index {
        if q >= months.len() {
            return Err(Error::InvalidArgument(format!("query index {q} outside panel")));
        }
        if q < max_lag {
            return Err(Error::InsufficientData(
                "query month lacks the requested lag history".into(),
            ));
        }
    }

    let mut y = Vec::new();
    let mut raw: Vec<Vec<Option<T>>> = Vec::new();
    let mut kept_months = Vec::new();
    for t in max_lag..end {
        let Some(target_value) = panel.value(target, t) else {
            continue;
        };
        y.push(target_value);
        raw.push(plan.iter().map(|&(v, k)| panel.value(v, t - k)).collect());
        kept_months.push(months[t]);
    }
    if y.is_empty() {
        return Err(Error::InsufficientData("design is empty after dropping rows".into()));
    }

    let d = plan.len();
    let mut medians = vec![T::zero(); d];
    for (j, (var, k)) in plan.iter().enumerate() {
        let present: Vec<T> = raw.iter().filter_map(|r| r[j]).collect();
        if present.len() < raw.len() && imputation == Imputation::Strict {
            return Err(Error::InsufficientData(format!(
                "missing values in feature '{}'",
                feature_label(var, *k)
            )));
        }
        medians[j] = stats::median(&present).ok_or_else(|| {
            Error::InsufficientData(format!(
                "feature '{}' has no observed values",
                feature_label(var, *k)
            ))
        })?;
    }

    let rows: Vec<Vec<T>> = raw
        .into_iter()
        .map(|r| r.into_iter().zip(&medians).map(|(v, &m)| v.unwrap_or(m)).collect())
        .collect();
    let names = plan.iter().map(|&(v, k)| feature_label(v, k)).collect();
    let design = DesignMatrix::from_rows(y, rows, names, Some(kept_months))?;

    let query = match query_index {
        None => None,
        Some(q) => {
            let mut row = Vec::with_capacity(d);
            for (j, &(v, k)) in plan.iter().enumerate() {
                match panel.value(v, q - k) {
                    Some(x) => row.push(x),
                    None if imputation == Imputation::Strict => {
                        return Err(Error::InsufficientData(format!(
                            "missing query value for '{}'",
                            feature_label(v, k)
                        )))
                    }
                    None => row.push(medians[j]),
                }
            }
            Some(row)
        }
    };
    Ok((design, query))
}
