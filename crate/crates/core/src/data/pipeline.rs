//! The lag/transform configuration file.
//!
//! TOML layout:
//!
//! ```toml
//! target = "Inflacion"        # column holding monthly inflation (percent)
//! mode = "nowcast"            # or "forecast": every lag >= 1
//! imputation = "median"       # or "strict"
//! reserves = "RIN"            # dropped from baseline (linear / ARMA) designs
//!
//! [[transforms]]              # optional; when absent columns are used as-is
//! source = "ipc_index"
//! kind = "pct_change_monthly" # level | pct_change_monthly | pct_change_monthly_ma3 | diff
//! output = "Inflacion"
//!
//! [lags]                      # column -> lag set, in feature order
//! Inflacion = [1, 2]
//! TC_oficial = [0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::design::{build_design, build_design_with_query, DesignMatrix, Imputation, LagSpec, Mode};
use super::frame::{Panel, SeriesFrame};
use super::transform::{apply_transforms, TransformSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn default_reserves() -> Option<String> {
    Some("RIN".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub target: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub imputation: Imputation,
    #[serde(default = "default_reserves")]
    pub reserves: Option<String>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    pub lags: LagSpec,
}

impl PipelineSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("pipeline spec: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Applies the configured transforms; a spec without transforms passes
    /// the frame through unchanged.
    pub fn prepare<T: Scalar>(&self, frame: &SeriesFrame<T>) -> Result<SeriesFrame<T>> {
        if self.transforms.is_empty() {
            Ok(frame.clone())
        } else {
            apply_transforms(frame, &self.transforms)
        }
    }

    /// Lag spec for the linear and ARMA baselines: the forest's spec without
    /// the reserves column.
    pub fn baseline_lags(&self) -> LagSpec {
        self.lags
            .iter()
            .filter(|(v, _)| Some(v.as_str()) != self.reserves.as_deref())
            .map(|(v, s)| (v.clone(), s.clone()))
            .collect()
    }

    pub fn design<T: Scalar, P: Panel<T> + ?Sized>(&self, panel: &P) -> Result<DesignMatrix<T>> {
        build_design(panel, &self.target, &self.lags, self.mode, self.imputation)
    }

    pub(crate) fn design_with_query<T: Scalar, P: Panel<T> + ?Sized>(
        &self,
        panel: &P,
        lags: &LagSpec,
        query_index: usize,
    ) -> Result<(DesignMatrix<T>, Vec<T>)> {
        build_design_with_query(panel, &self.target, lags, self.mode, self.imputation, query_index)
    }
}
