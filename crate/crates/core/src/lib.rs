pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
pub mod explain;
pub mod forecast;
mod linalg;
pub mod rf;
pub mod scalar;
pub mod simdata;
pub mod stats;
pub mod svg;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Forest64 = rf::Forest<f64>;
pub type Forest32 = rf::Forest<f32>;
pub type DesignMatrix64 = data::DesignMatrix<f64>;
pub type DesignMatrix32 = data::DesignMatrix<f32>;
pub type SeriesFrame64 = data::SeriesFrame<f64>;
pub type SeriesFrame32 = data::SeriesFrame<f32>;
pub type LinearModel64 = baselines::LinearModel<f64>;
pub type LinearModel32 = baselines::LinearModel<f32>;
pub type ArmaModel64 = baselines::ArmaModel<f64>;
pub type ArmaModel32 = baselines::ArmaModel<f32>;
pub type ForecastResult64 = forecast::ForecastResult<f64>;
pub type BacktestReport64 = forecast::BacktestReport<f64>;
pub type ComparisonReport64 = forecast::ComparisonReport<f64>;
