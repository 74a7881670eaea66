//! Evaluation protocols: the resampled fit/test/predict loop, the rolling
//! one-step-ahead backtest and the multi-model comparison table.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    arma_forecast_1step, cv_lambda, default_lambda_grid, fit_linear, select_arma, LinearModel,
    Penalty, DEFAULT_MAX_P, DEFAULT_MAX_Q,
};
use crate::data::{
    derive_seed, parse_feature_label, train_test_split, DesignMatrix, LagSpec, Month, Panel,
    PanelWindow, PipelineSpec, MIN_FIT_ROWS,
};
use crate::error::{Error, Result};
use crate::rf::{fit_forest, Forest, ForestParams};
use crate::scalar::Scalar;
use crate::stats;

/// A fitted model that maps a regressor row to a forecast.
pub trait Predictor<T>: Send + Sync {
    fn predict(&self, row: &[T]) -> Result<T>;
}

impl<T: Scalar> Predictor<T> for Forest<T> {
    fn predict(&self, row: &[T]) -> Result<T> {
        Forest::predict(self, row)
    }
}

impl<T: Scalar> Predictor<T> for LinearModel<T> {
    fn predict(&self, row: &[T]) -> Result<T> {
        LinearModel::predict(self, row)
    }
}

/// A model family run under the resampling protocol.
pub trait Forecaster<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    /// Settles data-driven settings once per backtest month on its full
    /// training design (e.g. a cross-validated penalty).
    fn calibrate(&self, design: &DesignMatrix<T>, seed: u64) -> Result<Box<dyn Forecaster<T>>>;

    fn fit(&self, train: &DesignMatrix<T>, seed: u64) -> Result<Box<dyn Predictor<T>>>;
}

/// The random forest under fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct ForestModel {
    pub params: ForestParams,
}

impl<T: Scalar> Forecaster<T> for ForestModel {
    fn name(&self) -> &str {
        "random_forest"
    }

    fn calibrate(&self, _: &DesignMatrix<T>, _: u64) -> Result<Box<dyn Forecaster<T>>> {
        Ok(Box::new(self.clone()))
    }

    fn fit(&self, train: &DesignMatrix<T>, seed: u64) -> Result<Box<dyn Predictor<T>>> {
        let params = ForestParams {
            seed,
            ..self.params.clone()
        };
        Ok(Box::new(fit_forest(train, &params)?))
    }
}

/// Lasso or ridge; without a fixed penalty one is chosen by k-fold CV over
/// the default grid at calibration.
#[derive(Debug, Clone)]
pub struct LinearForecaster<T> {
    pub kind: Penalty,
    pub lambda: Option<T>,
    pub folds: usize,
    pub grid_points: usize,
}

impl<T> LinearForecaster<T> {
    pub fn new(kind: Penalty) -> Self {
        LinearForecaster {
            kind,
            lambda: None,
            folds: 10,
            grid_points: 50,
        }
    }
}

impl<T: Scalar> Forecaster<T> for LinearForecaster<T> {
    fn name(&self) -> &str {
        match self.kind {
            Penalty::L1 => "lasso",
            Penalty::L2 => "ridge",
        }
    }

    fn calibrate(&self, design: &DesignMatrix<T>, seed: u64) -> Result<Box<dyn Forecaster<T>>> {
        let lambda = match self.lambda {
            Some(l) => l,
            None => {
                let grid = default_lambda_grid(design, self.grid_points)?;
                let k = self.folds.min(design.n_rows());
                cv_lambda(design, self.kind, &grid, k, seed)?
            }
        };
        Ok(Box::new(LinearForecaster {
            lambda: Some(lambda),
            ..self.clone()
        }))
    }

    fn fit(&self, train: &DesignMatrix<T>, _: u64) -> Result<Box<dyn Predictor<T>>> {
        let lambda = self
            .lambda
            .ok_or_else(|| Error::InvalidArgument("linear model used before calibration".into()))?;
        Ok(Box::new(fit_linear(train, self.kind, lambda)?))
    }
}

/// Test hook: echoes one regressor column, e.g. a contemporaneous copy of
/// the target, giving a perfect forecaster on suitable panels.
#[derive(Debug, Clone)]
pub struct EchoForecaster {
    pub feature: String,
}

struct Echo(usize);

impl<T: Scalar> Predictor<T> for Echo {
    fn predict(&self, row: &[T]) -> Result<T> {
        row.get(self.0).copied().ok_or(Error::Dimension {
            expected: self.0 + 1,
            got: row.len(),
        })
    }
}

impl<T: Scalar> Forecaster<T> for EchoForecaster {
    fn name(&self) -> &str {
        "echo"
    }

    fn calibrate(&self, _: &DesignMatrix<T>, _: u64) -> Result<Box<dyn Forecaster<T>>> {
        Ok(Box::new(self.clone()))
    }

    fn fit(&self, train: &DesignMatrix<T>, _: u64) -> Result<Box<dyn Predictor<T>>> {
        let j = train
            .feature_index(&self.feature)
            .ok_or_else(|| Error::UnknownFeature(self.feature.clone()))?;
        Ok(Box::new(Echo(j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    pub iterations: usize,
    pub test_fraction: f64,
    pub base_seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            iterations: 25,
            test_fraction: 0.2,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub seed: u64,
    pub test_mae: T,
    pub prediction: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ForecastResult<T> {
    pub month: Option<Month>,
    /// Mean of the per-iteration predictions.
    pub point: T,
    /// Sample standard deviation of the per-iteration predictions.
    pub std: T,
    pub mean_test_mae: T,
    pub std_test_mae: T,
    pub records: Vec<IterationRecord<T>>,
}

impl<T: Scalar> ForecastResult<T> {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "seed", "test_mae", "prediction"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.seed.to_string(),
                r.test_mae.to_string(),
                r.prediction.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Forest version of the resampling protocol: `iterations` random 80/20
/// splits, each fitting on the training part, scoring MAE on the test part
/// and predicting `query`.
pub fn resampled_forecast<T: Scalar>(
    design: &DesignMatrix<T>,
    query: &[T],
    params: &ForestParams,
    iterations: usize,
    base_seed: u64,
) -> Result<ForecastResult<T>> {
    let protocol = Protocol {
        iterations,
        base_seed,
        ..Protocol::default()
    };
    resampled_forecast_with(design, query, &ForestModel { params: params.clone() }, &protocol)
}

/// Resampling protocol for any calibrated forecaster.
pub fn resampled_forecast_with<T: Scalar>(
    design: &DesignMatrix<T>,
    query: &[T],
    model: &dyn Forecaster<T>,
    protocol: &Protocol,
) -> Result<ForecastResult<T>> {
    if protocol.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    if query.len() != design.n_features() {
        return Err(Error::Dimension {
            expected: design.n_features(),
            got: query.len(),
        });
    }
    design.require_rows(MIN_FIT_ROWS)?;
    let records: Vec<IterationRecord<T>> = (0..protocol.iterations)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(protocol.base_seed, i as u64);
            let (train, test) = train_test_split(design.n_rows(), protocol.test_fraction, seed)?;
            let fitted = model.fit(&design.subset(&train), seed)?;
            let held = design.subset(&test);
            let preds = (0..held.n_rows())
                .map(|r| fitted.predict(held.row(r)))
                .collect::<Result<Vec<T>>>()?;
            Ok(IterationRecord {
                iteration: i,
                seed,
                test_mae: stats::mae(&preds, held.target())?,
                prediction: fitted.predict(query)?,
            })
        })
        .collect::<Result<_>>()?;
    let preds: Vec<T> = records.iter().map(|r| r.prediction).collect();
    let maes: Vec<T> = records.iter().map(|r| r.test_mae).collect();
    let lo = preds.iter().copied().fold(T::infinity(), T::min);
    let hi = preds.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(ForecastResult {
        month: None,
        // Clamped so rounding in the sum cannot leave the observed range.
        point: stats::mean(&preds).expect("iterations >= 1").max(lo).min(hi),
        std: stats::sample_std(&preds),
        mean_test_mae: stats::mean(&maes).expect("iterations >= 1"),
        std_test_mae: stats::sample_std(&maes),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BacktestRecord<T> {
    pub month: Month,
    pub forecast: T,
    pub observed: T,
    pub abs_error: T,
    /// Spread of the resampled predictions; `None` for single-fit models.
    pub forecast_std: Option<T>,
    pub test_mae: Option<T>,
    pub test_mae_std: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BacktestReport<T> {
    pub model: String,
    pub features: Vec<String>,
    pub records: Vec<BacktestRecord<T>>,
    /// Mean absolute one-step error over the window.
    pub mae: T,
    /// Sample standard deviation of the monthly absolute errors.
    pub oos_std: T,
    /// Mean over months of the per-month mean test-set MAE.
    pub test_mae: Option<T>,
    /// Mean over months of the per-month standard deviation of test MAEs.
    pub test_std: Option<T>,
}

impl<T: Scalar> BacktestReport<T> {
    fn from_records(model: &str, features: Vec<String>, records: Vec<BacktestRecord<T>>) -> Self {
        let errors: Vec<T> = records.iter().map(|r| r.abs_error).collect();
        let test: Option<Vec<T>> = records.iter().map(|r| r.test_mae).collect();
        let test_std: Option<Vec<T>> = records.iter().map(|r| r.test_mae_std).collect();
        BacktestReport {
            model: model.to_string(),
            features,
            mae: stats::mean(&errors).unwrap_or_else(T::zero),
            oos_std: stats::sample_std(&errors),
            test_mae: test.as_deref().and_then(stats::mean),
            test_std: test_std.as_deref().and_then(stats::mean),
            records,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let opt = |v: Option<T>| v.map_or_else(|| "N/A".to_string(), |x| x.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "forecast", "observed", "abs_error", "forecast_std", "test_mae"])?;
        for r in &self.records {
            w.write_record([
                r.month.to_string(),
                r.forecast.to_string(),
                r.observed.to_string(),
                r.abs_error.to_string(),
                opt(r.forecast_std),
                opt(r.test_mae),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn window_start<T: Scalar, P: Panel<T> + ?Sized>(panel: &P, window: usize) -> Result<usize> {
    let n = panel.months().len();
    if window == 0 || window >= n {
        return Err(Error::InsufficientData(format!(
            "backtest window of {window} months needs a longer panel than {n} months"
        )));
    }
    Ok(n - window)
}

fn observed<T: Scalar, P: Panel<T> + ?Sized>(panel: &P, target: &str, index: usize) -> Result<T> {
    panel.realized(target, index).ok_or_else(|| {
        Error::InsufficientData(format!(
            "target '{target}' is not observed at {}",
            panel.months()[index]
        ))
    })
}

/// Resampled forecast for panel position `index`, fitted on the panel up to
/// `index` with the target at `index` hidden.
pub fn forecast_month<T: Scalar, P: Panel<T> + ?Sized>(
    panel: &P,
    pipeline: &PipelineSpec,
    lags: &LagSpec,
    index: usize,
    model: &dyn Forecaster<T>,
    protocol: &Protocol,
) -> Result<(ForecastResult<T>, Vec<String>)> {
    let month = *panel
        .months()
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("month index {index} outside panel")))?;
    let view = PanelWindow::new(panel, index, Some(&pipeline.target));
    let (design, query) = pipeline.design_with_query(&view, lags, index)?;
    design.require_rows(MIN_FIT_ROWS)?;
    let month_seed = derive_seed(protocol.base_seed, month.ordinal() as u64);
    let calibrated = model.calibrate(&design, derive_seed(month_seed, u64::MAX))?;
    let mut result = resampled_forecast_with(
        &design,
        &query,
        calibrated.as_ref(),
        &Protocol {
            base_seed: month_seed,
            ..*protocol
        },
    )?;
    result.month = Some(month);
    Ok((result, design.feature_names().to_vec()))
}

/// One backtest step at panel position `index`: the model only sees the
/// panel up to `index` with the target at `index` hidden.
pub fn backtest_month<T: Scalar, P: Panel<T> + ?Sized>(
    panel: &P,
    pipeline: &PipelineSpec,
    lags: &LagSpec,
    index: usize,
    model: &dyn Forecaster<T>,
    protocol: &Protocol,
) -> Result<(BacktestRecord<T>, Vec<String>)> {
    let (result, features) = forecast_month(panel, pipeline, lags, index, model, protocol)?;
    let obs = observed(panel, &pipeline.target, index)?;
    Ok((
        BacktestRecord {
            month: panel.months()[index],
            forecast: result.point,
            observed: obs,
            abs_error: (obs - result.point).abs(),
            forecast_std: Some(result.std),
            test_mae: Some(result.mean_test_mae),
            test_mae_std: Some(result.std_test_mae),
        },
        features,
    ))
}

/// Rolling one-step-ahead evaluation over the last `window` months, using
/// the pipeline's lag spec.
pub fn rolling_backtest<T: Scalar, P: Panel<T> + Sync + ?Sized>(
    panel: &P,
    pipeline: &PipelineSpec,
    window: usize,
    model: &dyn Forecaster<T>,
    protocol: &Protocol,
) -> Result<BacktestReport<T>> {
    rolling_backtest_with_lags(panel, pipeline, &pipeline.lags, window, model, protocol)
}

pub fn rolling_backtest_with_lags<T: Scalar, P: Panel<T> + Sync + ?Sized>(
    panel: &P,
    pipeline: &PipelineSpec,
    lags: &LagSpec,
    window: usize,
    model: &dyn Forecaster<T>,
    protocol: &Protocol,
) -> Result<BacktestReport<T>> {
    let start = window_start(panel, window)?;
    let steps: Vec<(BacktestRecord<T>, Vec<String>)> = (start..panel.months().len())
        .into_par_iter()
        .map(|i| backtest_month(panel, pipeline, lags, i, model, protocol))
        .collect::<Result<_>>()?;
    let features = steps.first().map(|s| s.1.clone()).unwrap_or_default();
    let records = steps.into_iter().map(|s| s.0).collect();
    Ok(BacktestReport::from_records(model.name(), features, records))
}

/// Target values strictly before `index`, skipping gaps.
fn target_history<T: Scalar, P: Panel<T> + ?Sized>(panel: &P, target: &str, index: usize) -> Vec<T> {
    let view = PanelWindow::new(panel, index, Some(target));
    (0..index).filter_map(|t| view.value(target, t)).collect()
}

/// Univariate ARMA backtest: each month refits the AIC-selected model on all
/// target history before it, once, and forecasts one step.
pub fn arma_backtest<T: Scalar, P: Panel<T> + Sync + ?Sized>(
    panel: &P,
    target: &str,
    window: usize,
    max_p: usize,
    max_q: usize,
) -> Result<BacktestReport<T>> {
    if !panel.has_column(target) {
        return Err(Error::UnknownColumn(target.to_string()));
    }
    let start = window_start(panel, window)?;
    let records: Vec<BacktestRecord<T>> = (start..panel.months().len())
        .into_par_iter()
        .map(|i| {
            let history = target_history(panel, target, i);
            let model = select_arma(&history, max_p, max_q)?;
            let forecast = arma_forecast_1step(&model, &history, &model.residuals)?;
            let obs = observed(panel, target, i)?;
            Ok(BacktestRecord {
                month: panel.months()[i],
                forecast,
                observed: obs,
                abs_error: (obs - forecast).abs(),
                forecast_std: None,
                test_mae: None,
                test_mae_std: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BacktestReport::from_records("arma", vec![target.to_string()], records))
}

/// Loads a two-column `date,forecast` CSV of external forecasts.
pub fn load_consensus<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<(Month, T)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_consensus(file)
}

pub fn read_consensus<T: Scalar, R: std::io::Read>(reader: R) -> Result<Vec<(Month, T)>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("consensus row {} needs date and forecast", row + 1)));
        }
        let month: Month = rec[0].trim().parse()?;
        let value: T = rec[1]
            .trim()
            .parse()
            .ok()
            .filter(|v: &T| v.is_finite())
            .ok_or_else(|| Error::Parse(format!("non-numeric forecast '{}' at row {}", &rec[1], row + 1)))?;
        out.push((month, value));
    }
    Ok(out)
}

/// The supplied forecast nearest in time to `month`; equal distances prefer
/// the earlier forecast.
fn nearest<T: Scalar>(consensus: &[(Month, T)], month: Month) -> Option<T> {
    consensus
        .iter()
        .min_by_key(|(m, _)| {
            let gap = m.ordinal() - month.ordinal();
            (gap.abs(), gap > 0)
        })
        .map(|&(_, v)| v)
}

pub fn consensus_backtest<T: Scalar>(
    consensus: &[(Month, T)],
    reference: &BacktestReport<T>,
) -> Result<BacktestReport<T>> {
    let records = reference
        .records
        .iter()
        .map(|r| {
            let forecast = nearest(consensus, r.month)
                .ok_or_else(|| Error::InsufficientData("consensus file has no forecasts".into()))?;
            Ok(BacktestRecord {
                month: r.month,
                forecast,
                observed: r.observed,
                abs_error: (r.observed - forecast).abs(),
                forecast_std: None,
                test_mae: None,
                test_mae_std: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BacktestReport::from_records("external_consensus", vec![], records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub window: usize,
    pub protocol: Protocol,
    pub forest: ForestParams,
    pub cv_folds: usize,
    pub lambda_points: usize,
    pub arma_max_p: usize,
    pub arma_max_q: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            window: 24,
            protocol: Protocol::default(),
            forest: ForestParams::default(),
            cv_folds: 10,
            lambda_points: 50,
            arma_max_p: DEFAULT_MAX_P,
            arma_max_q: DEFAULT_MAX_Q,
        }
    }
}

/// One line of the comparison table; `None` renders as "N/A".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComparisonRow<T> {
    pub model: String,
    pub test_mae: Option<T>,
    pub test_std: Option<T>,
    pub oos_mae: Option<T>,
    pub oos_std: Option<T>,
}

impl<T: Scalar> ComparisonRow<T> {
    pub fn from_backtest(report: &BacktestReport<T>, with_test: bool) -> Self {
        ComparisonRow {
            model: report.model.clone(),
            test_mae: report.test_mae.filter(|_| with_test),
            test_std: report.test_std.filter(|_| with_test),
            oos_mae: Some(report.mae),
            oos_std: (report.records.len() > 1).then_some(report.oos_std),
        }
    }

    pub fn unavailable(model: &str) -> Self {
        ComparisonRow {
            model: model.to_string(),
            test_mae: None,
            test_std: None,
            oos_mae: None,
            oos_std: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Test,
    Oos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indistinguishable {
    pub metric: Metric,
    pub a: String,
    pub b: String,
}

/// Two MAEs are indistinguishable when they are equal or differ by less
/// than the larger of their standard deviations.
pub fn within_one_std<T: Scalar>(mae_a: T, std_a: Option<T>, mae_b: T, std_b: Option<T>) -> bool {
    let gap = (mae_a - mae_b).abs();
    if gap == T::zero() {
        return true;
    }
    match (std_a, std_b) {
        (None, None) => false,
        (a, b) => gap < a.unwrap_or_else(T::zero).max(b.unwrap_or_else(T::zero)),
    }
}

pub fn indistinguishable_pairs<T: Scalar>(rows: &[ComparisonRow<T>]) -> Vec<Indistinguishable> {
    let mut out = Vec::new();
    for metric in [Metric::Test, Metric::Oos] {
        let pick = |r: &ComparisonRow<T>| match metric {
            Metric::Test => r.test_mae.map(|m| (m, r.test_std)),
            Metric::Oos => r.oos_mae.map(|m| (m, r.oos_std)),
        };
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if let (Some((ma, sa)), Some((mb, sb))) = (pick(&rows[i]), pick(&rows[j])) {
                    if within_one_std(ma, sa, mb, sb) {
                        out.push(Indistinguishable {
                            metric,
                            a: rows[i].model.clone(),
                            b: rows[j].model.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComparisonReport<T> {
    pub rows: Vec<ComparisonRow<T>>,
    pub months: Vec<Month>,
    pub forest_features: Vec<String>,
    /// Regressors given to the linear baselines.
    pub baseline_features: Vec<String>,
    pub indistinguishable: Vec<Indistinguishable>,
}

impl<T: Scalar> ComparisonReport<T> {
    pub fn from_rows(
        rows: Vec<ComparisonRow<T>>,
        months: Vec<Month>,
        forest_features: Vec<String>,
        baseline_features: Vec<String>,
    ) -> Self {
        let indistinguishable = indistinguishable_pairs(&rows);
        ComparisonReport {
            rows,
            months,
            forest_features,
            baseline_features,
            indistinguishable,
        }
    }

    pub fn row(&self, model: &str) -> Option<&ComparisonRow<T>> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn is_indistinguishable(&self, metric: Metric, a: &str, b: &str) -> bool {
        self.indistinguishable
            .iter()
            .any(|p| p.metric == metric && ((p.a == a && p.b == b) || (p.a == b && p.b == a)))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let opt = |v: Option<T>| v.map_or_else(|| "N/A".to_string(), |x| x.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "test_mae", "test_std", "oos_mae", "oos_std"])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                opt(r.test_mae),
                opt(r.test_std),
                opt(r.oos_mae),
                opt(r.oos_std),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width table with `mean ± std` cells.
    pub fn render(&self) -> String {
        let cell = |m: Option<T>, s: Option<T>| match (m, s) {
            (Some(m), Some(s)) => format!("{:.2} ± {:.2}", m.as_f64(), s.as_f64()),
            (Some(m), None) => format!("{:.2}", m.as_f64()),
            _ => "N/A".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>16} {:>16}", "model", "test MAE", "1-month OOS MAE");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<20} {:>16} {:>16}",
                r.model,
                cell(r.test_mae, r.test_std),
                cell(r.oos_mae, r.oos_std)
            );
        }
        if !self.indistinguishable.is_empty() {
            let _ = writeln!(out, "\nwithin one standard deviation:");
            for p in &self.indistinguishable {
                let metric = match p.metric {
                    Metric::Test => "test",
                    Metric::Oos => "oos",
                };
                let _ = writeln!(out, "  [{metric}] {} ~ {}", p.a, p.b);
            }
        }
        out
    }
}

/// Runs the forest, ARMA, lasso and ridge backtests under one protocol and
/// adds the external consensus row. Linear baselines and ARMA never see the
/// pipeline's reserves column.
pub fn compare_models<T: Scalar, P: Panel<T> + Sync + ?Sized>(
    panel: &P,
    pipeline: &PipelineSpec,
    config: &CompareConfig,
    consensus: Option<&[(Month, T)]>,
) -> Result<ComparisonReport<T>> {
    let forest = rolling_backtest(
        panel,
        pipeline,
        config.window,
        &ForestModel {
            params: config.forest.clone(),
        },
        &config.protocol,
    )?;
    let baseline_lags = pipeline.baseline_lags();
    let linear = |kind| {
        rolling_backtest_with_lags(
            panel,
            pipeline,
            &baseline_lags,
            config.window,
            &LinearForecaster {
                kind,
                lambda: None,
                folds: config.cv_folds,
                grid_points: config.lambda_points,
            },
            &config.protocol,
        )
    };
    let lasso = linear(Penalty::L1)?;
    let ridge = linear(Penalty::L2)?;
    let arma = arma_backtest(
        panel,
        &pipeline.target,
        config.window,
        config.arma_max_p,
        config.arma_max_q,
    )?;
    let consensus_row = match consensus {
        Some(c) => ComparisonRow::from_backtest(&consensus_backtest(c, &forest)?, false),
        None => ComparisonRow::unavailable("external_consensus"),
    };
    let rows = vec![
        ComparisonRow::from_backtest(&forest, true),
        ComparisonRow::from_backtest(&arma, false),
        ComparisonRow::from_backtest(&lasso, true),
        ComparisonRow::from_backtest(&ridge, true),
        ComparisonRow {
            oos_std: None,
            ..consensus_row
        },
    ];
    if let (Some(reserves), true) = (
        pipeline.reserves.as_deref(),
        lasso.features.iter().any(|f| parse_feature_label(f).map(|(v, _)| v) == pipeline.reserves.as_deref()),
    ) {
        return Err(Error::InvalidArgument(format!(
            "baseline design still contains '{reserves}'"
        )));
    }
    Ok(ComparisonReport::from_rows(
        rows,
        forest.records.iter().map(|r| r.month).collect(),
        forest.features.clone(),
        lasso.features.clone(),
    ))
}
