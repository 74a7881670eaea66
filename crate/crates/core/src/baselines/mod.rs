//! Comparison models: AIC-selected ARMA and penalized linear regressions.

mod arma;
mod linear;

pub use arma::{
    aic, arma_forecast_1step, fit_arma, long_ar_order, select_arma, ArmaModel, DEFAULT_MAX_P,
    DEFAULT_MAX_Q,
};
pub use linear::{
    cv_lambda, default_lambda_grid, fit_lasso, fit_linear, fit_ridge, lambda_max,
    lasso_kkt_violation, soft_threshold, LinearModel, Penalty, LASSO_MAX_SWEEPS, LASSO_TOL,
};
