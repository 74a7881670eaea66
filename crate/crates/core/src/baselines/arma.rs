use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::scalar::Scalar;

pub const DEFAULT_MAX_P: usize = 5;
pub const DEFAULT_MAX_Q: usize = 5;

/// ARMA(p, q) with intercept, estimated by two least-squares passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ArmaModel<T> {
    pub p: usize,
    pub q: usize,
    pub intercept: T,
    pub ar: Vec<T>,
    pub ma: Vec<T>,
    /// `rss / n_eff`.
    pub sigma2: T,
    pub rss: T,
    pub aic: T,
    /// First index whose residual enters `rss`.
    pub start: usize,
    /// One entry per observation; entries before `start` hold the
    /// pre-sample values used to seed the recursion.
    pub residuals: Vec<T>,
}

impl<T: Scalar> ArmaModel<T> {
    pub fn n_eff(&self) -> usize {
        self.residuals.len() - self.start
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `n ln(rss / n) + 2 k`; the ratio is floored so perfect fits stay finite.
pub fn aic<T: Scalar>(rss: T, n: usize, k: usize) -> T {
    let nn = T::of_usize(n);
    let s = (rss / nn).max(T::min_positive_value());
    nn * s.ln() + T::of_usize(2 * k)
}

/// Order of the long autoregression used for residual proxies.
pub fn long_ar_order(n: usize) -> usize {
    let m = (10.0 * (n.max(2) as f64).log10()).floor() as usize;
    m.clamp(1, (n / 4).max(1))
}

/// Residuals of a long autoregression; zeros where it cannot be evaluated.
fn long_ar_residuals<T: Scalar>(y: &[T], m: usize) -> Result<Vec<T>> {
    let rows: Vec<Vec<T>> = (m..y.len())
        .map(|t| {
            let mut r = Vec::with_capacity(m + 1);
            r.push(T::one());
            r.extend((1..=m).map(|i| y[t - i]));
            r
        })
        .collect();
    let beta = least_squares(&rows, &y[m..])?;
    let mut e = vec![T::zero(); y.len()];
    for (k, row) in rows.iter().enumerate() {
        let fit: T = row.iter().zip(&beta).map(|(&a, &b)| a * b).sum();
        e[m + k] = y[m + k] - fit;
    }
    Ok(e)
}

fn validate_length(n: usize, p: usize, q: usize) -> Result<()> {
    let need = 10 * (p + q + 1);
    if n < need {
        return Err(Error::InsufficientData(format!(
            "ARMA({p},{q}) needs at least {need} observations, got {n}"
        )));
    }
    Ok(())
}

fn is_constant<T: Scalar>(y: &[T]) -> bool {
    y.windows(2).all(|w| w[0] == w[1])
}

fn constant_model<T: Scalar>(y: &[T], p: usize, q: usize, start: usize) -> ArmaModel<T> {
    let n = y.len() - start;
    ArmaModel {
        p,
        q,
        intercept: y[0],
        ar: vec![T::zero(); p],
        ma: vec![T::zero(); q],
        sigma2: T::zero(),
        rss: T::zero(),
        aic: aic(T::zero(), n, p + q + 1),
        start,
        residuals: vec![T::zero(); y.len()],
    }
}

/// Hannan-Rissanen fit scored on residuals from index `start` onwards.
fn fit_at<T: Scalar>(y: &[T], p: usize, q: usize, m: usize, proxies: Option<&[T]>, start: usize) -> Result<ArmaModel<T>> {
    if is_constant(y) {
        return Ok(constant_model(y, p, q, start));
    }
    let rows: Vec<Vec<T>> = (start..y.len())
        .map(|t| {
            let mut r = Vec::with_capacity(p + q + 1);
            r.push(T::one());
            r.extend((1..=p).map(|i| y[t - i]));
            if let Some(e) = proxies {
                r.extend((1..=q).map(|j| e[t - j]));
            }
            r
        })
        .collect();
    let beta = least_squares(&rows, &y[start..])?;
    let (intercept, ar, ma) = (beta[0], beta[1..=p].to_vec(), beta[p + 1..].to_vec());

    // Recursive residuals, seeded with the proxies before `start`.
    let mut eps = vec![T::zero(); y.len()];
    if let Some(e) = proxies {
        let seed_from = start.saturating_sub(q).max(m);
        eps[seed_from..start].copy_from_slice(&e[seed_from..start]);
    }
    let mut rss = T::zero();
    for t in start..y.len() {
        let mut fit = intercept;
        for (i, &phi) in ar.iter().enumerate() {
            fit = fit + phi * y[t - i - 1];
        }
        for (j, &theta) in ma.iter().enumerate() {
            fit = fit + theta * eps[t - j - 1];
        }
        eps[t] = y[t] - fit;
        rss = rss + eps[t] * eps[t];
    }
    if !rss.is_finite() {
        return Err(Error::Singular(format!("ARMA({p},{q}) residual recursion diverged")));
    }
    let n = y.len() - start;
    Ok(ArmaModel {
        p,
        q,
        intercept,
        ar,
        ma,
        sigma2: rss / T::of_usize(n),
        rss,
        aic: aic(rss, n, p + q + 1),
        start,
        residuals: eps,
    })
}

/// Fits ARMA(p, q) by Hannan-Rissanen: a long autoregression supplies
/// innovation proxies, then the series is regressed on its own `p` lags and
/// `q` lagged proxies.
pub fn fit_arma<T: Scalar>(series: &[T], p: usize, q: usize) -> Result<ArmaModel<T>> {
    validate_length(series.len(), p, q)?;
    if q == 0 {
        return fit_at(series, p, 0, 0, None, p);
    }
    let m = long_ar_order(series.len());
    let start = p.max(m + q);
    if is_constant(series) {
        return Ok(constant_model(series, p, q, start));
    }
    let proxies = long_ar_residuals(series, m)?;
    fit_at(series, p, q, m, Some(&proxies), start)
}

/// Fits every order up to `(max_p, max_q)` on a common sample and keeps the
/// smallest AIC; ties prefer fewer parameters, then fewer AR terms.
pub fn select_arma<T: Scalar>(series: &[T], max_p: usize, max_q: usize) -> Result<ArmaModel<T>> {
    let n = series.len();
    let m = long_ar_order(n);
    let start = if max_q == 0 { max_p } else { max_p.max(m + max_q) };
    let proxies = if max_q > 0 && !is_constant(series) && n > m + 1 {
        long_ar_residuals(series, m).ok()
    } else {
        None
    };
    let orders: Vec<(usize, usize)> = (0..=max_p)
        .flat_map(|p| (0..=max_q).map(move |q| (p, q)))
        .collect();
    let fits: Vec<ArmaModel<T>> = orders
        .par_iter()
        .filter_map(|&(p, q)| {
            validate_length(n, p, q).ok()?;
            if start >= n {
                return None;
            }
            if q > 0 && proxies.is_none() && !is_constant(series) {
                return None;
            }
            fit_at(series, p, q, m, proxies.as_deref(), start).ok()
        })
        .collect();
    let best_aic = fits
        .iter()
        .map(|f| f.aic)
        .fold(None, |acc: Option<T>, a| Some(acc.map_or(a, |b| b.min(a))))
        .ok_or_else(|| {
            Error::AllCandidatesFailed(format!(
                "no ARMA order up to ({max_p},{max_q}) could be fitted to {n} observations"
            ))
        })?;
    Ok(fits
        .into_iter()
        .filter(|f| T::tied(f.aic, best_aic))
        .min_by_key(|f| (f.p + f.q, f.p))
        .expect("at least one fit attains the minimum"))
}

/// `intercept + sum phi_i y_{t-i} + sum theta_j e_{t-j}` where the last
/// entries of `history` and `residuals` are the most recent.
pub fn arma_forecast_1step<T: Scalar>(model: &ArmaModel<T>, history: &[T], residuals: &[T]) -> Result<T> {
    if history.len() < model.p || residuals.len() < model.q {
        return Err(Error::InsufficientData(format!(
            "ARMA({},{}) forecast needs {} values and {} residuals",
            model.p, model.q, model.p, model.q
        )));
    }
    let mut f = model.intercept;
    for (i, &phi) in model.ar.iter().enumerate() {
        f = f + phi * history[history.len() - 1 - i];
    }
    for (j, &theta) in model.ma.iter().enumerate() {
        f = f + theta * residuals[residuals.len() - 1 - j];
    }
    Ok(f)
}
