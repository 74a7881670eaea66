//! Synthetic monthly macro panels with known regime-dependent effects.
//!
//! Exogenous drivers are stationary AR(1) processes. Monthly inflation is
//!
//! ```text
//! pi_t = c + rho(pi_{t-1}) pi_{t-1} + rho2 pi_{t-2}
//!      + beta_fx m(RIN_t) dTC_t
//!      + a_gap [g_t + (amp - 1) max(g_t - g*, 0)]
//!      + a_w w_t + b_w max(w_t - w*, 0)
//!      + 0.05 i_t + 0.04 M2_t + 0.02 oil_t + 0.5 piUSA_t - 0.1 act_t
//!      + sigma e_t
//! ```
//!
//! with `rho(x) = rho_lo` below the inertia threshold and `rho_hi` above,
//! `m(r) = mult` when reserves are under their threshold and 1 otherwise.
//! Setting a threshold to `None` removes that regime switch.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{rng_from_seed, LagSpec, Mode, Month, PipelineSpec, SeriesFrame};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const COLUMNS: [&str; 13] = [
    "Inflacion",
    "salarios",
    "A.ECO.MA",
    "i_nom_TEM",
    "base_monetaria",
    "M2",
    "trigo",
    "petroleo",
    "infla_USA",
    "TC_oficial",
    "CCL",
    "Brecha",
    "RIN",
];

const BURN_IN: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub months: usize,
    pub seed: u64,
    pub start: Month,
    pub intercept: f64,
    pub inertia_low: f64,
    pub inertia_high: f64,
    pub inertia_threshold: Option<f64>,
    pub inertia_lag2: f64,
    /// Inflation response per point of official devaluation.
    pub pass_through: f64,
    pub reserves_multiplier: f64,
    pub reserves_threshold: Option<f64>,
    pub gap_slope: f64,
    /// Slope multiplier above the gap threshold.
    pub gap_amplification: f64,
    pub gap_threshold: Option<f64>,
    /// Mean, standard deviation and AR(1) coefficient of the gap driver.
    pub gap_mean: f64,
    pub gap_sd: f64,
    pub gap_persistence: f64,
    pub wage_slope: f64,
    /// Extra slope above the wage threshold.
    pub wage_extra: f64,
    pub wage_threshold: Option<f64>,
    pub noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            months: 480,
            seed: 0,
            start: Month::new(1985, 1).expect("valid month"),
            intercept: -6.0,
            inertia_low: 0.45,
            inertia_high: 0.6,
            inertia_threshold: Some(4.0),
            inertia_lag2: 0.1,
            pass_through: 0.4,
            reserves_multiplier: 3.0,
            reserves_threshold: Some(2000.0),
            gap_slope: 0.1,
            gap_amplification: 2.0,
            gap_threshold: Some(60.0),
            gap_mean: 45.0,
            gap_sd: 27.0,
            gap_persistence: 0.3,
            wage_slope: 0.05,
            wage_extra: 0.15,
            wage_threshold: Some(4.5),
            noise: 0.25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.gap_persistence.abs() < 1.0 && self.gap_sd >= 0.0) {
            return bad("gap driver must be a stationary AR(1)".into());
        }
        if self.months < 120 {
            return bad(format!("need at least 120 months, got {}", self.months));
        }
        if !(self.noise >= 0.0) {
            return bad("noise scale must be >= 0".into());
        }
        if self.inertia_low.abs() + self.inertia_lag2.abs() >= 1.0
            || self.inertia_high.abs() + self.inertia_lag2.abs() >= 1.0
        {
            return bad("inertia coefficients must keep inflation stationary".into());
        }
        let ranges = [
            ("gap", self.gap_threshold, 0.0, 150.0),
            ("reserves", self.reserves_threshold, 500.0, 12_000.0),
            ("wage", self.wage_threshold, 0.0, 9.0),
            ("inertia", self.inertia_threshold, -2.0, 10.0),
        ];
        for (name, t, lo, hi) in ranges {
            if let Some(t) = t {
                if !(t > lo && t < hi) {
                    return bad(format!("{name} threshold {t} outside ({lo}, {hi})"));
                }
            }
        }
        Ok(())
    }
}

/// `x_t = mean + phi (x_{t-1} - mean) + sd sqrt(1 - phi^2) e_t`.
struct Ar1 {
    mean: f64,
    phi: f64,
    sd: f64,
    state: f64,
}

impl Ar1 {
    fn new(mean: f64, phi: f64, sd: f64) -> Self {
        Ar1 { mean, phi, sd, state: mean }
    }

    fn step<R: Rng>(&mut self, rng: &mut R) -> f64 {
        let e: f64 = StandardNormal.sample(rng);
        self.state = self.mean + self.phi * (self.state - self.mean) + self.sd * (1.0 - self.phi * self.phi).sqrt() * e;
        self.state
    }
}

fn above(x: f64, threshold: Option<f64>) -> f64 {
    threshold.map_or(0.0, |t| (x - t).max(0.0))
}

/// Generates the 13-column panel; identical configs give identical panels.
pub fn generate_panel<T: Scalar>(config: &SimConfig) -> Result<SeriesFrame<T>> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let mut gap = Ar1::new(config.gap_mean, config.gap_persistence, config.gap_sd);
    let mut reserves = Ar1::new(5000.0, 0.9, 3000.0);
    let mut dev = Ar1::new(3.0, 0.5, 2.0);
    let mut wages = Ar1::new(4.0, 0.7, 1.5);
    let mut activity = Ar1::new(0.2, 0.3, 1.0);
    let mut rate = Ar1::new(4.0, 0.9, 1.5);
    let mut base = Ar1::new(3.0, 0.5, 2.0);
    let mut wheat = Ar1::new(0.0, 0.3, 5.0);
    let mut oil = Ar1::new(0.0, 0.3, 6.0);
    let mut us = Ar1::new(0.25, 0.8, 0.2);

    let total = config.months + BURN_IN;
    let mut rows: Vec<[f64; 13]> = Vec::with_capacity(total);
    let (mut pi1, mut pi2) = (2.0, 2.0);
    let mut prev_gap = gap.state;
    for _ in 0..total {
        let g = gap.step(&mut rng).max(0.0);
        let r = reserves.step(&mut rng).max(100.0);
        let d = dev.step(&mut rng);
        let w = wages.step(&mut rng);
        let act = activity.step(&mut rng);
        let i = rate.step(&mut rng);
        let b = base.step(&mut rng);
        let e_m2: f64 = StandardNormal.sample(&mut rng);
        let m2 = 0.8 * b + 0.5 + e_m2;
        let wh = wheat.step(&mut rng);
        let o = oil.step(&mut rng);
        let u = us.step(&mut rng);
        let e_ccl: f64 = StandardNormal.sample(&mut rng);
        let ccl = d + 0.3 * (g - prev_gap) + e_ccl;
        prev_gap = g;

        let rho = match config.inertia_threshold {
            Some(t) if pi1 > t => config.inertia_high,
            _ => config.inertia_low,
        };
        let mult = match config.reserves_threshold {
            Some(t) if r < t => config.reserves_multiplier,
            _ => 1.0,
        };
        let e: f64 = StandardNormal.sample(&mut rng);
        let pi = config.intercept
            + rho * pi1
            + config.inertia_lag2 * pi2
            + config.pass_through * mult * d
            + config.gap_slope * (g + (config.gap_amplification - 1.0) * above(g, config.gap_threshold))
            + config.wage_slope * w
            + config.wage_extra * above(w, config.wage_threshold)
            + 0.05 * i
            + 0.04 * m2
            + 0.02 * o
            + 0.5 * u
            - 0.1 * act
            + config.noise * e;
        rows.push([pi, w, act, i, b, m2, wh, o, u, d, ccl, g, r]);
        pi2 = pi1;
        pi1 = pi;
    }

    let mut frame = SeriesFrame::with_start(config.start, config.months);
    for (j, name) in COLUMNS.iter().enumerate() {
        let col = rows[BURN_IN..].iter().map(|row| Some(T::of(row[j]))).collect();
        frame.push_column(*name, col)?;
    }
    Ok(frame)
}

/// Pipeline matching the generated panel: two inflation lags plus every
/// other column at lag 0.
pub fn default_pipeline() -> PipelineSpec {
    let mut lags = LagSpec::new();
    lags.insert("Inflacion".into(), [1, 2].into_iter().collect());
    for name in &COLUMNS[1..] {
        lags.insert((*name).into(), [0].into_iter().collect());
    }
    PipelineSpec {
        target: "Inflacion".into(),
        mode: Mode::Nowcast,
        imputation: Default::default(),
        reserves: Some("RIN".into()),
        transforms: vec![],
        lags,
    }
}
