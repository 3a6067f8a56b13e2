//! Additive-error exponential smoothing in state-space form.
//!
//! Supports the trend forms none / additive / additive-damped and additive
//! seasonality. Smoothing parameters are estimated by minimizing the in-sample
//! one-step SSE (the concentrated Gaussian likelihood) with Nelder-Mead from a
//! fixed start, and candidate forms are ranked by AICc.

mod optim;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use optim::{minimize, Minimum, NelderMeadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    None,
    Additive,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seasonal {
    None,
    Additive,
}

/// Model form. The error component is always additive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EtsSpec {
    pub trend: Trend,
    pub seasonal: Seasonal,
    /// Season length; ignored unless `seasonal` is additive.
    pub period: usize,
}

/// Weekly period used for daily data.
pub const WEEKLY: usize = 7;

// Non-seasonal models estimate initial states from this many leading points.
const INIT_WINDOW: usize = 10;

impl EtsSpec {
    pub const fn new(trend: Trend, seasonal: Seasonal, period: usize) -> Self {
        Self {
            trend,
            seasonal,
            period,
        }
    }

    /// ETS(A,N,N): simple exponential smoothing.
    pub const fn ann() -> Self {
        Self::new(Trend::None, Seasonal::None, 1)
    }

    /// ETS(A,A,N): Holt's linear trend.
    pub const fn aan() -> Self {
        Self::new(Trend::Additive, Seasonal::None, 1)
    }

    /// ETS(A,Ad,N): damped trend.
    pub const fn aadn() -> Self {
        Self::new(Trend::Damped, Seasonal::None, 1)
    }

    pub const fn ana(period: usize) -> Self {
        Self::new(Trend::None, Seasonal::Additive, period)
    }

    pub const fn aaa(period: usize) -> Self {
        Self::new(Trend::Additive, Seasonal::Additive, period)
    }

    /// The five forms searched by default, in tie-breaking order.
    pub fn default_candidates() -> Vec<EtsSpec> {
        vec![
            Self::ann(),
            Self::aan(),
            Self::aadn(),
            Self::ana(WEEKLY),
            Self::aaa(WEEKLY),
        ]
    }

    pub fn has_trend(&self) -> bool {
        self.trend != Trend::None
    }

    pub fn is_damped(&self) -> bool {
        self.trend == Trend::Damped
    }

    pub fn is_seasonal(&self) -> bool {
        self.seasonal == Seasonal::Additive
    }

    fn validate(&self) -> Result<()> {
        if self.is_seasonal() && self.period < 2 {
            return Err(Error::InvalidParameter(format!(
                "seasonal period must be at least 2, got {}",
                self.period
            )));
        }
        Ok(())
    }

    /// Free parameters counted by AICc: smoothing parameters plus initial
    /// states (seasonal states are constrained to sum to zero).
    pub fn n_free_params(&self) -> usize {
        let smoothing = 1
            + usize::from(self.has_trend())
            + usize::from(self.is_damped())
            + usize::from(self.is_seasonal());
        let states = 1
            + usize::from(self.has_trend())
            + if self.is_seasonal() {
                self.period - 1
            } else {
                0
            };
        smoothing + states
    }

    /// Shortest series this form accepts.
    pub fn min_len(&self) -> usize {
        let base = if self.is_seasonal() {
            2 * self.period + 3
        } else {
            5
        };
        base.max(self.n_free_params() + 2)
    }
}

impl fmt::Display for EtsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trend = match self.trend {
            Trend::None => "N",
            Trend::Additive => "A",
            Trend::Damped => "Ad",
        };
        match self.seasonal {
            Seasonal::None => write!(f, "ETS(A,{trend},N)"),
            Seasonal::Additive => write!(f, "ETS(A,{trend},A[{}])", self.period),
        }
    }
}

/// Smoothing parameters; optional entries are present exactly when the
/// model form uses them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub phi: Option<f64>,
    pub gamma: Option<f64>,
}

pub const PHI_MIN: f64 = 0.8;
pub const PHI_MAX: f64 = 0.98;

impl EtsParams {
    /// Deterministic optimizer start.
    fn start(spec: &EtsSpec) -> Self {
        Self {
            alpha: 0.1,
            beta: spec.has_trend().then_some(0.01),
            phi: spec.is_damped().then_some(0.97),
            gamma: spec.is_seasonal().then_some(0.01),
        }
    }

    fn to_vec(self) -> Vec<f64> {
        std::iter::once(self.alpha)
            .chain(self.beta)
            .chain(self.phi)
            .chain(self.gamma)
            .collect()
    }

    fn from_slice(spec: &EtsSpec, x: &[f64]) -> Self {
        let mut it = x.iter().copied();
        let alpha = it.next().expect("alpha");
        let beta = if spec.has_trend() { it.next() } else { None };
        let phi = if spec.is_damped() { it.next() } else { None };
        let gamma = if spec.is_seasonal() { it.next() } else { None };
        Self {
            alpha,
            beta,
            phi,
            gamma,
        }
    }

    /// Initial simplex offsets, chosen so every vertex is admissible.
    fn steps(spec: &EtsSpec) -> Vec<f64> {
        std::iter::once(0.1)
            .chain(spec.has_trend().then_some(0.01))
            .chain(spec.is_damped().then_some(-0.05))
            .chain(spec.is_seasonal().then_some(0.01))
            .collect()
    }

    pub fn is_admissible(&self) -> bool {
        let a = self.alpha;
        if !(a > 0.0 && a < 1.0) {
            return false;
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b < a) {
                return false;
            }
        }
        if let Some(p) = self.phi {
            if !(PHI_MIN..=PHI_MAX).contains(&p) {
                return false;
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0 - a) {
                return false;
            }
        }
        true
    }

    fn damping(&self) -> f64 {
        self.phi.unwrap_or(1.0)
    }
}

/// Level, trend and seasonal states. `seasonal` is ordered oldest first and
/// is empty for non-seasonal models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub seasonal: Vec<f64>,
}

impl EtsState {
    /// Heuristic initial states from the leading observations: level from the
    /// mean of the first cycle, trend from the first-cycle slope, seasonal
    /// indices from first-cycle deviations about the (detrended) mean.
    fn initial(spec: &EtsSpec, y: &[f64]) -> Self {
        if spec.is_seasonal() {
            let m = spec.period;
            let mean1 = y[..m].iter().sum::<f64>() / m as f64;
            let slope = if spec.has_trend() {
                let mean2 = y[m..2 * m].iter().sum::<f64>() / m as f64;
                (mean2 - mean1) / m as f64
            } else {
                0.0
            };
            let centre = (m as f64 + 1.0) / 2.0;
            let seasonal = (0..m)
                .map(|i| y[i] - (mean1 + slope * (i as f64 + 1.0 - centre)))
                .collect();
            Self {
                level: mean1 - slope * centre,
                trend: slope,
                seasonal,
            }
        } else {
            let w = y.len().min(INIT_WINDOW);
            let mean = y[..w].iter().sum::<f64>() / w as f64;
            let slope = if spec.has_trend() && w > 1 {
                (y[w - 1] - y[0]) / (w - 1) as f64
            } else {
                0.0
            };
            Self {
                level: mean - slope * (w as f64 + 1.0) / 2.0,
                trend: slope,
                seasonal: Vec::new(),
            }
        }
    }
}

/// Runs the one-step recursions over `y`, returning the SSE and final state.
fn filter(spec: &EtsSpec, params: &EtsParams, init: &EtsState, y: &[f64]) -> (f64, EtsState) {
    let phi = params.damping();
    let alpha = params.alpha;
    let beta = params.beta.unwrap_or(0.0);
    let gamma = params.gamma.unwrap_or(0.0);
    let has_trend = spec.has_trend();

    let mut level = init.level;
    let mut trend = init.trend;
    let mut seasonal = init.seasonal.clone();
    let m = seasonal.len();
    let mut pos = 0usize;
    let mut sse = 0.0;

    for &obs in y {
        let damped_trend = if has_trend { phi * trend } else { 0.0 };
        let season = if m > 0 { seasonal[pos] } else { 0.0 };
        let err = obs - (level + damped_trend + season);
        sse += err * err;
        level = level + damped_trend + alpha * err;
        if has_trend {
            trend = damped_trend + beta * err;
        }
        if m > 0 {
            seasonal[pos] = season + gamma * err;
            pos = (pos + 1) % m;
        }
    }
    if m > 0 {
        seasonal.rotate_left(pos);
    }
    (
        sse,
        EtsState {
            level,
            trend,
            seasonal,
        },
    )
}

/// Concentrated Gaussian log-likelihood for `n` residuals with total `sse`.
pub fn gaussian_loglik(sse: f64, n: usize) -> f64 {
    let n = n as f64;
    let sigma2 = (sse / n).max(f64::MIN_POSITIVE);
    -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

/// Corrected Akaike information criterion.
pub fn aicc(loglik: f64, k: usize, n: usize) -> f64 {
    let (k, n) = (k as f64, n as f64);
    -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

/// A fitted model: form, parameters, states and information criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEts {
    pub spec: EtsSpec,
    pub params: EtsParams,
    pub initial_state: EtsState,
    pub final_state: EtsState,
    pub sse: f64,
    pub loglik: f64,
    pub aicc: f64,
    pub n: usize,
}

impl FittedEts {
    fn evaluate(spec: EtsSpec, params: EtsParams, y: &[f64]) -> Self {
        let initial_state = EtsState::initial(&spec, y);
        let (sse, final_state) = filter(&spec, &params, &initial_state, y);
        let loglik = gaussian_loglik(sse, y.len());
        Self {
            spec,
            params,
            initial_state,
            final_state,
            sse,
            loglik,
            aicc: aicc(loglik, spec.n_free_params(), y.len()),
            n: y.len(),
        }
    }

    /// Re-runs the state recursions over `series` with the parameters held
    /// fixed. Used when an origin advances without re-estimation.
    pub fn refilter(&self, series: &[f64]) -> Result<Self> {
        check_series(&self.spec, series)?;
        Ok(Self::evaluate(self.spec, self.params, series))
    }

    pub fn forecast(&self, h: usize) -> Vec<f64> {
        forecast_ets(self, h)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_series(spec: &EtsSpec, y: &[f64]) -> Result<()> {
    spec.validate()?;
    if y.len() < spec.min_len() {
        return Err(Error::InsufficientData(format!(
            "{spec} needs at least {} observations, got {}",
            spec.min_len(),
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "series contains non-finite values".into(),
        ));
    }
    Ok(())
}

pub fn fit_ets(series: &[f64], spec: EtsSpec) -> Result<FittedEts> {
    fit_ets_with(series, spec, NelderMeadOptions::default())
}

pub fn fit_ets_with(series: &[f64], spec: EtsSpec, opts: NelderMeadOptions) -> Result<FittedEts> {
    check_series(&spec, series)?;
    let init = EtsState::initial(&spec, series);
    let objective = |x: &[f64]| {
        let params = EtsParams::from_slice(&spec, x);
        if !params.is_admissible() {
            return f64::INFINITY;
        }
        filter(&spec, &params, &init, series).0
    };
    let start = EtsParams::start(&spec);
    let best = minimize(objective, &start.to_vec(), &EtsParams::steps(&spec), opts);
    let params = EtsParams::from_slice(&spec, &best.x);
    Ok(FittedEts::evaluate(spec, params, series))
}

/// Fits every candidate and returns the one with the smallest AICc; ties go
/// to the earlier candidate.
pub fn select_ets(series: &[f64], candidates: &[EtsSpec]) -> Result<FittedEts> {
    select_ets_with(series, candidates, NelderMeadOptions::default())
}

pub fn select_ets_with(
    series: &[f64],
    candidates: &[EtsSpec],
    opts: NelderMeadOptions,
) -> Result<FittedEts> {
    if candidates.is_empty() {
        return Err(Error::Selection(vec!["no candidate forms given".into()]));
    }
    let mut best: Option<FittedEts> = None;
    let mut causes = Vec::new();
    for spec in candidates {
        match fit_ets_with(series, *spec, opts) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                    best = Some(fit);
                }
            }
            Err(e) => causes.push(format!("{spec}: {e}")),
        }
    }
    best.ok_or(Error::Selection(causes))
}

/// Point forecasts for steps 1..=h.
pub fn forecast_ets(model: &FittedEts, h: usize) -> Vec<f64> {
    let state = &model.final_state;
    let phi = model.params.damping();
    let m = state.seasonal.len();
    let mut damp_sum = 0.0;
    let mut phi_pow = 1.0;
    (1..=h)
        .map(|step| {
            let mut value = state.level;
            if model.spec.has_trend() {
                phi_pow *= phi;
                damp_sum += phi_pow;
                value += damp_sum * state.trend;
            }
            if m > 0 {
                value += state.seasonal[(step - 1) % m];
            }
            value
        })
        .collect()
}

/// The model-fitting handle passed through reconciliation, the compositional
/// pipelines and the backtest: a candidate set plus optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsEngine {
    pub candidates: Vec<EtsSpec>,
    pub optimizer: NelderMeadOptions,
}

impl Default for EtsEngine {
    fn default() -> Self {
        Self {
            candidates: EtsSpec::default_candidates(),
            optimizer: NelderMeadOptions::default(),
        }
    }
}

impl EtsEngine {
    pub fn with_candidates(candidates: Vec<EtsSpec>) -> Self {
        Self {
            candidates,
            ..Self::default()
        }
    }

    pub fn select(&self, series: &[f64]) -> Result<FittedEts> {
        select_ets_with(series, &self.candidates, self.optimizer)
    }

    pub fn fit(&self, series: &[f64], spec: EtsSpec) -> Result<FittedEts> {
        fit_ets_with(series, spec, self.optimizer)
    }
}
