//! Rolling one-step-ahead backtest scored by MASE on fuel-mix shares.
//!
//! For every test day the six methods are fitted on the expanding history
//! that ends the day before, forecast one day ahead, and scored against the
//! realized shares. Hierarchical level forecasts are turned into shares by
//! dividing by their own forecast total.

use std::fmt::Write as _;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coda::{CodaOptions, CompositionalModel, Transform};
use crate::error::{Error, Result};
use crate::ets::EtsEngine;
use crate::ingest::SplitSpec;
use crate::model::{to_shares, CompositionSeries, GenerationPanel, ZeroTotalPolicy};
use crate::reconcile::{
    bottom_up_from, proportions_from_forecasts, td_proportions_gsa, td_proportions_gsf,
    top_down_from, BottomModels, DisaggregationProportions, ReconciledForecast, TotalModel,
};

/// Forecasting methods in canonical (tie-breaking) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum MethodId {
    BU,
    TDGSA,
    TDGSF,
    TDFP,
    CLR,
    CDF,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::BU,
        MethodId::TDGSA,
        MethodId::TDGSF,
        MethodId::TDFP,
        MethodId::CLR,
        MethodId::CDF,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BU => "BU",
            Self::TDGSA => "TDGSA",
            Self::TDGSF => "TDGSF",
            Self::TDFP => "TDFP",
            Self::CLR => "CLR",
            Self::CDF => "CDF",
        }
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self, Self::BU | Self::TDGSA | Self::TDGSF | Self::TDFP)
    }

    /// Parses a comma-separated list, returning it sorted into canonical
    /// order without duplicates.
    pub fn parse_list(s: &str) -> Result<Vec<MethodId>> {
        let mut out = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(MethodId::from_str)
            .collect::<Result<Vec<_>>>()?;
        if out.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// MASE of one day's share forecast, scaled by the naïve (previous-day)
/// error. `None` when the naïve error is zero and the ratio is undefined.
pub fn mase_day(actual: &[f64], forecast: &[f64], prev_actual: &[f64]) -> Result<Option<f64>> {
    if actual.len() != forecast.len() || actual.len() != prev_actual.len() || actual.is_empty() {
        return Err(Error::InvalidDimension(format!(
            "MASE needs equal non-empty vectors, got {}, {}, {}",
            actual.len(),
            forecast.len(),
            prev_actual.len()
        )));
    }
    let d = actual.len() as f64;
    let num = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).abs())
        .sum::<f64>()
        / d;
    let den = actual
        .iter()
        .zip(prev_actual)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / d;
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(num / den))
}

/// Counts, per column, the rows where that column holds the smallest value.
/// Ties go to the earliest column. Rows that are entirely +∞ (or NaN) are
/// not assigned and are returned as the second element.
pub fn winner_counts(per_day_mase: &[Vec<f64>]) -> (Vec<usize>, usize) {
    let width = per_day_mase.first().map_or(0, Vec::len);
    let mut counts = vec![0; width];
    let mut unassigned = 0;
    for row in per_day_mase {
        let mut best: Option<(usize, f64)> = None;
        for (j, v) in row.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, b)| *v < b) {
                best = Some((j, *v));
            }
        }
        match best {
            Some((j, _)) => counts[j] += 1,
            None => unassigned += 1,
        }
    }
    (counts, unassigned)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOptions {
    pub split: SplitSpec,
    /// Re-estimate model parameters every this many origins; states are
    /// re-run over the extended history at every origin.
    pub refit_every: usize,
    pub engine: EtsEngine,
    pub coda: CodaOptions,
    pub zero_total_policy: ZeroTotalPolicy,
}

impl Default for BacktestOptions {
    fn default() -> Self {
        Self {
            split: SplitSpec::default(),
            refit_every: 1,
            engine: EtsEngine::default(),
            coda: CodaOptions::default(),
            zero_total_policy: ZeroTotalPolicy::default(),
        }
    }
}

/// Fitted component models shared by the methods at one forecast origin.
///
/// BU and TDFP share the fuel-type models, the three top-down methods share
/// the total model. Failures are kept per component so one failing model
/// only fails the methods that depend on it.
#[derive(Debug, Clone)]
pub struct MethodSuite {
    methods: Vec<MethodId>,
    bottom: Option<Result<BottomModels, String>>,
    total: Option<Result<TotalModel, String>>,
    clr: Option<Result<CompositionalModel, String>>,
    cdf: Option<Result<CompositionalModel, String>>,
}

/// A hierarchical forecast together with the proportions it was split by.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalForecast {
    pub forecast: ReconciledForecast,
    pub proportions: Option<DisaggregationProportions>,
}

fn needs_bottom(methods: &[MethodId]) -> bool {
    methods
        .iter()
        .any(|m| matches!(m, MethodId::BU | MethodId::TDFP))
}

fn needs_total(methods: &[MethodId]) -> bool {
    methods
        .iter()
        .any(|m| matches!(m, MethodId::TDGSA | MethodId::TDGSF | MethodId::TDFP))
}

fn composition(history: &GenerationPanel, opts: &BacktestOptions) -> Result<CompositionSeries> {
    to_shares(history, opts.zero_total_policy)
}

impl MethodSuite {
    pub fn fit(history: &GenerationPanel, methods: &[MethodId], opts: &BacktestOptions) -> Self {
        let engine = &opts.engine;
        let coda = |t: Transform| {
            composition(history, opts)
                .and_then(|c| CompositionalModel::fit(&c, t, engine, opts.coda))
                .map_err(|e| e.to_string())
        };
        Self {
            methods: methods.to_vec(),
            bottom: needs_bottom(methods)
                .then(|| BottomModels::fit(history, engine).map_err(|e| e.to_string())),
            total: needs_total(methods)
                .then(|| TotalModel::fit(history, engine).map_err(|e| e.to_string())),
            clr: methods
                .contains(&MethodId::CLR)
                .then(|| coda(Transform::Clr)),
            cdf: methods
                .contains(&MethodId::CDF)
                .then(|| coda(Transform::CdfLogit)),
        }
    }

    /// Carries the fitted forms and parameters forward to a longer history.
    pub fn refresh(&self, history: &GenerationPanel, opts: &BacktestOptions) -> Self {
        fn step<T>(
            slot: &Option<Result<T, String>>,
            f: impl FnOnce(&T) -> Result<T>,
        ) -> Option<Result<T, String>> {
            slot.as_ref().map(|r| match r {
                Ok(model) => f(model).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            })
        }
        let comp = || composition(history, opts);
        Self {
            methods: self.methods.clone(),
            bottom: step(&self.bottom, |m| m.refresh(history)),
            total: step(&self.total, |m| m.refresh(history)),
            clr: step(&self.clr, |m| m.refresh(&comp()?)),
            cdf: step(&self.cdf, |m| m.refresh(&comp()?)),
        }
    }

    fn component<'a, T>(slot: &'a Option<Result<T, String>>, what: &str) -> Result<&'a T, String> {
        match slot {
            Some(Ok(m)) => Ok(m),
            Some(Err(e)) => Err(e.clone()),
            None => Err(format!("{what} models were not fitted")),
        }
    }

    /// Level forecast of a hierarchical method. `history` supplies the
    /// historical proportions for TDGSA and TDGSF.
    pub fn forecast_hierarchical(
        &self,
        method: MethodId,
        history: &GenerationPanel,
        h: usize,
    ) -> Result<HierarchicalForecast, String> {
        let bottom = || Self::component(&self.bottom, "fuel-type");
        let total = || Self::component(&self.total, "total");
        let split = |props: DisaggregationProportions| -> Result<HierarchicalForecast, String> {
            Ok(HierarchicalForecast {
                forecast: top_down_from(total()?.forecast(h), &props),
                proportions: Some(props),
            })
        };
        match method {
            MethodId::BU => Ok(HierarchicalForecast {
                forecast: bottom_up_from(&bottom()?.forecast(h)),
                proportions: None,
            }),
            MethodId::TDGSA => split(td_proportions_gsa(history).map_err(|e| e.to_string())?),
            MethodId::TDGSF => split(td_proportions_gsf(history).map_err(|e| e.to_string())?),
            MethodId::TDFP => split(
                proportions_from_forecasts(&bottom()?.forecast(h)).map_err(|e| e.to_string())?,
            ),
            MethodId::CLR | MethodId::CDF => Err(format!("{method} is not hierarchical")),
        }
    }

    /// Share forecast of any method.
    pub fn forecast_shares(
        &self,
        method: MethodId,
        history: &GenerationPanel,
        h: usize,
    ) -> Result<Vec<f64>, String> {
        match method {
            MethodId::CLR => Ok(Self::component(&self.clr, "CLR")?.forecast(h)),
            MethodId::CDF => Ok(Self::component(&self.cdf, "CDF")?.forecast(h)),
            _ => self
                .forecast_hierarchical(method, history, h)?
                .forecast
                .shares()
                .map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub date: NaiveDate,
    pub method: MethodId,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BacktestDiagnostics {
    pub refit_every: usize,
    /// Test days whose naïve denominator is zero; excluded from means and
    /// counts.
    pub undefined_days: Vec<NaiveDate>,
    pub failed_cells: Vec<FailedCell>,
    /// Scored days on which every method failed.
    pub unassigned_days: usize,
    /// Largest |total - Σ bottom| / max(1, total) over hierarchical forecasts.
    pub max_coherence_gap: f64,
    /// Largest |Σ p - 1| over top-down proportion vectors.
    pub max_proportion_sum_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub region: String,
    pub methods: Vec<MethodId>,
    pub fuel_types: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub test_dates: Vec<NaiveDate>,
    /// n_test rows, one column per method. NaN marks an undefined day,
    /// +∞ a failed cell.
    #[serde(skip)]
    pub per_day_mase: Vec<Vec<f64>>,
    pub mean_mase: Vec<f64>,
    pub winner_counts: Vec<usize>,
    pub diagnostics: BacktestDiagnostics,
}

/// One test day's output, before assembly into the report.
struct DayResult {
    row: Vec<f64>,
    failures: Vec<(MethodId, String)>,
    coherence_gap: f64,
    proportion_error: f64,
}

fn score_day(
    suite: &MethodSuite,
    history: &GenerationPanel,
    methods: &[MethodId],
    actual: &[f64],
    prev: &[f64],
) -> Result<DayResult> {
    let mut out = DayResult {
        row: Vec::with_capacity(methods.len()),
        failures: Vec::new(),
        coherence_gap: 0.0,
        proportion_error: 0.0,
    };
    let naive_defined = mase_day(actual, prev, prev)?.is_some();
    for &method in methods {
        if method.is_hierarchical() {
            if let Ok(hf) = suite.forecast_hierarchical(method, history, 1) {
                let f = &hf.forecast;
                let gap = (f.total - f.bottom.iter().sum::<f64>()).abs() / f.total.max(1.0);
                out.coherence_gap = out.coherence_gap.max(gap);
                if let Some(p) = &hf.proportions {
                    let err = (p.p.iter().sum::<f64>() - 1.0).abs();
                    out.proportion_error = out.proportion_error.max(err);
                }
            }
        }
        let cell = match suite.forecast_shares(method, history, 1) {
            Ok(forecast) => mase_day(actual, &forecast, prev)?.unwrap_or(f64::NAN),
            Err(e) => {
                out.failures.push((method, e));
                f64::INFINITY
            }
        };
        out.row.push(if naive_defined { cell } else { f64::NAN });
    }
    Ok(out)
}

/// Runs the rolling backtest over the test partition of `panel`.
pub fn rolling_backtest(
    panel: &GenerationPanel,
    methods: &[MethodId],
    opts: &BacktestOptions,
) -> Result<BacktestReport> {
    if opts.refit_every == 0 {
        return Err(Error::InvalidParameter(
            "refit_every must be at least 1".into(),
        ));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods to evaluate".into()));
    }

    let n = panel.n_days();
    let (train, test) = crate::ingest::split_train_test(panel, opts.split)?;
    let n_train = train.n_days();
    let n_test = test.n_days();
    let shares = to_shares(panel, opts.zero_total_policy)?;
    let actual = shares.shares();

    let blocks: Vec<std::ops::Range<usize>> = (0..n_test)
        .step_by(opts.refit_every)
        .map(|s| s..(s + opts.refit_every).min(n_test))
        .collect();

    let days: Vec<DayResult> = blocks
        .par_iter()
        .map(|block| -> Result<Vec<DayResult>> {
            let mut results = Vec::with_capacity(block.len());
            let mut base: Option<MethodSuite> = None;
            for i in block.clone() {
                let origin = n_train + i;
                let history = panel.slice(0..origin)?;
                let suite = match &base {
                    None => MethodSuite::fit(&history, &methods, opts),
                    Some(b) => b.refresh(&history, opts),
                };
                results.push(score_day(
                    &suite,
                    &history,
                    &methods,
                    &actual[origin],
                    &actual[origin - 1],
                )?);
                if base.is_none() {
                    base = Some(suite);
                }
            }
            Ok(results)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    debug_assert_eq!(days.len(), n - n_train);

    let test_dates = test.dates().to_vec();
    let mut diagnostics = BacktestDiagnostics {
        refit_every: opts.refit_every,
        ..Default::default()
    };
    let mut per_day = Vec::with_capacity(n_test);
    for (day, date) in days.into_iter().zip(&test_dates) {
        if day.row.iter().all(|v| v.is_nan()) {
            diagnostics.undefined_days.push(*date);
        }
        for (method, error) in day.failures {
            diagnostics.failed_cells.push(FailedCell {
                date: *date,
                method,
                error,
            });
        }
        diagnostics.max_coherence_gap = diagnostics.max_coherence_gap.max(day.coherence_gap);
        diagnostics.max_proportion_sum_error = diagnostics
            .max_proportion_sum_error
            .max(day.proportion_error);
        per_day.push(day.row);
    }

    let scored: Vec<Vec<f64>> = per_day
        .iter()
        .filter(|r| !r.iter().all(|v| v.is_nan()))
        .cloned()
        .collect();
    let (mut winner_counts, unassigned) = winner_counts(&scored);
    winner_counts.resize(methods.len(), 0);
    diagnostics.unassigned_days = unassigned;
    let mean_mase = (0..methods.len())
        .map(|j| {
            let finite: Vec<f64> = scored
                .iter()
                .map(|r| r[j])
                .filter(|v| v.is_finite())
                .collect();
            finite.iter().sum::<f64>() / finite.len() as f64
        })
        .collect();

    Ok(BacktestReport {
        region: panel.region().to_string(),
        methods,
        fuel_types: panel.fuel_names(),
        n_train,
        n_test,
        test_dates,
        per_day_mase: per_day,
        mean_mase,
        winner_counts,
        diagnostics,
    })
}

impl BacktestReport {
    /// Number of days that entered the means and counts.
    pub fn n_scored(&self) -> usize {
        self.n_test - self.diagnostics.undefined_days.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-day MASE matrix as CSV: `date,<method>...`; `NA` marks an
    /// undefined day and `failed` a failed cell.
    pub fn per_day_csv(&self) -> String {
        let mut out = String::from("date");
        for m in &self.methods {
            out.push(',');
            out.push_str(m.as_str());
        }
        out.push('\n');
        for (date, row) in self.test_dates.iter().zip(&self.per_day_mase) {
            out.push_str(&date.to_string());
            for v in row {
                out.push(',');
                if v.is_nan() {
                    out.push_str("NA");
                } else if v.is_infinite() {
                    out.push_str("failed");
                } else {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Mean-MASE and winning-day tables, one row per region.
pub mod table {
    use super::*;

    const MASE_WIDTH: usize = 8;
    const COUNT_WIDTH: usize = 7;

    fn check_methods(reports: &[BacktestReport]) -> Result<&[MethodId]> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidParameter("no reports to tabulate".into()))?;
        if reports.iter().any(|r| r.methods != first.methods) {
            return Err(Error::InvalidParameter(
                "reports cover different method sets".into(),
            ));
        }
        Ok(&first.methods)
    }

    fn fmt_mase(v: f64) -> String {
        if v.is_finite() {
            format!("{v:.4}")
        } else {
            "NA".into()
        }
    }

    /// Plain-text table:
    ///
    /// ```text
    /// Mean MASE and winning days (n_test = 457)
    /// State        BU   TDGSA | BU TDGSA
    /// NSW      0.0689  0.1181 | 174    31
    /// ```
    pub fn render_text(reports: &[BacktestReport]) -> Result<String> {
        let methods = check_methods(reports)?;
        let mut n_tests: Vec<usize> = reports.iter().map(|r| r.n_test).collect();
        n_tests.sort();
        n_tests.dedup();
        let n_label = n_tests
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("/");

        let mut out = format!("Mean MASE and winning days (n_test = {n_label})\n");
        let _ = write!(out, "{:<6}", "State");
        for m in methods {
            let _ = write!(out, " {:>MASE_WIDTH$}", m.as_str());
        }
        out.push_str(" |");
        for m in methods {
            let _ = write!(out, " {:>COUNT_WIDTH$}", m.as_str());
        }
        out.push('\n');
        for r in reports {
            let _ = write!(out, "{:<6}", r.region);
            for v in &r.mean_mase {
                let _ = write!(out, " {:>MASE_WIDTH$}", fmt_mase(*v));
            }
            out.push_str(" |");
            for c in &r.winner_counts {
                let _ = write!(out, " {c:>COUNT_WIDTH$}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// CSV table: `region,n_test,mase_<m>...,days_<m>...`.
    pub fn render_csv(reports: &[BacktestReport]) -> Result<String> {
        let methods = check_methods(reports)?;
        let mut out = String::from("region,n_test");
        for m in methods {
            let _ = write!(out, ",mase_{m}");
        }
        for m in methods {
            let _ = write!(out, ",days_{m}");
        }
        out.push('\n');
        for r in reports {
            let _ = write!(out, "{},{}", r.region, r.n_test);
            for v in &r.mean_mase {
                let _ = write!(out, ",{}", fmt_mase(*v));
            }
            for c in &r.winner_counts {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        Ok(out)
    }
}
