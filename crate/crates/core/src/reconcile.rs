//! Bottom-up and top-down reconciliation of the two-level fuel hierarchy.
//!
//! Every forecast produced here is coherent: the total equals the sum of the
//! fuel-type forecasts. Bottom-up sums independent fuel forecasts; top-down
//! forecasts the total and splits it by one of three proportion rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ets::{EtsEngine, FittedEts};
use crate::model::{aggregate_total, build_summing_matrix, GenerationPanel};

/// How top-down proportions are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProportionMethod {
    /// Average of historical ratios B_j / T.
    #[serde(rename = "TDGSA")]
    Gsa,
    /// Ratio of historical averages.
    #[serde(rename = "TDGSF")]
    Gsf,
    /// Proportions of the fuel-type forecasts.
    #[serde(rename = "TDFP")]
    Fp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HierarchicalMethod {
    #[serde(rename = "BU")]
    BottomUp,
    #[serde(rename = "TD")]
    TopDown(ProportionMethod),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisaggregationProportions {
    pub method: ProportionMethod,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciledForecast {
    pub method: HierarchicalMethod,
    pub total: f64,
    pub bottom: Vec<f64>,
    /// Top-down proportions, kept so shares stay defined when the total
    /// forecast is zero.
    pub proportions: Option<Vec<f64>>,
}

impl ReconciledForecast {
    /// The forecast fuel mix: bottom forecasts normalized by their own total.
    pub fn shares(&self) -> Result<Vec<f64>> {
        let sum: f64 = self.bottom.iter().sum();
        if sum > 0.0 {
            return Ok(self.bottom.iter().map(|b| b / sum).collect());
        }
        match &self.proportions {
            Some(p) => Ok(p.clone()),
            None => Err(Error::DegenerateProportions(
                "all fuel-type forecasts are zero".into(),
            )),
        }
    }

    /// All levels of the hierarchy, (total, bottom...).
    pub fn all_levels(&self) -> Result<Vec<f64>> {
        build_summing_matrix(self.bottom.len())?.apply(&self.bottom)
    }
}

/// One fitted model per fuel-type series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottomModels {
    pub fuel_types: Vec<String>,
    pub fits: Vec<FittedEts>,
}

impl BottomModels {
    pub fn fit(panel: &GenerationPanel, engine: &EtsEngine) -> Result<Self> {
        let fits = panel
            .fuel_types()
            .iter()
            .map(|fuel| {
                engine
                    .select(&panel.column(fuel.index))
                    .map_err(|e| series_error(&fuel.name, e))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            fuel_types: panel.fuel_names(),
            fits,
        })
    }

    /// Same forms and parameters, states re-run over the (longer) panel.
    pub fn refresh(&self, panel: &GenerationPanel) -> Result<Self> {
        let fits = self
            .fits
            .iter()
            .zip(&self.fuel_types)
            .enumerate()
            .map(|(j, (fit, name))| {
                fit.refilter(&panel.column(j))
                    .map_err(|e| series_error(name, e))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            fuel_types: self.fuel_types.clone(),
            fits,
        })
    }

    /// Step-`h` forecast of every fuel type, negative values floored at zero.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        self.fits
            .iter()
            .map(|fit| fit.forecast(h)[h - 1].max(0.0))
            .collect()
    }
}

/// Fitted model for the total series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalModel {
    pub fit: FittedEts,
}

impl TotalModel {
    pub fn fit(panel: &GenerationPanel, engine: &EtsEngine) -> Result<Self> {
        let fit = engine
            .select(&aggregate_total(panel))
            .map_err(|e| series_error("Total", e))?;
        Ok(Self { fit })
    }

    pub fn refresh(&self, panel: &GenerationPanel) -> Result<Self> {
        let fit = self
            .fit
            .refilter(&aggregate_total(panel))
            .map_err(|e| series_error("Total", e))?;
        Ok(Self { fit })
    }

    /// Step-`h` forecast of the total; a negative value is floored at zero.
    pub fn forecast(&self, h: usize) -> f64 {
        let value = self.fit.forecast(h)[h - 1];
        if value < 0.0 {
            log::warn!("negative total forecast {value} floored at 0");
            0.0
        } else {
            value
        }
    }
}

fn series_error(name: &str, source: Error) -> Error {
    Error::Series {
        fuel_type: name.to_string(),
        source: Box::new(source),
    }
}

fn check_horizon(h: usize) -> Result<()> {
    if h == 0 {
        return Err(Error::InvalidParameter(
            "forecast horizon must be at least 1".into(),
        ));
    }
    Ok(())
}

pub fn forecast_bottom_up(
    panel: &GenerationPanel,
    h: usize,
    engine: &EtsEngine,
) -> Result<ReconciledForecast> {
    check_horizon(h)?;
    let models = BottomModels::fit(panel, engine)?;
    Ok(bottom_up_from(&models.forecast(h)))
}

/// Aggregates fuel-type forecasts through the summing matrix.
pub fn bottom_up_from(bottom: &[f64]) -> ReconciledForecast {
    ReconciledForecast {
        method: HierarchicalMethod::BottomUp,
        total: bottom.iter().sum(),
        bottom: bottom.to_vec(),
        proportions: None,
    }
}

fn renormalized(method: ProportionMethod, mut p: Vec<f64>) -> DisaggregationProportions {
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= sum);
    DisaggregationProportions { method, p }
}

pub fn td_proportions_gsa(panel: &GenerationPanel) -> Result<DisaggregationProportions> {
    let d = panel.n_fuels();
    let totals = aggregate_total(panel);
    let mut acc = vec![0.0; d];
    let mut used = 0usize;
    for ((row, total), date) in panel.levels().iter().zip(&totals).zip(panel.dates()) {
        if *total > 0.0 {
            for (a, b) in acc.iter_mut().zip(row) {
                *a += b / total;
            }
            used += 1;
        } else {
            log::warn!(
                "{}: zero total on {date} excluded from average proportions",
                panel.region()
            );
        }
    }
    if used == 0 {
        return Err(Error::DegenerateProportions(
            "every day has zero total generation".into(),
        ));
    }
    let p = acc.into_iter().map(|a| a / used as f64).collect();
    Ok(renormalized(ProportionMethod::Gsa, p))
}

pub fn td_proportions_gsf(panel: &GenerationPanel) -> Result<DisaggregationProportions> {
    let d = panel.n_fuels();
    let mut sums = vec![0.0; d];
    for row in panel.levels() {
        for (s, b) in sums.iter_mut().zip(row) {
            *s += b;
        }
    }
    let grand: f64 = aggregate_total(panel).iter().sum();
    if grand <= 0.0 {
        return Err(Error::DegenerateProportions("grand total is zero".into()));
    }
    let p = sums.into_iter().map(|s| s / grand).collect();
    Ok(renormalized(ProportionMethod::Gsf, p))
}

pub fn td_proportions_fp(
    panel: &GenerationPanel,
    h: usize,
    engine: &EtsEngine,
) -> Result<DisaggregationProportions> {
    check_horizon(h)?;
    let models = BottomModels::fit(panel, engine)?;
    proportions_from_forecasts(&models.forecast(h))
}

/// Forecast proportions: negatives floored at zero, then normalized.
pub fn proportions_from_forecasts(bottom: &[f64]) -> Result<DisaggregationProportions> {
    let floored: Vec<f64> = bottom.iter().map(|b| b.max(0.0)).collect();
    let sum: f64 = floored.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateProportions(
            "all fuel-type forecasts are non-positive".into(),
        ));
    }
    Ok(DisaggregationProportions {
        method: ProportionMethod::Fp,
        p: floored.into_iter().map(|b| b / sum).collect(),
    })
}

pub fn forecast_top_down(
    panel: &GenerationPanel,
    h: usize,
    props: &DisaggregationProportions,
    engine: &EtsEngine,
) -> Result<ReconciledForecast> {
    check_horizon(h)?;
    if props.p.len() != panel.n_fuels() {
        return Err(Error::InvalidDimension(format!(
            "{} proportions for {} fuel types",
            props.p.len(),
            panel.n_fuels()
        )));
    }
    let total = TotalModel::fit(panel, engine)?.forecast(h);
    Ok(top_down_from(total, props))
}

/// Splits a total forecast by `props`. The total is recomputed from the
/// parts so coherence holds to the last bit.
pub fn top_down_from(total: f64, props: &DisaggregationProportions) -> ReconciledForecast {
    let total = total.max(0.0);
    let bottom: Vec<f64> = props.p.iter().map(|p| p * total).collect();
    ReconciledForecast {
        method: HierarchicalMethod::TopDown(props.method),
        total: bottom.iter().sum(),
        bottom,
        proportions: Some(props.p.clone()),
    }
}
