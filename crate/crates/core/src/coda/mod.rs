//! Compositional forecasting of the fuel mix.
//!
//! Two pipelines share one shape: map each day's shares to unconstrained
//! coordinates, decompose the panel with covariance PCA, keep the leading
//! components by the eigenvalue-ratio rule, forecast each score series with
//! ETS, rebuild the coordinates and map back onto the simplex.
//!
//! * CLR: zero replacement, centered log-ratio, softmax back.
//! * CDF: cumulative shares, logit, logistic back with an isotonic repair of
//!   the forecast partial sums before differencing. Handles zero shares
//!   directly but depends on the fuel-type order.

mod isotonic;
mod pca;
mod transform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ets::{EtsEngine, FittedEts};
use crate::model::{CompositionSeries, ForecastVector, Unit};

pub use isotonic::pava;
pub use pca::{covariance, jacobi_eigen, pca, select_k_evr, PcaDecomposition};
pub use transform::{
    cdf_logit_row, cdf_logit_transform, clr_row, clr_transform, inv_cdf_logit, inv_clr,
    zero_replace, ClrPanel, LogitCdfPanel, CDF_CLIP, DEFAULT_ZERO_EPS,
};

/// Default threshold of the eigenvalue-ratio criterion.
pub const DEFAULT_EVR_DELTA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    #[serde(rename = "CLR")]
    Clr,
    #[serde(rename = "CDF")]
    CdfLogit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodaOptions {
    /// Zero replacement value for the CLR pipeline.
    pub eps: f64,
    /// Eigenvalue-ratio threshold.
    pub delta: f64,
}

impl Default for CodaOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_ZERO_EPS,
            delta: DEFAULT_EVR_DELTA,
        }
    }
}

/// Maps every day of `comp` to the coordinates of `transform`.
pub fn transform_rows(
    comp: &CompositionSeries,
    transform: Transform,
    eps: f64,
) -> Result<Vec<Vec<f64>>> {
    match transform {
        Transform::Clr => {
            let has_zero = comp.shares().iter().flatten().any(|v| *v == 0.0);
            let clr = if has_zero {
                log::info!(
                    "zero shares present, applying multiplicative replacement (eps = {eps})"
                );
                clr_transform(&zero_replace(comp, eps)?)?
            } else {
                clr_transform(comp)?
            };
            Ok(clr.values)
        }
        Transform::CdfLogit => Ok(cdf_logit_transform(comp).values),
    }
}

/// Maps one row of coordinates back onto the simplex.
pub fn inverse_row(transform: Transform, row: &[f64]) -> Vec<f64> {
    match transform {
        Transform::Clr => inv_clr(row),
        Transform::CdfLogit => inv_cdf_logit(row),
    }
}

/// A fitted compositional pipeline: the retained PCA basis plus one ETS model
/// per score series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalModel {
    pub transform: Transform,
    pub options: CodaOptions,
    pub n_parts: usize,
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub score_fits: Vec<FittedEts>,
}

/// Diagnostic dump of a fitted decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDump {
    pub transform: Transform,
    pub eigenvalues: Vec<f64>,
    pub selected: usize,
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub score_models: Vec<String>,
}

/// Number of retained components for a spectrum; zero when the spectrum is
/// identically zero (time-constant input).
pub fn retained_components(eigenvalues: &[f64], delta: f64) -> Result<usize> {
    if eigenvalues.is_empty() || eigenvalues[0] <= 0.0 {
        return Ok(0);
    }
    select_k_evr(eigenvalues, delta)
}

fn score_error(k: usize, source: Error) -> Error {
    Error::Series {
        fuel_type: format!("PC{}", k + 1),
        source: Box::new(source),
    }
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

impl CompositionalModel {
    pub fn fit(
        comp: &CompositionSeries,
        transform: Transform,
        engine: &EtsEngine,
        options: CodaOptions,
    ) -> Result<Self> {
        let n_parts = comp.n_parts();
        if n_parts == 1 {
            return Ok(Self {
                transform,
                options,
                n_parts,
                mean: Vec::new(),
                components: Vec::new(),
                eigenvalues: Vec::new(),
                score_fits: Vec::new(),
            });
        }
        let rows = transform_rows(comp, transform, options.eps)?;
        let full = pca(&rows)?;
        let k = retained_components(&full.eigenvalues, options.delta)?;
        let decomposition = full.truncate(k);
        let score_fits = (0..k)
            .map(|j| {
                engine
                    .select(&column(&decomposition.scores, j))
                    .map_err(|e| score_error(j, e))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            transform,
            options,
            n_parts,
            mean: decomposition.mean,
            components: decomposition.components,
            eigenvalues: decomposition.eigenvalues,
            score_fits,
        })
    }

    /// Keeps the basis and ETS parameters, re-projects `comp` and re-runs the
    /// score models' state recursions over it.
    pub fn refresh(&self, comp: &CompositionSeries) -> Result<Self> {
        if comp.n_parts() != self.n_parts {
            return Err(Error::InvalidDimension(format!(
                "model has {} parts, composition has {}",
                self.n_parts,
                comp.n_parts()
            )));
        }
        if self.n_parts == 1 {
            return Ok(self.clone());
        }
        let rows = transform_rows(comp, self.transform, self.options.eps)?;
        let scores: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| pca::project(&self.mean, &self.components, r))
            .collect();
        let score_fits = self
            .score_fits
            .iter()
            .enumerate()
            .map(|(j, fit)| {
                fit.refilter(&column(&scores, j))
                    .map_err(|e| score_error(j, e))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            score_fits,
            ..self.clone()
        })
    }

    /// Step-`h` share forecast.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        if self.n_parts == 1 {
            return vec![1.0];
        }
        let scores: Vec<f64> = self
            .score_fits
            .iter()
            .map(|f| f.forecast(h)[h - 1])
            .collect();
        let coords = pca::reconstruct(&self.mean, &self.components, &scores);
        inverse_row(self.transform, &coords)
    }

    pub fn dump(&self) -> DecompositionDump {
        DecompositionDump {
            transform: self.transform,
            eigenvalues: self.eigenvalues.clone(),
            selected: self.components.len(),
            mean: self.mean.clone(),
            components: self.components.clone(),
            score_models: self.score_fits.iter().map(|f| f.spec.to_string()).collect(),
        }
    }
}

fn forecast_composition(
    comp: &CompositionSeries,
    h: usize,
    engine: &EtsEngine,
    transform: Transform,
    options: CodaOptions,
) -> Result<ForecastVector> {
    if h == 0 {
        return Err(Error::InvalidParameter(
            "forecast horizon must be at least 1".into(),
        ));
    }
    let origin = comp
        .last_date()
        .ok_or_else(|| Error::InvalidComposition("empty composition".into()))?;
    let model = CompositionalModel::fit(comp, transform, engine, options)?;
    ForecastVector::new(origin, h, Unit::Shares, model.forecast(h))
}

pub fn forecast_composition_clr(
    comp: &CompositionSeries,
    h: usize,
    engine: &EtsEngine,
) -> Result<ForecastVector> {
    forecast_composition_clr_with(comp, h, engine, CodaOptions::default())
}

pub fn forecast_composition_clr_with(
    comp: &CompositionSeries,
    h: usize,
    engine: &EtsEngine,
    options: CodaOptions,
) -> Result<ForecastVector> {
    forecast_composition(comp, h, engine, Transform::Clr, options)
}

pub fn forecast_composition_cdf(
    comp: &CompositionSeries,
    h: usize,
    engine: &EtsEngine,
) -> Result<ForecastVector> {
    forecast_composition_cdf_with(comp, h, engine, CodaOptions::default())
}

pub fn forecast_composition_cdf_with(
    comp: &CompositionSeries,
    h: usize,
    engine: &EtsEngine,
    options: CodaOptions,
) -> Result<ForecastVector> {
    forecast_composition(comp, h, engine, Transform::CdfLogit, options)
}
