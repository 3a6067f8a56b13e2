//! Seeded synthetic generation panels with a weekly cycle and a slow
//! transition in the fuel mix.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::model::GenerationPanel;

const FUEL_NAMES: [&str; 7] = [
    "Black Coal",
    "Brown Coal",
    "Gas",
    "Hydro",
    "Wind",
    "Solar",
    "Battery",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: usize,
    pub n_fuels: usize,
    pub start: NaiveDate,
    pub region: String,
    /// Daily total around which generation fluctuates, in MWh.
    pub base_total: f64,
    /// Amplitude of the weekly cycle in log-share space.
    pub weekly_amplitude: f64,
    /// Scale of the linear drift in log-shares over the whole panel.
    pub trend_amplitude: f64,
    /// Standard deviation of the daily log-share noise.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_days: 400,
            n_fuels: 5,
            start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            region: "SYN".into(),
            base_total: 150_000.0,
            weekly_amplitude: 0.15,
            trend_amplitude: 0.8,
            noise: 0.05,
        }
    }
}

pub fn fuel_name(j: usize) -> String {
    FUEL_NAMES
        .get(j)
        .map_or_else(|| format!("Fuel {}", j + 1), |s| s.to_string())
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Generates a panel. The same config always gives the same panel.
///
/// With all amplitudes and the noise at zero every day has the same shares
/// and the same total.
pub fn synth_panel(cfg: &SynthConfig) -> Result<GenerationPanel> {
    if cfg.n_fuels == 0 || cfg.n_days == 0 {
        return Err(Error::InvalidParameter(
            "synthetic panel needs at least one fuel and one day".into(),
        ));
    }
    if !(cfg.base_total > 0.0) || cfg.noise < 0.0 {
        return Err(Error::InvalidParameter(
            "base_total must be positive and noise non-negative".into(),
        ));
    }
    let d = cfg.n_fuels;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma = Gamma::<f64>::new(2.0, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let phase_dist = Uniform::new(0.0, std::f64::consts::TAU)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let base_log: Vec<f64> = (0..d)
        .map(|_| gamma.sample(&mut rng).max(1e-3).ln())
        .collect();
    let phases: Vec<f64> = (0..d).map(|_| phase_dist.sample(&mut rng)).collect();
    let slopes: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let span = (cfg.n_days.max(2) - 1) as f64;

    let mut levels = Vec::with_capacity(cfg.n_days);
    for t in 0..cfg.n_days {
        let week = std::f64::consts::TAU * t as f64 / 7.0;
        let frac = t as f64 / span;
        let logits: Vec<f64> = (0..d)
            .map(|j| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                base_log[j]
                    + cfg.weekly_amplitude * (week + phases[j]).sin()
                    + cfg.trend_amplitude * slopes[j] * frac
                    + cfg.noise * eps
            })
            .collect();
        let eps_total: f64 = StandardNormal.sample(&mut rng);
        let total = cfg.base_total
            * (1.0 + 0.1 * cfg.weekly_amplitude * week.sin())
            * (0.5 * cfg.noise * eps_total).exp();
        levels.push(softmax(&logits).into_iter().map(|s| s * total).collect());
    }

    let dates = (0..cfg.n_days)
        .map(|t| cfg.start + chrono::Days::new(t as u64))
        .collect();
    GenerationPanel::new(
        cfg.region.clone(),
        (0..d).map(fuel_name).collect(),
        dates,
        levels,
    )
}
