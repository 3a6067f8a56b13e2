//! Maps between the simplex and unconstrained coordinates.

use serde::{Deserialize, Serialize};

use super::isotonic::pava;
use crate::error::{Error, Result};
use crate::model::CompositionSeries;

/// Partial sums are clipped to `[CDF_CLIP, 1 - CDF_CLIP]` before the logit.
pub const CDF_CLIP: f64 = 1e-12;

/// Default multiplicative replacement value for zero shares.
pub const DEFAULT_ZERO_EPS: f64 = 1e-5;

/// Centered log-ratio coordinates, one row per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrPanel {
    pub values: Vec<Vec<f64>>,
    /// ln of each row's geometric mean.
    pub log_geomean: Vec<f64>,
}

/// Logit of the cumulative shares, last (always 1) component dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitCdfPanel {
    pub values: Vec<Vec<f64>>,
}

/// CLR of one strictly positive composition, plus ln(geometric mean).
pub fn clr_row(row: &[f64]) -> Option<(Vec<f64>, f64)> {
    if row.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let logs: Vec<f64> = row.iter().map(|v| v.ln()).collect();
    let log_gm = logs.iter().sum::<f64>() / logs.len() as f64;
    Some((logs.iter().map(|l| l - log_gm).collect(), log_gm))
}

pub fn clr_transform(comp: &CompositionSeries) -> Result<ClrPanel> {
    let mut values = Vec::with_capacity(comp.n_days());
    let mut log_geomean = Vec::with_capacity(comp.n_days());
    for (t, row) in comp.shares().iter().enumerate() {
        let (s, g) = clr_row(row).ok_or(Error::ZeroValue { row: t })?;
        values.push(s);
        log_geomean.push(g);
    }
    Ok(ClrPanel {
        values,
        log_geomean,
    })
}

/// Inverse CLR (softmax), with the row maximum subtracted first.
pub fn inv_clr(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Multiplicative zero replacement: zeros become `eps`, the other parts are
/// scaled by `1 - z*eps` where z is the number of zeros in the row.
pub fn zero_replace(comp: &CompositionSeries, eps: f64) -> Result<CompositionSeries> {
    let d = comp.n_parts();
    if !(eps > 0.0 && eps < 1.0 / d as f64) {
        return Err(Error::InvalidParameter(format!(
            "zero replacement eps must lie in (0, 1/{d}), got {eps}"
        )));
    }
    let mut shares = Vec::with_capacity(comp.n_days());
    for (t, row) in comp.shares().iter().enumerate() {
        let zeros = row.iter().filter(|v| **v == 0.0).count();
        if zeros == d {
            return Err(Error::InvalidComposition(format!("row {t} is all zeros")));
        }
        if zeros == 0 {
            shares.push(row.clone());
            continue;
        }
        let scale = 1.0 - zeros as f64 * eps;
        shares.push(
            row.iter()
                .map(|v| if *v == 0.0 { eps } else { v * scale })
                .collect(),
        );
    }
    CompositionSeries::new(comp.dates().to_vec(), shares)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cumulative sums S_1..S_{D-1} of a composition, clipped, then logit.
pub fn cdf_logit_row(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    row[..row.len() - 1]
        .iter()
        .map(|v| {
            acc += v;
            logit(acc.clamp(CDF_CLIP, 1.0 - CDF_CLIP))
        })
        .collect()
}

pub fn cdf_logit_transform(comp: &CompositionSeries) -> LogitCdfPanel {
    LogitCdfPanel {
        values: comp.shares().iter().map(|r| cdf_logit_row(r)).collect(),
    }
}

/// Inverse of [`cdf_logit_row`]: logistic, isotonic repair of the partial
/// sums, S_D = 1 appended, then first differences.
pub fn inv_cdf_logit(z: &[f64]) -> Vec<f64> {
    let partial: Vec<f64> = z.iter().map(|v| logistic(*v)).collect();
    let mut cdf = pava(&partial);
    cdf.push(1.0);
    let mut prev = 0.0;
    cdf.into_iter()
        .map(|s| {
            let d = (s - prev).max(0.0);
            prev = s;
            d
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn comp(rows: Vec<Vec<f64>>) -> CompositionSeries {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let dates = (0..rows.len())
            .map(|t| start + chrono::Days::new(t as u64))
            .collect();
        CompositionSeries::new(dates, rows).unwrap()
    }

    #[test]
    fn clr_examples() {
        let p = clr_transform(&comp(vec![vec![1.0 / 3.0; 3]])).unwrap();
        assert!(p.values[0].iter().all(|v| v.abs() < 1e-15));
        assert!(p.values[0].iter().sum::<f64>().abs() < 1e-15);

        let (s, _) = clr_row(&[0.8, 0.2]).unwrap();
        // ln(0.8/0.4) = ln 2
        assert!((s[0] - 2f64.ln()).abs() < 1e-15);
        assert!((s[1] + 2f64.ln()).abs() < 1e-15);

        let err = clr_transform(&comp(vec![vec![0.5, 0.5], vec![0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroValue { row: 1 }));
    }

    #[test]
    fn inv_clr_cases() {
        assert_eq!(inv_clr(&[0.0, 0.0, 0.0]), vec![1.0 / 3.0; 3]);
        let big = inv_clr(&[1000.0, 0.0]);
        assert_eq!(big[0], 1.0);
        assert!(big[1] >= 0.0 && big[1] < 1e-300);
    }

    #[test]
    fn zero_replacement() {
        let c = comp(vec![vec![0.0, 0.5, 0.5], vec![0.2, 0.3, 0.5]]);
        let r = zero_replace(&c, 1e-5).unwrap();
        assert_eq!(r.shares()[0][0], 1e-5);
        assert!((r.shares()[0][1] - 0.499995).abs() < 1e-15);
        assert!((r.shares()[0][2] - 0.499995).abs() < 1e-15);
        assert_eq!(r.shares()[1], c.shares()[1]);
        for row in r.shares() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(zero_replace(&c, 0.5).is_err());
        assert!(zero_replace(&c, 0.0).is_err());
    }

    #[test]
    fn cdf_logit_examples() {
        let z = cdf_logit_row(&[0.3, 0.5, 0.2]);
        assert!((z[0] - (3.0f64 / 7.0).ln()).abs() < 1e-12);
        assert!((z[1] - 4f64.ln()).abs() < 1e-12);
        assert!((z[0] + 0.8473).abs() < 1e-4 && (z[1] - 1.3863).abs() < 1e-4);

        assert_eq!(cdf_logit_row(&[0.5, 0.5]), vec![0.0]);

        let z = cdf_logit_row(&[0.0, 0.5, 0.5]);
        assert!(z[0].is_finite() && z[0] < -27.0);
        assert!((z[0] - logit(1e-12)).abs() < 1e-9);
    }

    #[test]
    fn inverse_cdf_logit_cases() {
        assert_eq!(inv_cdf_logit(&[0.0]), vec![0.5, 0.5]);

        let d = inv_cdf_logit(&[4f64.ln(), (3.0f64 / 7.0).ln()]);
        // logistic gives (0.8, 0.3); pooled to (0.55, 0.55)
        assert!((d[0] - 0.55).abs() < 1e-12);
        assert!(d[1].abs() < 1e-12);
        assert!((d[2] - 0.45).abs() < 1e-12);
        assert!(d.iter().all(|v| *v >= 0.0));
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
