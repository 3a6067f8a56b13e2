//! Domain types shared by every stage: the per-region generation panel, its
//! compositional view, and the two-level summing matrix that links the
//! total series to the fuel-type series.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a row of shares lies on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A fuel type within one region's panel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FuelType {
    pub name: String,
    pub index: usize,
}

/// Daily generation levels (MWh) for one region, one column per fuel type.
///
/// Rows are days, columns are fuel types. Dates are consecutive calendar days
/// and every level is finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPanel {
    region: String,
    fuel_types: Vec<FuelType>,
    dates: Vec<NaiveDate>,
    levels: Vec<Vec<f64>>,
}

impl GenerationPanel {
    /// Minimum number of days an ingested panel must cover before any model
    /// is fitted to it.
    pub const MIN_DAYS: usize = 15;

    pub fn new(
        region: impl Into<String>,
        fuel_names: Vec<String>,
        dates: Vec<NaiveDate>,
        levels: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let region = region.into();
        if fuel_names.is_empty() {
            return Err(Error::InvalidPanel(
                "panel needs at least one fuel type".into(),
            ));
        }
        for (i, name) in fuel_names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidPanel(format!(
                    "fuel type {i} has an empty name"
                )));
            }
            if fuel_names[..i].contains(name) {
                return Err(Error::InvalidPanel(format!(
                    "fuel type `{name}` appears twice"
                )));
            }
        }
        if dates.is_empty() {
            return Err(Error::InvalidPanel("panel has no days".into()));
        }
        if dates.len() != levels.len() {
            return Err(Error::InvalidPanel(format!(
                "{} dates but {} rows of levels",
                dates.len(),
                levels.len()
            )));
        }
        for pair in dates.windows(2) {
            if pair[0].succ_opt() != Some(pair[1]) {
                return Err(Error::InvalidPanel(format!(
                    "dates {} and {} are not consecutive",
                    pair[0], pair[1]
                )));
            }
        }
        let d = fuel_names.len();
        for (t, row) in levels.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidPanel(format!(
                    "row {t} has {} values, expected {d}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidPanel(format!(
                    "row {t} ({}) holds invalid level {v}",
                    dates[t]
                )));
            }
        }
        let fuel_types = fuel_names
            .into_iter()
            .enumerate()
            .map(|(index, name)| FuelType { name, index })
            .collect();
        Ok(Self {
            region,
            fuel_types,
            dates,
            levels,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a panel written by [`GenerationPanel::to_json`], re-checking
    /// every invariant.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(s)?;
        let names = raw.fuel_names();
        Self::new(raw.region, names, raw.dates, raw.levels)
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn fuel_types(&self) -> &[FuelType] {
        &self.fuel_types
    }

    pub fn fuel_names(&self) -> Vec<String> {
        self.fuel_types.iter().map(|f| f.name.clone()).collect()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Number of fuel types.
    pub fn n_fuels(&self) -> usize {
        self.fuel_types.len()
    }

    /// Number of days.
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        self.dates[self.dates.len() - 1]
    }

    /// The level series of fuel type `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.levels.iter().map(|row| row[j]).collect()
    }

    /// Days `range` as a new panel sharing the fuel-type order.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.n_days() {
            return Err(Error::InvalidPanel(format!(
                "slice {range:?} outside 0..{}",
                self.n_days()
            )));
        }
        Ok(Self {
            region: self.region.clone(),
            fuel_types: self.fuel_types.clone(),
            dates: self.dates[range.clone()].to_vec(),
            levels: self.levels[range].to_vec(),
        })
    }

    /// Returns an error when the panel is shorter than [`Self::MIN_DAYS`].
    pub fn ensure_fit_window(&self) -> Result<()> {
        if self.n_days() < Self::MIN_DAYS {
            return Err(Error::TooFewDates {
                region: self.region.clone(),
                found: self.n_days(),
                required: Self::MIN_DAYS,
            });
        }
        Ok(())
    }
}

/// Row totals T_t = sum_j B_{j,t}.
pub fn aggregate_total(panel: &GenerationPanel) -> Vec<f64> {
    panel.levels.iter().map(|row| row.iter().sum()).collect()
}

/// What to do with days whose total generation is zero when converting
/// levels to shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroTotalPolicy {
    #[default]
    Error,
    Uniform,
}

impl std::str::FromStr for ZeroTotalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(Self::Error),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(format!(
                "unknown zero-total policy `{other}` (expected error or uniform)"
            ))),
        }
    }
}

impl std::fmt::Display for ZeroTotalPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Error => "error",
            Self::Uniform => "uniform",
        })
    }
}

/// Daily fuel-mix shares; every row lies on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionSeries {
    dates: Vec<NaiveDate>,
    shares: Vec<Vec<f64>>,
}

impl CompositionSeries {
    pub fn new(dates: Vec<NaiveDate>, shares: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != shares.len() {
            return Err(Error::InvalidComposition(format!(
                "{} dates but {} rows",
                dates.len(),
                shares.len()
            )));
        }
        let width = shares.first().map_or(0, Vec::len);
        if width == 0 {
            return Err(Error::InvalidComposition("composition has no parts".into()));
        }
        for (t, row) in shares.iter().enumerate() {
            if row.len() != width {
                return Err(Error::InvalidComposition(format!(
                    "row {t} has {} parts, expected {width}",
                    row.len()
                )));
            }
            check_simplex_row(row)
                .map_err(|msg| Error::InvalidComposition(format!("row {t}: {msg}")))?;
        }
        Ok(Self { dates, shares })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn shares(&self) -> &[Vec<f64>] {
        &self.shares
    }

    pub fn n_parts(&self) -> usize {
        self.shares[0].len()
    }

    pub fn n_days(&self) -> usize {
        self.shares.len()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }
}

fn check_simplex_row(row: &[f64]) -> std::result::Result<(), String> {
    if let Some(v) = row
        .iter()
        .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
    {
        return Err(format!("share {v} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(format!("shares sum to {sum}"));
    }
    Ok(())
}

/// Converts levels to shares, row t divided by its total T_t.
pub fn to_shares(panel: &GenerationPanel, policy: ZeroTotalPolicy) -> Result<CompositionSeries> {
    let d = panel.n_fuels();
    let mut shares = Vec::with_capacity(panel.n_days());
    for (row, date) in panel.levels.iter().zip(&panel.dates) {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            shares.push(row.iter().map(|v| v / total).collect());
        } else {
            match policy {
                ZeroTotalPolicy::Error => return Err(Error::ZeroTotal { date: *date }),
                ZeroTotalPolicy::Uniform => {
                    log::warn!(
                        "{}: zero total generation on {date}, using uniform shares",
                        panel.region
                    );
                    shares.push(vec![1.0 / d as f64; d]);
                }
            }
        }
    }
    Ok(CompositionSeries {
        dates: panel.dates.clone(),
        shares,
    })
}

/// The (D+1)×D aggregation matrix: an all-ones row on top of the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummingMatrix {
    entries: Vec<Vec<u8>>,
}

impl SummingMatrix {
    pub fn entries(&self) -> &[Vec<u8>] {
        &self.entries
    }

    /// Number of bottom-level series.
    pub fn n_bottom(&self) -> usize {
        self.entries[0].len()
    }

    /// Maps a bottom vector to all levels: (total, bottom...).
    pub fn apply(&self, bottom: &[f64]) -> Result<Vec<f64>> {
        if bottom.len() != self.n_bottom() {
            return Err(Error::InvalidDimension(format!(
                "bottom vector has length {}, summing matrix expects {}",
                bottom.len(),
                self.n_bottom()
            )));
        }
        Ok(self
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .zip(bottom)
                    .filter(|(s, _)| **s == 1)
                    .map(|(_, b)| *b)
                    .sum()
            })
            .collect())
    }
}

pub fn build_summing_matrix(d: usize) -> Result<SummingMatrix> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "summing matrix needs at least one bottom series".into(),
        ));
    }
    let mut entries = Vec::with_capacity(d + 1);
    entries.push(vec![1; d]);
    for i in 0..d {
        let mut row = vec![0; d];
        row[i] = 1;
        entries.push(row);
    }
    Ok(SummingMatrix { entries })
}

/// Unit tag for a forecast vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Mwh,
    Shares,
}

/// An h-step-ahead forecast of the bottom level, issued at `origin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastVector {
    origin: NaiveDate,
    horizon: usize,
    unit: Unit,
    values: Vec<f64>,
}

impl ForecastVector {
    pub fn new(origin: NaiveDate, horizon: usize, unit: Unit, values: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter(
                "forecast horizon must be at least 1".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite forecast value {v}"
            )));
        }
        if unit == Unit::Shares {
            check_simplex_row(&values).map_err(Error::InvalidComposition)?;
        }
        Ok(Self {
            origin,
            horizon,
            unit,
            values,
        })
    }

    pub fn origin(&self) -> NaiveDate {
        self.origin
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(i: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Days::new(i as u64)
    }

    fn panel(rows: Vec<Vec<f64>>) -> GenerationPanel {
        let d = rows[0].len();
        let names = (0..d).map(|j| format!("F{j}")).collect();
        let dates = (0..rows.len() as u32).map(day).collect();
        GenerationPanel::new("TEST", names, dates, rows).unwrap()
    }

    #[test]
    fn summing_matrix_matches_seven_fuel_block() {
        let s = build_summing_matrix(7).unwrap();
        let e = s.entries();
        assert_eq!(e.len(), 8);
        assert_eq!(e[0], vec![1; 7]);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(e[i + 1][j], u8::from(i == j));
            }
        }
    }

    #[test]
    fn summing_matrix_small_cases() {
        assert_eq!(
            build_summing_matrix(1).unwrap().entries(),
            &[vec![1], vec![1]]
        );
        assert_eq!(
            build_summing_matrix(3).unwrap().entries(),
            &[vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]
        );
        assert!(matches!(
            build_summing_matrix(0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn summing_matrix_sums_for_all_sizes() {
        for d in 1..=50 {
            let s = build_summing_matrix(d).unwrap();
            let e = s.entries();
            assert_eq!(e[0].iter().map(|&v| v as usize).sum::<usize>(), d);
            for j in 0..d {
                assert_eq!(e.iter().map(|row| row[j] as usize).sum::<usize>(), 2);
            }
        }
    }

    #[test]
    fn aggregate_total_rows() {
        let p = panel(vec![vec![2.0, 3.0, 5.0], vec![0.0, 0.0, 0.0]]);
        assert_eq!(aggregate_total(&p), vec![10.0, 0.0]);
    }

    #[test]
    fn shares_by_direct_division() {
        let p = panel(vec![vec![2.0, 3.0, 5.0]]);
        let c = to_shares(&p, ZeroTotalPolicy::Error).unwrap();
        assert_eq!(c.shares()[0], vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn zero_total_policies() {
        let p = panel(vec![vec![1.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]]);
        assert!(matches!(
            to_shares(&p, ZeroTotalPolicy::Error),
            Err(Error::ZeroTotal { .. })
        ));
        let c = to_shares(&p, ZeroTotalPolicy::Uniform).unwrap();
        assert_eq!(c.shares()[1], vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn panel_rejects_gaps_and_negatives() {
        let names = vec!["A".to_string(), "B".to_string()];
        let gap = vec![day(0), day(2)];
        assert!(GenerationPanel::new("R", names.clone(), gap, vec![vec![1.0, 1.0]; 2]).is_err());
        let neg = vec![vec![1.0, -1.0]];
        assert!(GenerationPanel::new("R", names.clone(), vec![day(0)], neg).is_err());
        let dup = vec!["A".to_string(), "A".to_string()];
        assert!(GenerationPanel::new("R", dup, vec![day(0)], vec![vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn shares_forecast_vector_must_be_on_simplex() {
        assert!(ForecastVector::new(day(0), 1, Unit::Shares, vec![0.5, 0.6]).is_err());
        assert!(ForecastVector::new(day(0), 1, Unit::Mwh, vec![5.0, 6.0]).is_ok());
        assert!(ForecastVector::new(day(0), 0, Unit::Mwh, vec![5.0]).is_err());
    }

    fn panel_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..8, 1usize..6).prop_flat_map(|(n, d)| {
            prop::collection::vec(prop::collection::vec(0.001f64..1e5, d), n)
        })
    }

    proptest! {
        #[test]
        fn summing_matrix_reproduces_total_and_bottom(rows in panel_strategy()) {
            let p = panel(rows);
            let s = build_summing_matrix(p.n_fuels()).unwrap();
            let totals = aggregate_total(&p);
            for (row, total) in p.levels().iter().zip(&totals) {
                let all = s.apply(row).unwrap();
                // brute-force per-row summation, same accumulation order
                let mut brute = 0.0;
                for v in row {
                    brute += v;
                }
                prop_assert_eq!(all[0], brute);
                prop_assert_eq!(all[0], *total);
                prop_assert_eq!(&all[1..], &row[..]);
            }
        }

        #[test]
        fn shares_round_trip_to_levels(rows in panel_strategy()) {
            let p = panel(rows);
            let c = to_shares(&p, ZeroTotalPolicy::Error).unwrap();
            let totals = aggregate_total(&p);
            for ((srow, lrow), total) in c.shares().iter().zip(p.levels()).zip(&totals) {
                let sum: f64 = srow.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                for (s, l) in srow.iter().zip(lrow) {
                    prop_assert!((s * total - l).abs() <= 1e-9 * l.abs().max(1e-300));
                }
            }
        }
    }
}
