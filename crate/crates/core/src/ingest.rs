//! Long-format generation CSV parsing, pivoting into panels, and the
//! train/test split.
//!
//! The input schema is fixed: `date,region,fuel_type,generation_mwh`, with
//! `YYYY-MM-DD` dates and plain decimal values. Values are daily energy
//! totals in MWh; aggregation from dispatch intervals happens upstream.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GenerationPanel;

pub const HEADER: [&str; 4] = ["date", "region", "fuel_type", "generation_mwh"];

/// One row of the long-format input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub date: NaiveDate,
    pub region: String,
    pub fuel_type: String,
    pub generation_mwh: f64,
}

/// How negative generation values (battery charging, auxiliary load) are
/// handled when building a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePolicy {
    #[default]
    ClampZero,
    Error,
}

impl std::str::FromStr for NegativePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp_zero" => Ok(Self::ClampZero),
            "error" => Ok(Self::Error),
            other => Err(Error::Config(format!(
                "unknown negative policy `{other}` (expected clamp_zero or error)"
            ))),
        }
    }
}

impl std::fmt::Display for NegativePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ClampZero => "clamp_zero",
            Self::Error => "error",
        })
    }
}

/// Per-region ingestion counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub clamped_negatives: usize,
    pub zero_filled: usize,
}

/// Diagnostics summary keyed by region, serialized as JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestDiagnostics {
    pub regions: BTreeMap<String, RegionDiagnostics>,
}

impl IngestDiagnostics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();

    let header = match rows.next() {
        None => return Err(Error::EmptyInput),
        Some(r) => r?,
    };
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Schema {
            expected: HEADER.join(","),
            actual: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != HEADER.len() {
            return Err(Error::Row {
                line,
                message: format!("expected {} fields, found {}", HEADER.len(), row.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d").map_err(|e| Error::Row {
            line,
            message: format!("invalid date `{}`: {e}", &row[0]),
        })?;
        let region = row[1].to_string();
        let fuel_type = row[2].to_string();
        if region.is_empty() || fuel_type.is_empty() {
            return Err(Error::Row {
                line,
                message: "region and fuel_type must be non-empty".into(),
            });
        }
        let generation_mwh = parse_decimal(&row[3]).ok_or_else(|| Error::Row {
            line,
            message: format!("invalid generation_mwh `{}`", &row[3]),
        })?;
        records.push(RawRecord {
            date,
            region,
            fuel_type,
            generation_mwh,
        });
    }
    Ok(records)
}

// Plain decimals only: no thousands separators, no inf/nan spellings.
fn parse_decimal(s: &str) -> Option<f64> {
    let plain = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    if !plain {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Regions present in the records, in sorted order.
pub fn regions(records: &[RawRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| r.region.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Pivots the records of `region` into a panel.
///
/// Fuel types are ordered by the first date on which they appear, ties broken
/// by name, so the result does not depend on input row order. Missing
/// (date, fuel) cells are filled with zero and counted.
pub fn build_panel(
    records: &[RawRecord],
    region: &str,
    negative_policy: NegativePolicy,
) -> Result<(GenerationPanel, RegionDiagnostics)> {
    let mut diag = RegionDiagnostics::default();
    let mut cells: HashMap<(NaiveDate, &str), f64> = HashMap::new();
    let mut first_seen: HashMap<&str, NaiveDate> = HashMap::new();
    let mut dates = BTreeSet::new();

    for rec in records.iter().filter(|r| r.region == region) {
        let mut value = rec.generation_mwh;
        if value < 0.0 {
            match negative_policy {
                NegativePolicy::Error => {
                    return Err(Error::NegativeValue {
                        date: rec.date,
                        fuel_type: rec.fuel_type.clone(),
                        value,
                    })
                }
                NegativePolicy::ClampZero => {
                    value = 0.0;
                    diag.clamped_negatives += 1;
                }
            }
        }
        if cells.insert((rec.date, &rec.fuel_type), value).is_some() {
            return Err(Error::Duplicate {
                date: rec.date,
                fuel_type: rec.fuel_type.clone(),
            });
        }
        first_seen
            .entry(&rec.fuel_type)
            .and_modify(|d| *d = (*d).min(rec.date))
            .or_insert(rec.date);
        dates.insert(rec.date);
    }

    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    if dates.is_empty() {
        return Err(Error::InvalidPanel(format!(
            "no records for region `{region}`"
        )));
    }
    let missing: Vec<NaiveDate> = dates
        .windows(2)
        .flat_map(|w| w[0].iter_days().skip(1).take_while(move |d| *d < w[1]))
        .collect();
    if !missing.is_empty() {
        return Err(Error::DateGap {
            region: region.to_string(),
            missing,
        });
    }

    let mut fuels: Vec<(&str, NaiveDate)> = first_seen.into_iter().collect();
    fuels.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));

    let levels = dates
        .iter()
        .map(|date| {
            fuels
                .iter()
                .map(|(fuel, _)| {
                    cells.get(&(*date, *fuel)).copied().unwrap_or_else(|| {
                        diag.zero_filled += 1;
                        0.0
                    })
                })
                .collect()
        })
        .collect();

    let names = fuels.iter().map(|(f, _)| f.to_string()).collect();
    let panel = GenerationPanel::new(region, names, dates, levels)?;
    Ok((panel, diag))
}

/// Writes a panel back to the long CSV schema, one row per (date, fuel).
pub fn write_long_csv<W: Write>(panel: &GenerationPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let names = panel.fuel_names();
    for (date, row) in panel.dates().iter().zip(panel.levels()) {
        let date = date.format("%Y-%m-%d").to_string();
        for (name, value) in names.iter().zip(row) {
            w.write_record([date.as_str(), panel.region(), name, &value.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Fraction of the panel used for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    /// Number of training days for a panel of `n` days: `fraction * n`
    /// rounded to the nearest day, halves going to the test side (1826 days
    /// at 0.75 train on 1369 and test on 457).
    pub fn train_len(&self, n: usize) -> usize {
        let days = (self.train_fraction * n as f64 - 0.5).ceil().max(0.0);
        (days as usize).min(n)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
        }
    }
}

pub fn split_train_test(
    panel: &GenerationPanel,
    spec: SplitSpec,
) -> Result<(GenerationPanel, GenerationPanel)> {
    let n = panel.n_days();
    let n_train = spec.train_len(n);
    if n_train == 0 {
        return Err(Error::Split("training partition is empty".into()));
    }
    if n_train >= n {
        return Err(Error::Split(format!(
            "train fraction {} leaves no test days out of {n}",
            spec.train_fraction
        )));
    }
    Ok((panel.slice(0..n_train)?, panel.slice(n_train..n)?))
}
