use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid composition: {0}")]
    InvalidComposition(String),

    #[error("zero total generation on {date}")]
    ZeroTotal { date: NaiveDate },

    #[error("input is empty")]
    EmptyInput,

    #[error("schema error: expected header `{expected}`, found `{actual}`")]
    Schema { expected: String, actual: String },

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("region `{region}` has {found} distinct dates, at least {required} required")]
    TooFewDates {
        region: String,
        found: usize,
        required: usize,
    },

    #[error("date gaps in region `{region}`: missing {}", format_dates(.missing))]
    DateGap {
        region: String,
        missing: Vec<NaiveDate>,
    },

    #[error("duplicate record for {date} / `{fuel_type}`")]
    Duplicate { date: NaiveDate, fuel_type: String },

    #[error("negative generation {value} on {date} for `{fuel_type}`")]
    NegativeValue {
        date: NaiveDate,
        fuel_type: String,
        value: f64,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no ETS candidate could be fitted: {}", .0.join("; "))]
    Selection(Vec<String>),

    #[error("fuel type `{fuel_type}`: {source}")]
    Series {
        fuel_type: String,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate proportions: {0}")]
    DegenerateProportions(String),

    #[error(
        "zero share encountered in row {row}; apply zero replacement before the CLR transform"
    )]
    ZeroValue { row: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown method `{0}` (valid: BU, TDGSA, TDGSF, TDFP, CLR, CDF)")]
    UnknownMethod(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_dates(dates: &[NaiveDate]) -> String {
    const SHOWN: usize = 10;
    let mut out = dates
        .iter()
        .take(SHOWN)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if dates.len() > SHOWN {
        out.push_str(&format!(" (and {} more)", dates.len() - SHOWN));
    }
    out
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
