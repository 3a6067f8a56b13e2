//! Command-line front end: `ingest`, `forecast`, `backtest` and `synth`.
//!
//! Every option can also come from a flat `key = value` config file given
//! with `--config`; flags win over the file. Each output directory receives a
//! `config.txt` holding the fully resolved configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::coda::CodaOptions;
use crate::error::{Error, Result};
use crate::ets::EtsEngine;
use crate::evaluate::{rolling_backtest, table, BacktestOptions, MethodId, MethodSuite};
use crate::ingest::{
    build_panel, parse_csv, regions, write_long_csv, IngestDiagnostics, NegativePolicy, RawRecord,
    SplitSpec,
};
use crate::model::{GenerationPanel, ZeroTotalPolicy};
use crate::synth::{synth_panel, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fuelcast",
    version,
    about = "Daily fuel-mix forecasting and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate long-format CSVs and cache one panel per region.
    Ingest(CommonArgs),
    /// Forecast fuel shares (and levels, for hierarchical methods).
    Forecast(CommonArgs),
    /// Rolling one-step-ahead backtest scored by MASE.
    Backtest(CommonArgs),
    /// Write a seeded synthetic long-format CSV.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

/// Flags shared by all subcommands. Values are kept as text here and
/// validated once the config file has been merged in.
#[derive(Debug, Default, Clone, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV or `.panel.json` file; repeatable.
    #[arg(long)]
    pub input: Vec<String>,
    /// Comma-separated region filter.
    #[arg(long)]
    pub region: Option<String>,
    /// Comma-separated methods out of BU,TDGSA,TDGSF,TDFP,CLR,CDF.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long = "train-fraction")]
    pub train_fraction: Option<String>,
    #[arg(long = "refit-every")]
    pub refit_every: Option<String>,
    /// Zero-replacement value for the CLR pipeline.
    #[arg(long)]
    pub eps: Option<String>,
    /// Eigenvalue-ratio threshold for retaining components.
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// clamp_zero or error.
    #[arg(long = "negative-policy")]
    pub negative_policy: Option<String>,
    /// error or uniform.
    #[arg(long = "zero-total-policy")]
    pub zero_total_policy: Option<String>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct SynthArgs {
    #[arg(long = "n-days")]
    pub n_days: Option<String>,
    #[arg(long)]
    pub fuels: Option<String>,
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long = "weekly-amplitude")]
    pub weekly_amplitude: Option<String>,
    #[arg(long = "trend-amplitude")]
    pub trend_amplitude: Option<String>,
    #[arg(long)]
    pub noise: Option<String>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub regions: Option<Vec<String>>,
    pub methods: Vec<MethodId>,
    pub horizon: usize,
    pub split: SplitSpec,
    pub refit_every: usize,
    pub coda: CodaOptions,
    pub negative_policy: NegativePolicy,
    pub zero_total_policy: ZeroTotalPolicy,
    pub out: PathBuf,
    pub seed: u64,
    pub n_days: usize,
    pub n_fuels: usize,
    pub start: NaiveDate,
    pub weekly_amplitude: f64,
    pub trend_amplitude: f64,
    pub noise: f64,
}

const KEYS: [&str; 18] = [
    "input",
    "region",
    "methods",
    "horizon",
    "train-fraction",
    "refit-every",
    "eps",
    "delta",
    "out",
    "seed",
    "negative-policy",
    "zero-total-policy",
    "n-days",
    "fuels",
    "start",
    "weekly-amplitude",
    "trend-amplitude",
    "noise",
];

/// Parses a flat `key = value` config text. Blank lines and `#` comments are
/// skipped; underscores in keys are read as dashes.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key `{key}`",
                i + 1
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{v}`: {e}")))
}

impl RunConfig {
    /// Merges the config file (if any) with the flags, flags taking
    /// precedence, then validates every value.
    pub fn resolve(common: &CommonArgs, synth: Option<&SynthArgs>) -> Result<Self> {
        let mut map = match &common.config {
            Some(path) => parse_config_text(&fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let mut set = |key: &str, v: &Option<String>| {
            if let Some(v) = v {
                map.insert(key.to_string(), v.clone());
            }
        };
        set("region", &common.region);
        set("methods", &common.methods);
        set("horizon", &common.horizon);
        set("train-fraction", &common.train_fraction);
        set("refit-every", &common.refit_every);
        set("eps", &common.eps);
        set("delta", &common.delta);
        set("out", &common.out);
        set("seed", &common.seed);
        set("negative-policy", &common.negative_policy);
        set("zero-total-policy", &common.zero_total_policy);
        if let Some(s) = synth {
            set("n-days", &s.n_days);
            set("fuels", &s.fuels);
            set("start", &s.start);
            set("weekly-amplitude", &s.weekly_amplitude);
            set("trend-amplitude", &s.trend_amplitude);
            set("noise", &s.noise);
        }
        if !common.input.is_empty() {
            map.insert("input".into(), common.input.join(","));
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str).filter(|v| !v.is_empty());
        let list = |v: &str| -> Vec<String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        };
        let synth_defaults = SynthConfig::default();
        let coda_defaults = CodaOptions::default();

        let horizon: usize = get("horizon").map_or(Ok(1), |v| parse_num("horizon", v))?;
        if horizon == 0 {
            return Err(Error::Config("`horizon` must be at least 1".into()));
        }
        let refit_every: usize =
            get("refit-every").map_or(Ok(1), |v| parse_num("refit-every", v))?;
        if refit_every == 0 {
            return Err(Error::Config("`refit-every` must be at least 1".into()));
        }
        let split = match get("train-fraction") {
            Some(v) => SplitSpec::new(parse_num("train-fraction", v)?)
                .map_err(|e| Error::Config(e.to_string()))?,
            None => SplitSpec::default(),
        };
        let eps: f64 = get("eps").map_or(Ok(coda_defaults.eps), |v| parse_num("eps", v))?;
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::Config(format!(
                "`eps` must lie in (0, 0.5), got {eps}"
            )));
        }
        let delta: f64 = get("delta").map_or(Ok(coda_defaults.delta), |v| parse_num("delta", v))?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "`delta` must lie in (0, 1), got {delta}"
            )));
        }
        let n_days: usize =
            get("n-days").map_or(Ok(synth_defaults.n_days), |v| parse_num("n-days", v))?;
        let n_fuels: usize =
            get("fuels").map_or(Ok(synth_defaults.n_fuels), |v| parse_num("fuels", v))?;
        if n_days == 0 || n_fuels == 0 {
            return Err(Error::Config(
                "`n-days` and `fuels` must be positive".into(),
            ));
        }
        let start = match get("start") {
            Some(v) => NaiveDate::parse_from_str(v, "%Y-%m-%d")
                .map_err(|e| Error::Config(format!("`start`: {e}")))?,
            None => synth_defaults.start,
        };
        let amplitude = |key: &str, default: f64| -> Result<f64> {
            let v: f64 = get(key).map_or(Ok(default), |v| parse_num(key, v))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "`{key}` must be finite and non-negative"
                )));
            }
            Ok(v)
        };

        Ok(Self {
            inputs: get("input")
                .map(list)
                .unwrap_or_default()
                .into_iter()
                .map(PathBuf::from)
                .collect(),
            regions: get("region").map(list).filter(|r| !r.is_empty()),
            methods: match get("methods") {
                Some(v) => MethodId::parse_list(v)?,
                None => MethodId::ALL.to_vec(),
            },
            horizon,
            split,
            refit_every,
            coda: CodaOptions { eps, delta },
            negative_policy: get("negative-policy")
                .map_or(Ok(NegativePolicy::default()), str::parse)
                .map_err(|e: Error| Error::Config(e.to_string()))?,
            zero_total_policy: get("zero-total-policy")
                .map_or(Ok(ZeroTotalPolicy::default()), str::parse)
                .map_err(|e: Error| Error::Config(e.to_string()))?,
            out: PathBuf::from(get("out").unwrap_or("out")),
            seed: get("seed").map_or(Ok(synth_defaults.seed), |v| parse_num("seed", v))?,
            n_days,
            n_fuels,
            start,
            weekly_amplitude: amplitude("weekly-amplitude", synth_defaults.weekly_amplitude)?,
            trend_amplitude: amplitude("trend-amplitude", synth_defaults.trend_amplitude)?,
            noise: amplitude("noise", synth_defaults.noise)?,
        })
    }

    /// The resolved configuration in the same format the config file uses.
    pub fn to_config_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let rows: [(&str, String); 18] = [
            (
                "input",
                join(
                    self.inputs
                        .iter()
                        .map(|p| p.display().to_string())
                        .collect(),
                ),
            ),
            ("region", self.regions.clone().map(join).unwrap_or_default()),
            (
                "methods",
                join(self.methods.iter().map(|m| m.to_string()).collect()),
            ),
            ("horizon", self.horizon.to_string()),
            ("train-fraction", self.split.train_fraction().to_string()),
            ("refit-every", self.refit_every.to_string()),
            ("eps", self.coda.eps.to_string()),
            ("delta", self.coda.delta.to_string()),
            ("out", self.out.display().to_string()),
            ("seed", self.seed.to_string()),
            ("negative-policy", self.negative_policy.to_string()),
            ("zero-total-policy", self.zero_total_policy.to_string()),
            ("n-days", self.n_days.to_string()),
            ("fuels", self.n_fuels.to_string()),
            ("start", self.start.to_string()),
            ("weekly-amplitude", self.weekly_amplitude.to_string()),
            ("trend-amplitude", self.trend_amplitude.to_string()),
            ("noise", self.noise.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn backtest_options(&self) -> BacktestOptions {
        BacktestOptions {
            split: self.split,
            refit_every: self.refit_every,
            engine: EtsEngine::default(),
            coda: self.coda,
            zero_total_policy: self.zero_total_policy,
        }
    }

    fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            n_days: self.n_days,
            n_fuels: self.n_fuels,
            start: self.start,
            region: self
                .regions
                .as_ref()
                .and_then(|r| r.first().cloned())
                .unwrap_or_else(|| SynthConfig::default().region),
            weekly_amplitude: self.weekly_amplitude,
            trend_amplitude: self.trend_amplitude,
            noise: self.noise,
            ..SynthConfig::default()
        }
    }
}

/// Exit code for an error: 2 for usage and header problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnknownMethod(_) | Error::Schema { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn file_stem(region: &str) -> String {
    region.to_lowercase()
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_config_text())?;
    Ok(())
}

fn is_panel_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Loads every requested region from the inputs, sorted by region name.
pub fn load_panels(cfg: &RunConfig) -> Result<Vec<(GenerationPanel, IngestDiagnostics)>> {
    if cfg.inputs.is_empty() {
        return Err(Error::Config("no `input` given".into()));
    }
    let mut panels: Vec<(GenerationPanel, IngestDiagnostics)> = Vec::new();
    let mut records: Vec<RawRecord> = Vec::new();
    for path in &cfg.inputs {
        if is_panel_json(path) {
            let panel = GenerationPanel::from_json(&fs::read_to_string(path)?)?;
            panels.push((panel, IngestDiagnostics::default()));
        } else {
            records.extend(parse_csv(fs::File::open(path)?)?);
        }
    }
    for region in regions(&records) {
        let (panel, diag) = build_panel(&records, &region, cfg.negative_policy)?;
        let mut d = IngestDiagnostics::default();
        d.regions.insert(region, diag);
        panels.push((panel, d));
    }
    if let Some(wanted) = &cfg.regions {
        for w in wanted {
            if !panels.iter().any(|(p, _)| p.region() == w) {
                return Err(Error::Config(format!(
                    "region `{w}` not found in the input"
                )));
            }
        }
        panels.retain(|(p, _)| wanted.iter().any(|w| w == p.region()));
    }
    panels.sort_by(|a, b| a.0.region().cmp(b.0.region()));
    for pair in panels.windows(2) {
        if pair[0].0.region() == pair[1].0.region() {
            return Err(Error::Config(format!(
                "region `{}` supplied more than once",
                pair[0].0.region()
            )));
        }
    }
    for (p, _) in &panels {
        p.ensure_fit_window()?;
    }
    Ok(panels)
}

/// Writes `<region>.panel.json` per region and `ingest_diagnostics.json`.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panels = load_panels(cfg)?;
    prepare_out(cfg)?;
    let mut diagnostics = IngestDiagnostics::default();
    let mut written = Vec::new();
    for (panel, diag) in &panels {
        let path = cfg
            .out
            .join(format!("{}.panel.json", file_stem(panel.region())));
        fs::write(&path, panel.to_json()?)?;
        written.push(path);
        diagnostics.regions.extend(diag.regions.clone());
    }
    fs::write(
        cfg.out.join("ingest_diagnostics.json"),
        diagnostics.to_json()?,
    )?;
    Ok(written)
}

fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// Forecast rows for one panel:
/// `origin_date,horizon,method,fuel_type,value_mwh,share`.
///
/// Hierarchical methods add a `Total` row carrying the total level with an
/// empty share. Compositional methods forecast shares only, so their
/// `value_mwh` is empty and they have no total row.
pub fn forecast_csv(panel: &GenerationPanel, cfg: &RunConfig) -> Result<String> {
    let opts = cfg.backtest_options();
    let suite = MethodSuite::fit(panel, &cfg.methods, &opts);
    let origin = panel.last_date();
    let names = panel.fuel_names();
    let mut out = String::from("origin_date,horizon,method,fuel_type,value_mwh,share\n");
    let fail = |m: MethodId, e: String| Error::InsufficientData(format!("{m} failed: {e}"));
    for &method in &cfg.methods {
        for h in 1..=cfg.horizon {
            let shares = suite
                .forecast_shares(method, panel, h)
                .map_err(|e| fail(method, e))?;
            let levels = if method.is_hierarchical() {
                let hf = suite
                    .forecast_hierarchical(method, panel, h)
                    .map_err(|e| fail(method, e))?;
                Some(hf.forecast)
            } else {
                None
            };
            for (j, name) in names.iter().enumerate() {
                let value = levels
                    .as_ref()
                    .map(|f| fmt_value(f.bottom[j]))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{origin},{h},{method},{},{value},{}",
                    csv_field(name),
                    fmt_value(shares[j])
                );
            }
            if let Some(f) = &levels {
                let _ = writeln!(out, "{origin},{h},{method},Total,{},", fmt_value(f.total));
            }
        }
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `<region>.forecast.csv` per region.
pub fn cmd_forecast(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let panels = load_panels(cfg)?;
    prepare_out(cfg)?;
    let mut written = Vec::new();
    for (panel, _) in &panels {
        let path = cfg
            .out
            .join(format!("{}.forecast.csv", file_stem(panel.region())));
        fs::write(&path, forecast_csv(panel, cfg)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `<region>.report.json` and `<region>.mase_per_day.csv` per region,
/// plus `mase_table.txt` and `mase_table.csv` across regions. Returns the
/// text table.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<String> {
    let panels = load_panels(cfg)?;
    prepare_out(cfg)?;
    let opts = cfg.backtest_options();
    let mut reports = Vec::with_capacity(panels.len());
    for (panel, _) in &panels {
        log::info!("backtesting {} ({} days)", panel.region(), panel.n_days());
        let report = rolling_backtest(panel, &cfg.methods, &opts)?;
        let stem = file_stem(panel.region());
        fs::write(
            cfg.out.join(format!("{stem}.report.json")),
            report.to_json()?,
        )?;
        fs::write(
            cfg.out.join(format!("{stem}.mase_per_day.csv")),
            report.per_day_csv(),
        )?;
        reports.push(report);
    }
    let text = table::render_text(&reports)?;
    fs::write(cfg.out.join("mase_table.txt"), &text)?;
    fs::write(cfg.out.join("mase_table.csv"), table::render_csv(&reports)?)?;
    Ok(text)
}

/// Writes `<region>.csv` in the long input format.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let sc = cfg.synth_config();
    let panel = synth_panel(&sc)?;
    prepare_out(cfg)?;
    let path = cfg.out.join(format!("{}.csv", file_stem(&sc.region)));
    write_long_csv(&panel, fs::File::create(&path)?)?;
    Ok(path)
}

fn configure_threads() {
    if let Some(n) = std::env::var("FUELCAST_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::debug!("thread pool already configured: {e}");
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    configure_threads();
    let result = match &cli.command {
        Command::Ingest(c) => RunConfig::resolve(c, None).and_then(|cfg| {
            cmd_ingest(&cfg).map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
        }),
        Command::Forecast(c) => RunConfig::resolve(c, None).and_then(|cfg| {
            cmd_forecast(&cfg).map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
            })
        }),
        Command::Backtest(c) => RunConfig::resolve(c, None)
            .and_then(|cfg| cmd_backtest(&cfg).map(|text| print!("{text}"))),
        Command::Synth { common, synth } => RunConfig::resolve(common, Some(synth))
            .and_then(|cfg| cmd_synth(&cfg).map(|p| println!("{}", p.display()))),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses arguments and runs; clap usage errors exit with code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}
