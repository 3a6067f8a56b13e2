use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fuelcast::ingest::write_long_csv;
use fuelcast::model::GenerationPanel;
use fuelcast::synth::{synth_panel, SynthConfig};

fn fuelcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuelcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_panel_csv(path: &Path, cfg: &SynthConfig) {
    let panel = synth_panel(cfg).unwrap();
    write_long_csv(&panel, fs::File::create(path).unwrap()).unwrap();
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["--seed", "9", "--fuels", "3", "--n-days", "200"];
    for out in [&a, &b] {
        let mut full = vec!["synth", "--out", path_str(out)];
        full.extend(args);
        assert!(fuelcast(&full).status.success());
    }
    let ca = fs::read(a.join("syn.csv")).unwrap();
    let cb = fs::read(b.join("syn.csv")).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert_eq!(text.lines().count(), 1 + 600);
    assert_eq!(
        fs::read_to_string(a.join("config.txt"))
            .unwrap()
            .replace(path_str(&a), ""),
        fs::read_to_string(b.join("config.txt"))
            .unwrap()
            .replace(path_str(&b), "")
    );
}

#[test]
fn synth_zero_amplitude_gives_constant_shares() {
    let dir = tempfile::tempdir().unwrap();
    let out = fuelcast(&[
        "synth",
        "--out",
        path_str(dir.path()),
        "--fuels",
        "3",
        "--n-days",
        "20",
        "--weekly-amplitude",
        "0",
        "--trend-amplitude",
        "0",
        "--noise",
        "0",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("syn.csv")).unwrap();
    let rows = data_rows(&text);
    let first: Vec<&String> = rows[..3].iter().map(|r| &r[3]).collect();
    for day in rows.chunks(3) {
        let values: Vec<&String> = day.iter().map(|r| &r[3]).collect();
        assert_eq!(values, first);
    }
}

#[test]
fn ingest_writes_one_panel_per_region() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("date,region,fuel_type,generation_mwh\n");
    for (k, region) in ["NSW", "QLD", "SA", "TAS", "VIC"].iter().enumerate() {
        let panel = synth_panel(&SynthConfig {
            region: region.to_string(),
            seed: k as u64,
            n_days: 30,
            n_fuels: 3,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_long_csv(&panel, &mut buf).unwrap();
        csv.push_str(String::from_utf8(buf).unwrap().split_once('\n').unwrap().1);
    }
    let input = dir.path().join("nem.csv");
    fs::write(&input, csv).unwrap();
    let out_dir = dir.path().join("cache");
    let out = fuelcast(&[
        "ingest",
        "--input",
        path_str(&input),
        "--out",
        path_str(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for r in ["nsw", "qld", "sa", "tas", "vic"] {
        let json = fs::read_to_string(out_dir.join(format!("{r}.panel.json"))).unwrap();
        let panel = GenerationPanel::from_json(&json).unwrap();
        assert_eq!(panel.n_days(), 30);
    }
    assert!(out_dir.join("ingest_diagnostics.json").exists());
    assert!(out_dir.join("config.txt").exists());

    let nsw_only = dir.path().join("nsw");
    let out = fuelcast(&[
        "ingest",
        "--input",
        path_str(&input),
        "--region",
        "NSW",
        "--out",
        path_str(&nsw_only),
    ]);
    assert!(out.status.success());
    assert!(nsw_only.join("nsw.panel.json").exists());
    assert!(!nsw_only.join("qld.panel.json").exists());
}

#[test]
fn missing_header_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "2021-01-01,NSW,Gas,10\n2021-01-02,NSW,Gas,11\n").unwrap();
    let out = fuelcast(&[
        "ingest",
        "--input",
        path_str(&input),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn data_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gap.csv");
    fs::write(
        &input,
        "date,region,fuel_type,generation_mwh\n2021-01-01,NSW,Gas,10\n2021-01-03,NSW,Gas,11\n",
    )
    .unwrap();
    let out = fuelcast(&[
        "ingest",
        "--input",
        path_str(&input),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2021-01-02"));
}

#[test]
fn forecast_rows_and_shares() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("two.csv");
    write_panel_csv(
        &input,
        &SynthConfig {
            n_fuels: 2,
            n_days: 60,
            ..Default::default()
        },
    );
    let out_dir = dir.path().join("bu");
    let out = fuelcast(&[
        "forecast",
        "--input",
        path_str(&input),
        "--methods",
        "BU",
        "--horizon",
        "1",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("syn.forecast.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "origin_date,horizon,method,fuel_type,value_mwh,share"
    );
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][3], "Total");
    let total: f64 = rows[2][4].parse().unwrap();
    let sum: f64 = rows[..2].iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
    assert!((total - sum).abs() <= 1e-9 * total.max(1.0));

    let all_dir = dir.path().join("all");
    let out = fuelcast(&[
        "forecast",
        "--input",
        path_str(&input),
        "--methods",
        "BU,TDGSA,TDGSF,TDFP,CLR,CDF",
        "--out",
        path_str(&all_dir),
    ]);
    assert!(out.status.success());
    let rows = data_rows(&fs::read_to_string(all_dir.join("syn.forecast.csv")).unwrap());
    let mut methods: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    methods.dedup();
    assert_eq!(methods, ["BU", "TDGSA", "TDGSF", "TDFP", "CLR", "CDF"]);
    for m in &methods {
        let s: f64 = rows
            .iter()
            .filter(|r| r[2] == *m && !r[5].is_empty())
            .map(|r| r[5].parse::<f64>().unwrap())
            .sum();
        assert!((s - 1.0).abs() < 1e-9, "{m}: {s}");
    }
}

#[test]
fn forecast_reads_cached_panels() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    write_panel_csv(
        &input,
        &SynthConfig {
            n_days: 40,
            n_fuels: 3,
            ..Default::default()
        },
    );
    let cache = dir.path().join("cache");
    assert!(fuelcast(&[
        "ingest",
        "--input",
        path_str(&input),
        "--out",
        path_str(&cache)
    ])
    .status
    .success());
    let from_csv = dir.path().join("a");
    let from_json = dir.path().join("b");
    assert!(fuelcast(&[
        "forecast",
        "--input",
        path_str(&input),
        "--out",
        path_str(&from_csv)
    ])
    .status
    .success());
    let cached = cache.join("syn.panel.json");
    assert!(fuelcast(&[
        "forecast",
        "--input",
        path_str(&cached),
        "--out",
        path_str(&from_json)
    ])
    .status
    .success());
    assert_eq!(
        fs::read(from_csv.join("syn.forecast.csv")).unwrap(),
        fs::read(from_json.join("syn.forecast.csv")).unwrap()
    );
}

#[test]
fn unknown_method_lists_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    write_panel_csv(
        &input,
        &SynthConfig {
            n_days: 30,
            ..Default::default()
        },
    );
    let out = fuelcast(&[
        "forecast",
        "--input",
        path_str(&input),
        "--methods",
        "BU,ARIMA",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ARIMA") && err.contains("TDGSA") && err.contains("CDF"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(fuelcast(&["backtest", "--bogus"]).status.code(), Some(2));
    assert_eq!(fuelcast(&[]).status.code(), Some(2));
    assert_eq!(
        fuelcast(&["backtest", "--input", "x.csv", "--train-fraction", "2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn backtest_outputs_and_idempotence() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("syn.csv");
    write_panel_csv(
        &input,
        &SynthConfig {
            n_fuels: 3,
            n_days: 120,
            ..Default::default()
        },
    );
    let out_dir = dir.path().join("bt");
    let run = || {
        let out = fuelcast(&[
            "backtest",
            "--input",
            path_str(&input),
            "--refit-every",
            "5",
            "--out",
            path_str(&out_dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        [
            "syn.report.json",
            "syn.mase_per_day.csv",
            "mase_table.txt",
            "mase_table.csv",
            "config.txt",
        ]
        .map(|f| fs::read(out_dir.join(f)).unwrap())
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);

    let report: serde_json::Value = serde_json::from_slice(&first[0]).unwrap();
    assert_eq!(report["n_test"], 30);
    let counts: u64 = report["winner_counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(counts, 30);
    assert!(report["diagnostics"]["failed_cells"]
        .as_array()
        .unwrap()
        .is_empty());

    let table = String::from_utf8(first[3].clone()).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "region,n_test,mase_BU,mase_TDGSA,mase_TDGSF,mase_TDFP,mase_CLR,mase_CDF,\
         days_BU,days_TDGSA,days_TDGSF,days_TDFP,days_CLR,days_CDF"
    );
}

#[test]
fn backtest_single_method_on_five_year_panel() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("long.csv");
    write_panel_csv(
        &input,
        &SynthConfig {
            region: "NSW".into(),
            n_fuels: 2,
            n_days: 1826,
            start: chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
            ..Default::default()
        },
    );
    let out_dir = dir.path().join("bt");
    let out = fuelcast(&[
        "backtest",
        "--input",
        path_str(&input),
        "--methods",
        "BU",
        "--train-fraction",
        "0.75",
        "--refit-every",
        "60",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(out_dir.join("mase_table.txt")).unwrap();
    assert!(text.starts_with("Mean MASE and winning days (n_test = 457)"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("nsw.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["n_test"], 457);
    assert_eq!(report["methods"], serde_json::json!(["BU"]));
    assert_eq!(report["winner_counts"], serde_json::json!([457]));
    let per_day = fs::read_to_string(out_dir.join("nsw.mase_per_day.csv")).unwrap();
    assert_eq!(per_day.lines().next().unwrap(), "date,BU");
    assert_eq!(per_day.lines().count(), 458);
}

#[test]
fn config_file_is_honoured_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("syn.csv");
    write_panel_csv(
        &input,
        &SynthConfig {
            n_days: 40,
            ..Default::default()
        },
    );
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        format!("input = {}\nmethods = CLR\nhorizon = 2\n", input.display()),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = fuelcast(&[
        "forecast",
        "--config",
        path_str(&conf),
        "--methods",
        "CDF",
        "--out",
        path_str(&out_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = data_rows(&fs::read_to_string(out_dir.join("syn.forecast.csv")).unwrap());
    assert!(rows.iter().all(|r| r[2] == "CDF"));
    assert!(rows.iter().any(|r| r[1] == "2"));
    let echo = fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(echo.contains("methods = CDF\n") && echo.contains("horizon = 2\n"));
}
