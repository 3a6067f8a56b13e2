//! The rolling backtest checked against literal loops over the public
//! forecasting operations.

use fuelcast::coda::{
    forecast_composition_cdf_with, forecast_composition_clr_with, CodaOptions, CompositionalModel,
    Transform,
};
use fuelcast::ets::EtsEngine;
use fuelcast::evaluate::{rolling_backtest, BacktestOptions, MethodId, MethodSuite};
use fuelcast::ingest::SplitSpec;
use fuelcast::model::{to_shares, GenerationPanel, ZeroTotalPolicy};
use fuelcast::reconcile::{
    bottom_up_from, forecast_bottom_up, forecast_top_down, proportions_from_forecasts,
    td_proportions_fp, td_proportions_gsa, td_proportions_gsf, top_down_from, BottomModels,
    TotalModel,
};
use fuelcast::synth::{synth_panel, SynthConfig};

fn three_fuel_panel() -> GenerationPanel {
    synth_panel(&SynthConfig {
        seed: 2024,
        n_fuels: 3,
        n_days: 200,
        ..Default::default()
    })
    .unwrap()
}

fn mase(actual: &[f64], forecast: &[f64], prev: &[f64]) -> f64 {
    let d = actual.len() as f64;
    let num = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).abs())
        .sum::<f64>()
        / d;
    let den = actual
        .iter()
        .zip(prev)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / d;
    num / den
}

fn shares_of(panel: &GenerationPanel) -> Vec<Vec<f64>> {
    to_shares(panel, ZeroTotalPolicy::Error)
        .unwrap()
        .shares()
        .to_vec()
}

#[test]
fn per_day_matrix_matches_independent_loop() {
    let panel = three_fuel_panel();
    let engine = EtsEngine::default();
    let coda = CodaOptions::default();
    let report = rolling_backtest(&panel, &MethodId::ALL, &BacktestOptions::default()).unwrap();

    let n_train = SplitSpec::default().train_len(panel.n_days());
    assert_eq!(report.n_train, n_train);
    assert_eq!(report.n_test, 50);
    let actual = shares_of(&panel);

    for (i, row) in report.per_day_mase.iter().enumerate() {
        let origin = n_train + i;
        let history = panel.slice(0..origin).unwrap();
        let comp = to_shares(&history, ZeroTotalPolicy::Error).unwrap();
        let forecasts = [
            forecast_bottom_up(&history, 1, &engine)
                .unwrap()
                .shares()
                .unwrap(),
            forecast_top_down(&history, 1, &td_proportions_gsa(&history).unwrap(), &engine)
                .unwrap()
                .shares()
                .unwrap(),
            forecast_top_down(&history, 1, &td_proportions_gsf(&history).unwrap(), &engine)
                .unwrap()
                .shares()
                .unwrap(),
            forecast_top_down(
                &history,
                1,
                &td_proportions_fp(&history, 1, &engine).unwrap(),
                &engine,
            )
            .unwrap()
            .shares()
            .unwrap(),
            forecast_composition_clr_with(&comp, 1, &engine, coda)
                .unwrap()
                .values()
                .to_vec(),
            forecast_composition_cdf_with(&comp, 1, &engine, coda)
                .unwrap()
                .values()
                .to_vec(),
        ];
        for (j, f) in forecasts.iter().enumerate() {
            let expected = mase(&actual[origin], f, &actual[origin - 1]);
            assert_eq!(
                row[j].to_bits(),
                expected.to_bits(),
                "day {i}, method {}: {} vs {}",
                MethodId::ALL[j],
                row[j],
                expected
            );
        }
    }
}

#[test]
fn refit_schedule_matches_fit_and_refresh_loop() {
    let panel = three_fuel_panel();
    let engine = EtsEngine::default();
    let coda = CodaOptions::default();
    let refit_every = 5;
    let opts = BacktestOptions {
        refit_every,
        ..Default::default()
    };
    let report = rolling_backtest(&panel, &MethodId::ALL, &opts).unwrap();
    let n_train = report.n_train;
    let actual = shares_of(&panel);

    let mut models: Option<(
        BottomModels,
        TotalModel,
        CompositionalModel,
        CompositionalModel,
    )> = None;
    for i in 0..report.n_test {
        let origin = n_train + i;
        let history = panel.slice(0..origin).unwrap();
        let comp = to_shares(&history, ZeroTotalPolicy::Error).unwrap();
        let (bottom, total, clr, cdf) = if i % refit_every == 0 {
            let fitted = (
                BottomModels::fit(&history, &engine).unwrap(),
                TotalModel::fit(&history, &engine).unwrap(),
                CompositionalModel::fit(&comp, Transform::Clr, &engine, coda).unwrap(),
                CompositionalModel::fit(&comp, Transform::CdfLogit, &engine, coda).unwrap(),
            );
            models = Some(fitted.clone());
            fitted
        } else {
            let (b, t, c, d) = models.as_ref().unwrap();
            (
                b.refresh(&history).unwrap(),
                t.refresh(&history).unwrap(),
                c.refresh(&comp).unwrap(),
                d.refresh(&comp).unwrap(),
            )
        };
        let b = bottom.forecast(1);
        let t = total.forecast(1);
        let forecasts = [
            bottom_up_from(&b).shares().unwrap(),
            top_down_from(t, &td_proportions_gsa(&history).unwrap())
                .shares()
                .unwrap(),
            top_down_from(t, &td_proportions_gsf(&history).unwrap())
                .shares()
                .unwrap(),
            top_down_from(t, &proportions_from_forecasts(&b).unwrap())
                .shares()
                .unwrap(),
            clr.forecast(1),
            cdf.forecast(1),
        ];
        for (j, f) in forecasts.iter().enumerate() {
            let expected = mase(&actual[origin], f, &actual[origin - 1]);
            assert_eq!(report.per_day_mase[i][j].to_bits(), expected.to_bits());
        }
    }
}

#[test]
fn report_is_deterministic() {
    let panel = three_fuel_panel();
    let opts = BacktestOptions {
        refit_every: 3,
        ..Default::default()
    };
    let a = rolling_backtest(&panel, &MethodId::ALL, &opts).unwrap();
    let b = rolling_backtest(&panel, &MethodId::ALL, &opts).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.per_day_csv(), b.per_day_csv());
}

#[test]
fn truncating_the_panel_does_not_change_a_forecast() {
    let panel = three_fuel_panel();
    let opts = BacktestOptions::default();
    let methods = MethodId::ALL;
    let n_train = opts.split.train_len(panel.n_days());
    for gamma in [n_train, n_train + 7, panel.n_days() - 1] {
        let full = panel.slice(0..panel.n_days()).unwrap();
        let cut = panel.slice(0..gamma + 1).unwrap();
        let history_full = full.slice(0..gamma).unwrap();
        let history_cut = cut.slice(0..gamma).unwrap();
        let a = MethodSuite::fit(&history_full, &methods, &opts);
        let b = MethodSuite::fit(&history_cut, &methods, &opts);
        for m in methods {
            assert_eq!(
                a.forecast_shares(m, &history_full, 1).unwrap(),
                b.forecast_shares(m, &history_cut, 1).unwrap()
            );
        }
    }
}

#[test]
fn scaling_all_levels_leaves_scores_unchanged() {
    let panel = three_fuel_panel();
    let scaled = GenerationPanel::new(
        panel.region(),
        panel.fuel_names(),
        panel.dates().to_vec(),
        panel
            .levels()
            .iter()
            .map(|r| r.iter().map(|v| v * 2.0).collect())
            .collect(),
    )
    .unwrap();
    let opts = BacktestOptions {
        refit_every: 10,
        ..Default::default()
    };
    let a = rolling_backtest(&panel, &MethodId::ALL, &opts).unwrap();
    let b = rolling_backtest(&scaled, &MethodId::ALL, &opts).unwrap();
    for (x, y) in a.mean_mase.iter().zip(&b.mean_mase) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn single_method_wins_every_scored_day() {
    let panel = three_fuel_panel();
    let opts = BacktestOptions {
        refit_every: 10,
        ..Default::default()
    };
    let report = rolling_backtest(&panel, &[MethodId::BU], &opts).unwrap();
    assert_eq!(report.methods, vec![MethodId::BU]);
    assert_eq!(report.winner_counts, vec![report.n_test]);
    assert!(report.per_day_mase.iter().all(|r| r.len() == 1));
}

#[test]
fn constant_mix_reproduces_the_mix_and_flags_every_day() {
    let panel = synth_panel(&SynthConfig {
        n_fuels: 4,
        n_days: 60,
        weekly_amplitude: 0.0,
        trend_amplitude: 0.0,
        noise: 0.0,
        ..Default::default()
    })
    .unwrap();
    let opts = BacktestOptions::default();
    let report = rolling_backtest(&panel, &MethodId::ALL, &opts).unwrap();
    // Identical consecutive shares make the naïve error zero on every day.
    assert_eq!(report.diagnostics.undefined_days.len(), report.n_test);
    assert_eq!(report.n_scored(), 0);
    assert_eq!(
        report.winner_counts.iter().sum::<usize>(),
        report.n_scored()
    );

    let mix = &shares_of(&panel)[0];
    let history = panel.slice(0..report.n_train).unwrap();
    let suite = MethodSuite::fit(&history, &MethodId::ALL, &opts);
    for m in MethodId::ALL {
        let f = suite.forecast_shares(m, &history, 1).unwrap();
        for (a, b) in f.iter().zip(mix) {
            assert!((a - b).abs() < 1e-9, "{m}: {f:?} vs {mix:?}");
        }
    }
}

#[test]
fn winner_counts_sum_to_scored_days() {
    let panel = synth_panel(&SynthConfig {
        seed: 5,
        n_fuels: 4,
        n_days: 160,
        ..Default::default()
    })
    .unwrap();
    let opts = BacktestOptions {
        refit_every: 4,
        ..Default::default()
    };
    let report = rolling_backtest(&panel, &MethodId::ALL, &opts).unwrap();
    assert_eq!(report.winner_counts.len(), 6);
    assert_eq!(
        report.winner_counts.iter().sum::<usize>() + report.diagnostics.unassigned_days,
        report.n_scored()
    );
    for (j, mean) in report.mean_mase.iter().enumerate() {
        let col: Vec<f64> = report.per_day_mase.iter().map(|r| r[j]).collect();
        let expected = col.iter().sum::<f64>() / col.len() as f64;
        assert_eq!(*mean, expected);
    }
}
