//! Rolling one-step-ahead backtest of all six methods on a synthetic
//! region, printed as a mean-MASE and winning-days table.
//!
//! Pass a number to change how often parameters are re-estimated:
//! `cargo run --release --example backtest -- 5`.

use fuelcast::evaluate::{rolling_backtest, table, BacktestOptions, MethodId};
use fuelcast::synth::{synth_panel, SynthConfig};

fn main() -> fuelcast::Result<()> {
    let refit_every = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1);
    let panel = synth_panel(&SynthConfig {
        region: "NSW".into(),
        n_fuels: 5,
        n_days: 400,
        seed: 11,
        ..Default::default()
    })?;
    let opts = BacktestOptions {
        refit_every,
        ..Default::default()
    };
    let report = rolling_backtest(&panel, &MethodId::ALL, &opts)?;
    print!("{}", table::render_text(std::slice::from_ref(&report))?);
    println!(
        "scored {} of {} days, {} failed cells",
        report.n_scored(),
        report.n_test,
        report.diagnostics.failed_cells.len()
    );
    Ok(())
}
