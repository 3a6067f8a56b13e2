//! Bottom-up and top-down forecasts for a small synthetic region, with the
//! summing matrix that ties the fuel types to the total.

use fuelcast::ets::EtsEngine;
use fuelcast::model::build_summing_matrix;
use fuelcast::reconcile::{
    forecast_bottom_up, forecast_top_down, td_proportions_fp, td_proportions_gsa,
    td_proportions_gsf,
};
use fuelcast::synth::{synth_panel, SynthConfig};

fn main() -> fuelcast::Result<()> {
    let panel = synth_panel(&SynthConfig {
        n_fuels: 4,
        n_days: 120,
        ..Default::default()
    })?;
    let engine = EtsEngine::default();

    let s = build_summing_matrix(panel.n_fuels())?;
    println!("summing matrix:");
    for row in s.entries() {
        println!("  {row:?}");
    }

    let bu = forecast_bottom_up(&panel, 1, &engine)?;
    println!(
        "\nBU     total {:>10.1}  shares {:.4?}",
        bu.total,
        bu.shares()?
    );
    println!("       all levels {:.1?}", s.apply(&bu.bottom)?);

    let props = [
        ("TDGSA", td_proportions_gsa(&panel)?),
        ("TDGSF", td_proportions_gsf(&panel)?),
        ("TDFP", td_proportions_fp(&panel, 1, &engine)?),
    ];
    for (name, p) in props {
        let td = forecast_top_down(&panel, 1, &p, &engine)?;
        println!(
            "{name:<6} total {:>10.1}  shares {:.4?}",
            td.total,
            td.shares()?
        );
    }
    Ok(())
}
