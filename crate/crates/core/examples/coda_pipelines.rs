//! Forecasts a fuel mix directly on the simplex with the CLR and CDF
//! pipelines and shows the principal components each one retains.

use fuelcast::coda::{
    forecast_composition_cdf, forecast_composition_clr, CodaOptions, CompositionalModel, Transform,
};
use fuelcast::ets::EtsEngine;
use fuelcast::model::{to_shares, ZeroTotalPolicy};
use fuelcast::synth::{synth_panel, SynthConfig};

fn main() -> fuelcast::Result<()> {
    let panel = synth_panel(&SynthConfig {
        n_fuels: 5,
        n_days: 200,
        seed: 3,
        ..Default::default()
    })?;
    let comp = to_shares(&panel, ZeroTotalPolicy::Error)?;
    let engine = EtsEngine::default();

    println!("fuels: {:?}", panel.fuel_names());
    println!("last observed mix: {:.4?}", comp.shares().last().unwrap());

    let clr = forecast_composition_clr(&comp, 1, &engine)?;
    let cdf = forecast_composition_cdf(&comp, 1, &engine)?;
    println!("CLR forecast:      {:.4?}", clr.values());
    println!("CDF forecast:      {:.4?}", cdf.values());

    for transform in [Transform::Clr, Transform::CdfLogit] {
        let model = CompositionalModel::fit(&comp, transform, &engine, CodaOptions::default())?;
        let dump = model.dump();
        println!(
            "\n{transform:?}: {} of {} components kept",
            dump.selected,
            dump.eigenvalues.len()
        );
        let eigs: Vec<String> = dump
            .eigenvalues
            .iter()
            .map(|v| format!("{v:.3e}"))
            .collect();
        println!("  eigenvalues {}", eigs.join(", "));
        for model in &dump.score_models {
            println!("  score model {model}");
        }
    }
    Ok(())
}
