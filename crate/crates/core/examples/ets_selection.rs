//! Fits every candidate exponential smoothing form to a weekly-seasonal
//! series, ranks them by AICc and forecasts a week ahead.

use fuelcast::ets::{fit_ets, select_ets, EtsSpec};

fn main() -> fuelcast::Result<()> {
    let series: Vec<f64> = (0..140)
        .map(|t| {
            let week = (std::f64::consts::TAU * t as f64 / 7.0).sin();
            1000.0 + 0.8 * t as f64 + 60.0 * week + 5.0 * ((t * 37 % 11) as f64 - 5.0)
        })
        .collect();

    let candidates = EtsSpec::default_candidates();
    for spec in &candidates {
        match fit_ets(&series, *spec) {
            Ok(fit) => println!(
                "{:<14} AICc {:>10.2}  params {:?}",
                spec.to_string(),
                fit.aicc,
                fit.params
            ),
            Err(e) => println!("{:<14} failed: {e}", spec.to_string()),
        }
    }

    let best = select_ets(&series, &candidates)?;
    println!("\nselected {}", best.spec);
    let path = best.forecast(7);
    println!("next week: {:.1?}", path);
    Ok(())
}
