//! Parses long-format generation records, builds one panel per region and
//! splits it into training and test partitions.

use fuelcast::ingest::{
    build_panel, parse_csv, regions, split_train_test, NegativePolicy, SplitSpec,
};

const CSV: &str = "\
date,region,fuel_type,generation_mwh
2021-01-01,SA,Wind,20500
2021-01-01,SA,Gas,14200.5
2021-01-01,SA,Battery,-35
2021-01-02,SA,Wind,18000
2021-01-02,SA,Gas,15100
2021-01-03,SA,Wind,25100
2021-01-03,SA,Gas,11950
2021-01-03,SA,Battery,12
2021-01-04,SA,Wind,22000
2021-01-04,SA,Gas,13000
2021-01-04,SA,Battery,40
2021-01-01,TAS,Hydro,24000
2021-01-02,TAS,Hydro,23500
2021-01-03,TAS,Hydro,25010
2021-01-04,TAS,Hydro,24800
";

fn main() -> fuelcast::Result<()> {
    let records = parse_csv(CSV.as_bytes())?;
    println!("{} records", records.len());
    for region in regions(&records) {
        let (panel, diag) = build_panel(&records, &region, NegativePolicy::ClampZero)?;
        println!(
            "{region}: fuels {:?}, {} days, {} negatives clamped, {} cells zero-filled",
            panel.fuel_names(),
            panel.n_days(),
            diag.clamped_negatives,
            diag.zero_filled
        );
        let (train, test) = split_train_test(&panel, SplitSpec::default())?;
        println!(
            "  train {} days, test {} days",
            train.n_days(),
            test.n_days()
        );
    }
    Ok(())
}
