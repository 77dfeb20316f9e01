//! Forests fit on n = 200 graphs applied to n = 240 graphs with the same
//! edge probabilities.
//!
//! cargo run --release --example size_transfer

use graphsel::experiments::{EnsembleSpec, Experiment, SubsetSpec, SweepGrid};
use graphsel::{ForestConfig, Result};

fn main() -> Result<()> {
    let spec = EnsembleSpec {
        n: 200,
        instances: 30,
        train: 20,
        root_seed: 5,
        ..EnsembleSpec::default()
    };
    let exp = Experiment::new(spec, ForestConfig::default())?;
    let grid = SweepGrid {
        density: 0.08,
        deltas: Some(vec![0.04, 0.08, 0.12]),
    };
    let report = exp.run_size_transfer(&grid, 240, &[SubsetSpec::All])?;
    for (curve, rows) in report.curves() {
        for r in rows {
            println!("{curve:<10} delta {:.2}  accuracy {:.3}", r.delta, r.accuracy);
        }
    }
    Ok(())
}
