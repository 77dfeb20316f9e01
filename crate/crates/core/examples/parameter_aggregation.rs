//! Training on SBM instances whose parameters are only known approximately.
//!
//! cargo run --release --example parameter_aggregation

use graphsel::experiments::{mean_accuracy, EnsembleSpec, Experiment, SubsetSpec, SweepGrid};
use graphsel::{ForestConfig, Result};

fn main() -> Result<()> {
    let spec = EnsembleSpec {
        n: 200,
        instances: 30,
        train: 20,
        root_seed: 4,
        ..EnsembleSpec::default()
    };
    let exp = Experiment::new(spec, ForestConfig::default())?;
    let grid = SweepGrid {
        density: 0.08,
        deltas: Some(vec![0.04, 0.08, 0.12]),
    };
    let report = exp.run_aggregation_experiment(&grid, &[0.02, 0.04], &[SubsetSpec::All])?;
    for (curve, rows) in report.curves() {
        println!("{curve:<14} mean accuracy {:.3}", mean_accuracy(rows));
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}
