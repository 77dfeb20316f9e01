//! Forests trained on clean graphs, tested on graphs with 10% and 20% of
//! their edges rewired.
//!
//! cargo run --release --example rewire_robustness

use graphsel::experiments::{mean_accuracy, EnsembleSpec, Experiment, SubsetSpec, SweepGrid};
use graphsel::{ForestConfig, Result};

fn main() -> Result<()> {
    let spec = EnsembleSpec {
        n: 200,
        instances: 30,
        train: 20,
        root_seed: 3,
        ..EnsembleSpec::default()
    };
    let exp = Experiment::new(spec, ForestConfig::default())?;
    let grid = SweepGrid {
        density: 0.08,
        deltas: Some(vec![0.04, 0.08, 0.12]),
    };
    let report = exp.run_rewire_experiment(&grid, &[0.1, 0.2], &[SubsetSpec::All])?;
    for (curve, rows) in report.curves() {
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2}:{:.2}", r.delta, r.accuracy))
            .collect();
        println!("{curve:<16} mean {:.3}  [{}]", mean_accuracy(rows), points.join(" "));
    }
    Ok(())
}
