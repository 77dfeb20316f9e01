//! Per-δ feature importance rankings and how concentrated they are.
//!
//! cargo run --release --example importance_report

use graphsel::experiments::{EnsembleSpec, Experiment, SweepGrid};
use graphsel::{ForestConfig, Result};

fn main() -> Result<()> {
    let spec = EnsembleSpec {
        n: 200,
        instances: 30,
        train: 20,
        root_seed: 2,
        ..EnsembleSpec::default()
    };
    let exp = Experiment::new(spec, ForestConfig::default())?;
    let grid = SweepGrid {
        density: 0.08,
        deltas: Some(vec![0.04, 0.14]),
    };
    for entry in exp.run_importance_report(&grid)?.entries {
        println!(
            "delta {:.2}: {} features reach 90% of the importance",
            entry.delta, entry.concentration_k
        );
        for f in entry.ranking.iter().take(8) {
            println!("  {:<18} {:.4}", f.name, f.importance);
        }
    }
    Ok(())
}
