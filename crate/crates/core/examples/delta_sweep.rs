//! Classification accuracy across the signal gap δ = p_in − p_out at fixed
//! density, next to the detectability threshold δ*.
//!
//! Scaled down (n = 200, 30 instances per model) so it finishes quickly; the
//! acceptance suite runs the n = 1000 version.
//!
//! cargo run --release --example delta_sweep

use graphsel::experiments::{EnsembleSpec, Experiment, SubsetSpec, SweepGrid};
use graphsel::{ForestConfig, Result};

fn main() -> Result<()> {
    let spec = EnsembleSpec {
        n: 200,
        instances: 30,
        train: 20,
        root_seed: 1,
        ..EnsembleSpec::default()
    };
    let exp = Experiment::new(spec, ForestConfig::default())?;
    let grid = SweepGrid {
        density: 0.08,
        deltas: Some(vec![0.01, 0.03, 0.05, 0.08, 0.11, 0.14]),
    };
    let report = exp.run_delta_sweep(&grid, &[SubsetSpec::All, SubsetSpec::Critical])?;
    for (curve, rows) in report.curves() {
        println!("{curve}  (delta* = {:.4})", rows[0].delta_star);
        for r in rows {
            let bar = "#".repeat((r.accuracy * 40.0).round() as usize);
            println!("  delta {:.2}  {:.3} {bar}", r.delta, r.accuracy);
        }
    }
    Ok(())
}
