//! The 26-feature embedding of a small graph and of a generated instance.
//!
//! cargo run --release --example extract_features

use std::time::Instant;

use graphsel::features::{betweenness_centrality, eccentricity_extremes};
use graphsel::{featurize, generate_sbm, Graph, Result, SbmParams, Seed, FEATURE_NAMES};

fn main() -> Result<()> {
    // Two triangles joined by a bridge.
    let g = Graph::from_edges(6, [(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (3, 5), (4, 5)])?;
    println!("betweenness: {:?}", betweenness_centrality(&g)?.values());
    println!("(diameter, radius): {:?}", eccentricity_extremes(&g));
    let fv = featurize(&g)?;
    for (name, value) in FEATURE_NAMES.iter().zip(fv.as_slice()) {
        println!("  {name:<18} {value:.6}");
    }

    let h = generate_sbm(&SbmParams::new(1000, 0.12, 0.04)?, Seed::new(1, 0))?;
    let start = Instant::now();
    let fv = featurize(&h)?;
    println!(
        "\nSBM(1000, .12, .04) featurized in {:.0?}: clustering_avg {:.4}, aspl_avg {:.4}, diameter {}",
        start.elapsed(),
        fv.get("clustering_avg").unwrap(),
        fv.get("aspl_avg").unwrap(),
        fv.get("diameter").unwrap()
    );
    Ok(())
}
