//! Seeded ER and SBM instances at matched density, plus rewiring noise.
//!
//! cargo run --release --example generate_graphs

use graphsel::generators::{expected_density, rewire_uniform, ErParams, SbmParams};
use graphsel::{generate_er, generate_sbm, Result, Seed};

fn main() -> Result<()> {
    let er = ErParams::new(1000, 0.08)?;
    let sbm = SbmParams::new(1000, 0.12, 0.04)?;

    let g = generate_er(&er, Seed::new(7, 0))?;
    let h = generate_sbm(&sbm, Seed::new(7, 0))?;
    println!("ER(1000, .08):        {} edges, density {:.5}", g.edge_count(), g.density()?);
    println!(
        "SBM(1000, .12, .04):  {} edges, density {:.5} (expected {:.5})",
        h.edge_count(),
        h.density()?,
        expected_density(&sbm)
    );

    // Same seed, same graph.
    assert_eq!(h, generate_sbm(&sbm, Seed::new(7, 0))?);

    let cross = |edges: &[(u32, u32)]| {
        edges
            .iter()
            .filter(|&&(u, v)| sbm.block_of(u as usize) != sbm.block_of(v as usize))
            .count() as f64
            / edges.len() as f64
    };
    println!("cross-block edge fraction: {:.3}", cross(h.edges()));
    for f in [0.1, 0.2, 0.5, 1.0] {
        let r = rewire_uniform(&h, f, Seed::new(8, 0))?;
        println!(
            "  rewired {:>3.0}%: {} edges moved, cross-block fraction {:.3}",
            f * 100.0,
            r.rewired,
            cross(r.graph.edges())
        );
    }
    Ok(())
}
