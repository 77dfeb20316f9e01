//! Edge lists, feature matrices and forest files, each written and read
//! back.
//!
//! cargo run --release --example file_formats

use std::path::Path;

use graphsel::io::{self, EdgeListMeta, FeatureRow};
use graphsel::{featurize, fit_forest, generate_er, ErParams, ForestConfig, Label, Result, Seed};
use graphsel::{SampleMeta, SbmParams};

fn main() -> Result<()> {
    let g = generate_er(&ErParams::new(30, 0.2)?, Seed::new(1, 0))?;
    let mut meta = EdgeListMeta::new();
    meta.insert("model".into(), "er".into());
    meta.insert("p".into(), "0.2".into());
    let text = io::write_edge_list(&g, &meta);
    println!("{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    let (back, _) = io::parse_edge_list(&text, Path::new("er.edges"))?;
    assert_eq!(back, g);

    let mut rows = Vec::new();
    for (i, (label, graph)) in [
        (Label::Er, g.clone()),
        (Label::Sbm, graphsel::generate_sbm(&SbmParams::new(30, 0.3, 0.1)?, Seed::new(1, 1))?),
    ]
    .into_iter()
    .enumerate()
    {
        rows.push(FeatureRow {
            features: featurize(&graph)?,
            label: Some(label),
            meta: SampleMeta {
                n: 30,
                seed: Some(Seed::new(1, i as u64)),
                ..SampleMeta::default()
            },
        });
    }
    let csv = io::write_feature_csv(&rows)?;
    let parsed = io::parse_feature_csv(&csv, Path::new("features.csv"))?;
    assert_eq!(parsed, rows);
    println!("\nfeature matrix: {} columns, {} rows, bit-exact round trip", csv.lines().next().unwrap().split(',').count(), parsed.len());

    let forest = fit_forest(&io::rows_to_dataset(&parsed)?, &ForestConfig { n_trees: 5, ..Default::default() })?;
    let json = io::forest_to_json(&forest)?;
    assert_eq!(io::forest_from_json(&json)?, forest);
    println!("forest file: {} bytes", json.len());

    match io::parse_edge_list("n 3\n0 1\n1 one\n", Path::new("broken.edges")) {
        Err(e) => println!("\nparse error: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
