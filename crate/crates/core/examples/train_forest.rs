//! Fit a random forest that tells ER from SBM graphs and rank the features.
//!
//! cargo run --release --example train_forest

use graphsel::forest::{evaluate_accuracy, top_k_features};
use graphsel::generators::ModelParams;
use graphsel::{featurize, fit_forest, Dataset, ErParams, ForestConfig, Result, Sample};
use graphsel::{SampleMeta, SbmParams, Seed, FEATURE_NAMES};

fn dataset(models: &[ModelParams], seeds: std::ops::Range<u64>) -> Result<Dataset> {
    let mut d = Dataset::with_features(&FEATURE_NAMES);
    for model in models {
        for s in seeds.clone() {
            let seed = Seed::new(model.population_root(3), s);
            let fv = featurize(&model.generate(seed)?)?;
            d.push(Sample {
                features: fv.0.to_vec(),
                label: model.label(),
                meta: SampleMeta {
                    n: model.n(),
                    seed: Some(seed),
                    ..SampleMeta::default()
                },
            })?;
        }
    }
    Ok(d)
}

fn main() -> Result<()> {
    let models = [
        ModelParams::Er(ErParams::new(300, 0.08)?),
        ModelParams::Sbm(SbmParams::new(300, 0.12, 0.04)?),
    ];
    let train = dataset(&models, 0..30)?;
    let test = dataset(&models, 30..45)?;
    let forest = fit_forest(&train, &ForestConfig::default())?;
    println!("held-out accuracy: {:.3}", evaluate_accuracy(&forest, &test)?);

    let top = top_k_features(forest.importances(), 5)?;
    println!("top features:");
    for i in top.indices() {
        println!("  {:<18} {:.4}", FEATURE_NAMES[*i], forest.importances()[*i]);
    }
    Ok(())
}
