//! Graph model selection: discriminate Erdős–Rényi graphs from stochastic
//! block model graphs of equal density using a 26-dimensional topological
//! embedding and a random-forest classifier.

pub mod cli;
pub mod decimal;
pub mod error;
pub mod exact_sum;
pub mod experiments;
pub mod features;
pub mod forest;
pub mod generators;
pub mod graph;
pub mod io;
pub mod seed;

pub use error::{Error, Result};
pub use features::{featurize, FeatureSubset, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use forest::{fit_forest, Dataset, Forest, ForestConfig, Label, Sample, SampleMeta};
pub use generators::{generate_er, generate_sbm, rewire_uniform, ErParams, ModelParams, SbmParams};
pub use graph::{Graph, VertexStats};
pub use seed::Seed;
