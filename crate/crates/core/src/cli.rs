//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::experiments::{instance_graph, instance_seed, Experiment, GridPoint, SubsetSpec};
use crate::features::{featurize, FeatureSubset};
use crate::forest::{evaluate_accuracy, fit_forest, Label, SampleMeta};
use crate::generators::{ErParams, ModelParams, SbmParams};
use crate::io::{self, EdgeListMeta, ExperimentConfig, FeatureRow, OutputSet, Provenance, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "graphsel", version, about = "ER vs SBM model selection benchmark")]
pub struct Cli {
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded graph instances as edge-list files.
    Generate(GenerateArgs),
    /// Compute the 26 features of edge-list files or generated instances.
    Featurize(FeaturizeArgs),
    /// Fit a random forest on a labeled feature matrix.
    Train(TrainArgs),
    /// Score a fitted forest on a labeled feature matrix.
    Evaluate(EvaluateArgs),
    /// Run one experiment family and write its reports.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Er,
    Sbm,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Edge probability (ER).
    #[arg(long)]
    pub p: Option<f64>,
    /// Within-block probability (SBM).
    #[arg(long)]
    pub p_in: Option<f64>,
    /// Cross-block probability (SBM).
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Fraction of edges rewired after generation.
    #[arg(long, default_value_t = 0.0)]
    pub rewire: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Edge-list files or directories of `.edges` files.
    pub inputs: Vec<PathBuf>,
    /// Generate instances instead of reading files.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output file; defaults to `<out>/features.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled feature matrix.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_samples_split: Option<usize>,
    /// `all`, `critical` or a comma-separated list of feature names.
    #[arg(long)]
    pub subset: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Sweep,
    Importance,
    Topk,
    Rewire,
    Aggregate,
    Size,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Sweep => "sweep",
            Figure::Importance => "importance",
            Figure::Topk => "topk",
            Figure::Rewire => "rewire",
            Figure::Aggregate => "aggregate",
            Figure::Size => "size",
        }
    }

    fn default_subsets(self) -> Vec<SubsetSpec> {
        match self {
            Figure::Topk => vec![
                SubsetSpec::All,
                SubsetSpec::Top(15),
                SubsetSpec::Top(10),
                SubsetSpec::Critical,
            ],
            _ => vec![SubsetSpec::All],
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub figure: Figure,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()) as u8)
}

/// Runs a command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None => None,
    };
    let jobs = cli
        .jobs
        .map(usize::from)
        .or(config.as_ref().and_then(|c| c.jobs));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Runtime(Error::invalid(format!("thread pool: {e}"))))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate(cli, &out, a),
        Command::Featurize(a) => featurize_cmd(cli, &out, a),
        Command::Train(a) => train(cli, config.as_ref(), &out, a),
        Command::Evaluate(a) => evaluate(&out, a),
        Command::Experiment(a) => experiment(cli, config, &out, a),
    })
}

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

fn model_params(a: &ModelArgs) -> CliResult<ModelParams> {
    let kind = a.model.ok_or_else(|| usage("--model is required"))?;
    let params = match kind {
        ModelKind::Er => {
            let p = a.p.ok_or_else(|| usage("--p is required for --model er"))?;
            ModelParams::Er(ErParams::new(a.n, p).map_err(|e| usage(e.to_string()))?)
        }
        ModelKind::Sbm => {
            let p_in = a.p_in.ok_or_else(|| usage("--p-in is required for --model sbm"))?;
            let p_out = a.p_out.ok_or_else(|| usage("--p-out is required for --model sbm"))?;
            ModelParams::Sbm(
                SbmParams::with_blocks(a.n, a.blocks, p_in, p_out)
                    .map_err(|e| usage(e.to_string()))?,
            )
        }
    };
    if !(0.0..=1.0).contains(&a.rewire) {
        return Err(usage(format!("--rewire {} outside [0, 1]", a.rewire)));
    }
    let on_grid = match params {
        ModelParams::Er(p) => GridPoint::null(p.n, p.p).is_ok(),
        ModelParams::Sbm(p) => p.k == 2 && GridPoint::new(p.n, p.p_in, p.p_out).is_ok(),
    };
    if !on_grid {
        eprintln!("warning: parameters are off the experiment grid");
    }
    Ok(params)
}

fn instance_name(model: &ModelParams, index: usize, count: usize) -> String {
    let width = (count.saturating_sub(1)).to_string().len().max(4);
    match model {
        ModelParams::Er(p) => format!("er_n{}_p{}_{index:0width$}", p.n, p.p),
        ModelParams::Sbm(p) if p.k == 2 => {
            format!("sbm_n{}_pin{}_pout{}_{index:0width$}", p.n, p.p_in, p.p_out)
        }
        ModelParams::Sbm(p) => format!(
            "sbm_n{}_k{}_pin{}_pout{}_{index:0width$}",
            p.n, p.k, p.p_in, p.p_out
        ),
    }
}

fn instance_meta(model: &ModelParams, root: u64, index: u64, rewire: f64) -> EdgeListMeta {
    let mut m = EdgeListMeta::new();
    m.insert("model".into(), model.label().to_string());
    m.insert("n".into(), model.n().to_string());
    match model {
        ModelParams::Er(p) => {
            m.insert("p".into(), p.p.to_string());
        }
        ModelParams::Sbm(p) => {
            m.insert("k".into(), p.k.to_string());
            m.insert("p_in".into(), p.p_in.to_string());
            m.insert("p_out".into(), p.p_out.to_string());
        }
    }
    m.insert("rewire_fraction".into(), rewire.to_string());
    m.insert("seed".into(), instance_seed(model, root, index).to_string());
    m
}

fn generate(cli: &Cli, out: &Path, a: &GenerateArgs) -> CliResult<()> {
    let model = model_params(&a.model)?;
    let root = cli.seed.unwrap_or(0);
    let texts = (0..a.model.count)
        .into_par_iter()
        .map(|i| {
            let g = instance_graph(&model, root, i as u64, a.model.rewire)?;
            let meta = instance_meta(&model, root, i as u64, a.model.rewire);
            Ok(io::write_edge_list(&g, &meta))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut set = OutputSet::new();
    for (i, text) in texts.into_iter().enumerate() {
        let name = instance_name(&model, i, a.model.count);
        set.add(out.join(format!("{name}.edges")), text);
    }
    let written = set.commit()?;
    println!("wrote {} edge lists to {}", written.len(), out.display());
    Ok(())
}

fn expand_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in inputs {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "edges"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn featurize_cmd(cli: &Cli, out: &Path, a: &FeaturizeArgs) -> CliResult<()> {
    let rows: Vec<FeatureRow> = if a.model.model.is_some() {
        if !a.inputs.is_empty() {
            return Err(usage("give either input files or --model, not both"));
        }
        let model = model_params(&a.model)?;
        let root = cli.seed.unwrap_or(0);
        (0..a.model.count as u64)
            .into_par_iter()
            .map(|i| {
                let g = instance_graph(&model, root, i, a.model.rewire)?;
                let meta = instance_meta(&model, root, i, a.model.rewire);
                feature_row(&g, &meta)
            })
            .collect::<crate::Result<_>>()?
    } else {
        expand_inputs(&a.inputs)?
            .par_iter()
            .map(|path| {
                let (g, meta) = io::read_edge_list(path)?;
                feature_row(&g, &meta).map_err(|e| match e {
                    Error::InvalidInput(m) => Error::invalid(format!("{}: {m}", path.display())),
                    other => other,
                })
            })
            .collect::<crate::Result<_>>()?
    };
    let target = a.output.clone().unwrap_or_else(|| out.join("features.csv"));
    let mut set = OutputSet::new();
    set.add(&target, io::write_feature_csv(&rows)?);
    set.commit()?;
    println!("wrote {} feature rows to {}", rows.len(), target.display());
    Ok(())
}

fn feature_row(g: &crate::Graph, meta: &EdgeListMeta) -> crate::Result<FeatureRow> {
    let (label, sample_meta): (Option<Label>, SampleMeta) = io::meta_from_comments(g, meta)?;
    Ok(FeatureRow {
        features: featurize(g)?,
        label,
        meta: sample_meta,
    })
}

fn train(cli: &Cli, config: Option<&ExperimentConfig>, out: &Path, a: &TrainArgs) -> CliResult<()> {
    let data = io::rows_to_dataset(&io::read_feature_csv(&a.features)?)?;
    let data = match &a.subset {
        None => data,
        Some(s) => {
            let spec: SubsetSpec = s.parse().map_err(|e: Error| usage(e.to_string()))?;
            let columns: FeatureSubset = match spec {
                SubsetSpec::Top(_) => {
                    return Err(usage("top-k subsets need a reference forest; use `experiment topk`"))
                }
                other => other.resolve(&[])?,
            };
            data.project(&columns)?
        }
    };
    let mut forest_config = config.map(|c| c.forest.clone()).unwrap_or_default();
    if let Some(s) = cli.seed {
        forest_config.seed = s;
    }
    if let Some(t) = a.trees {
        forest_config.n_trees = t;
    }
    if a.mtry.is_some() {
        forest_config.mtry = a.mtry;
    }
    if a.max_depth.is_some() {
        forest_config.max_depth = a.max_depth;
    }
    if let Some(m) = a.min_samples_split {
        forest_config.min_samples_split = m;
    }
    forest_config
        .validate(data.arity())
        .map_err(|e| usage(e.to_string()))?;
    let forest = fit_forest(&data, &forest_config)?;
    let target = out.join("forest.json");
    let mut set = OutputSet::new();
    set.add(&target, io::forest_to_json(&forest)?);
    set.commit()?;
    println!(
        "fit {} trees on {} rows; wrote {}",
        forest.trees().len(),
        data.len(),
        target.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    rows: usize,
    accuracy: f64,
    /// `confusion[truth][predicted]`, ER first.
    confusion: [[usize; 2]; 2],
}

fn evaluate(out: &Path, a: &EvaluateArgs) -> CliResult<()> {
    let forest = io::forest_from_json(&io::read_text(&a.forest)?)?;
    let data = io::rows_to_dataset(&io::read_feature_csv(&a.features)?)?;
    let data = io::align_to_forest(&forest, &data)?;
    let mut confusion = [[0usize; 2]; 2];
    for row in data.rows() {
        confusion[row.label.index()][forest.predict(&row.features)?.index()] += 1;
    }
    let eval = Evaluation {
        rows: data.len(),
        accuracy: evaluate_accuracy(&forest, &data)?,
        confusion,
    };
    let target = out.join("evaluation.json");
    let mut set = OutputSet::new();
    set.add(&target, serde_json::to_string_pretty(&eval).map_err(Error::from)? + "\n");
    set.commit()?;
    println!("accuracy {:.4} on {} rows", eval.accuracy, eval.rows);
    Ok(())
}

fn experiment(
    cli: &Cli,
    config: Option<ExperimentConfig>,
    out: &Path,
    a: &ExperimentArgs,
) -> CliResult<()> {
    let started = io::now_rfc3339();
    let mut config = config.unwrap_or_default();
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(j) = cli.jobs {
        config.jobs = Some(j.into());
    }
    config.validate()?;
    let provenance = Provenance::new(&config);
    let exp = Experiment::new(config.ensemble(), config.forest.clone())?;
    let grid = config.grid();
    let subsets = config
        .subsets
        .clone()
        .unwrap_or_else(|| a.figure.default_subsets());
    let name = a.figure.name();

    let mut set = OutputSet::new();
    if a.figure == Figure::Importance {
        let report = exp.run_importance_report(&grid)?;
        set.add(out.join("importance.csv"), io::importance_csv(&report)?);
        set.add(out.join("importance.json"), io::importance_json(&report, &provenance)?);
        set.add(
            out.join("plot_importance_concentration.csv"),
            io::concentration_csv(&report)?,
        );
    } else {
        let mut report = match a.figure {
            Figure::Sweep | Figure::Topk => exp.run_delta_sweep(&grid, &subsets)?,
            Figure::Rewire => exp.run_rewire_experiment(&grid, &config.fractions, &subsets)?,
            Figure::Aggregate => exp.run_aggregation_experiment(&grid, &config.epsilons, &subsets)?,
            Figure::Size => exp.run_size_transfer(&grid, config.n_test, &subsets)?,
            Figure::Importance => unreachable!(),
        };
        report.experiment = name.to_string();
        set.add(
            out.join(format!("{name}.csv")),
            io::sweep_csv(&report, &provenance.config_hash)?,
        );
        set.add(out.join(format!("{name}.json")), io::sweep_json(&report, &provenance)?);
        for (file, text) in io::plot_files(&report)? {
            set.add(out.join(file), text);
        }
    }
    let manifest = RunManifest {
        provenance,
        command: format!("experiment {name}"),
        started,
        finished: io::now_rfc3339(),
    };
    set.add(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n",
    );
    let written = set.commit()?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}
