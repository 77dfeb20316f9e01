//! File formats: edge lists, feature matrices, forest and report JSON,
//! experiment configuration and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decimal;
use crate::error::{Error, Result};
use crate::experiments::{ImportanceReport, SubsetSpec, SweepGrid, SweepReport};
use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::forest::{Dataset, Forest, ForestConfig, Label, Sample, SampleMeta, TreeNode};
use crate::graph::Graph;
use crate::seed::Seed;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Edge lists

/// `key=value` pairs from `#` comment lines of an edge-list file.
pub type EdgeListMeta = BTreeMap<String, String>;

/// Renders a graph as `n <count>` followed by one `u v` line per edge in
/// ascending order, after the given comment lines.
pub fn write_edge_list(g: &Graph, meta: &EdgeListMeta) -> String {
    let mut out = String::with_capacity(16 * g.edge_count() + 64);
    if !meta.is_empty() {
        let fields: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("# {}\n", fields.join(" ")));
    }
    out.push_str(&format!("n {}\n", g.vertex_count()));
    for &(u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

/// Parses an edge list. `path` only labels errors.
pub fn parse_edge_list(text: &str, path: &Path) -> Result<(Graph, EdgeListMeta)> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut meta = EdgeListMeta::new();
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for field in comment.split_whitespace() {
                if let Some((k, v)) = field.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (a, b) = (tokens.next(), tokens.next());
        if tokens.next().is_some() {
            return Err(err(lineno, format!("expected two fields, got `{line}`")));
        }
        match n {
            None => {
                let count = match (a, b) {
                    (Some("n"), Some(c)) => c
                        .parse::<usize>()
                        .map_err(|e| err(lineno, format!("bad vertex count `{c}`: {e}")))?,
                    _ => return Err(err(lineno, format!("expected `n <count>`, got `{line}`"))),
                };
                n = Some(count);
            }
            Some(count) => {
                let parse = |t: Option<&str>| -> Result<usize> {
                    let t = t.ok_or_else(|| err(lineno, format!("expected `u v`, got `{line}`")))?;
                    t.parse::<usize>()
                        .map_err(|e| err(lineno, format!("bad vertex `{t}`: {e}")))
                };
                let (u, v) = (parse(a)?, parse(b)?);
                if u == v {
                    return Err(err(lineno, format!("self-loop on vertex {u}")));
                }
                if u >= count || v >= count {
                    return Err(err(
                        lineno,
                        format!("edge ({u}, {v}) out of range for n = {count}"),
                    ));
                }
                edges.push((u, v));
            }
        }
    }
    let n = n.ok_or_else(|| err(text.lines().count().max(1), "missing `n <count>` line".into()))?;
    Ok((Graph::from_edges(n, edges)?, meta))
}

pub fn read_edge_list(path: &Path) -> Result<(Graph, EdgeListMeta)> {
    parse_edge_list(&read_text(path)?, path)
}

/// Sample metadata recovered from edge-list comments; `model` becomes the
/// label when present.
pub fn meta_from_comments(g: &Graph, meta: &EdgeListMeta) -> Result<(Option<Label>, SampleMeta)> {
    let real = |key: &str| -> Result<Option<f64>> {
        meta.get(key)
            .map(|v| {
                decimal::parse(v).map_err(|e| Error::invalid(format!("comment {key}={v}: {e}")))
            })
            .transpose()
    };
    let label = meta
        .get("model")
        .map(|m| m.parse::<Label>())
        .transpose()?;
    let seed = meta
        .get("seed")
        .map(|s| s.parse::<Seed>().map_err(Error::invalid))
        .transpose()?;
    Ok((
        label,
        SampleMeta {
            n: g.vertex_count(),
            p: real("p")?,
            p_in: real("p_in")?,
            p_out: real("p_out")?,
            rewire_fraction: real("rewire_fraction")?.unwrap_or(0.0),
            seed,
        },
    ))
}

// ---------------------------------------------------------------------------
// Feature matrices

pub const META_COLUMNS: [&str; 7] = ["model", "n", "p", "p_in", "p_out", "rewire_fraction", "seed"];

/// One line of a feature matrix. Unlabeled rows come from graphs without
/// model metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub features: FeatureVector,
    pub label: Option<Label>,
    pub meta: SampleMeta,
}

pub fn feature_header() -> Vec<&'static str> {
    FEATURE_NAMES.iter().chain(META_COLUMNS.iter()).copied().collect()
}

fn opt_real(x: Option<f64>) -> String {
    x.map(decimal::format).unwrap_or_default()
}

pub fn write_feature_csv(rows: &[FeatureRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(feature_header()).map_err(csv_error)?;
    for row in rows {
        let mut rec: Vec<String> = row.features.0.iter().map(|&x| decimal::format(x)).collect();
        rec.push(row.label.map(|l| l.to_string()).unwrap_or_default());
        rec.push(row.meta.n.to_string());
        rec.push(opt_real(row.meta.p));
        rec.push(opt_real(row.meta.p_in));
        rec.push(opt_real(row.meta.p_out));
        rec.push(decimal::format(row.meta.rewire_fraction));
        rec.push(row.meta.seed.map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

pub fn parse_feature_csv(text: &str, path: &Path) -> Result<Vec<FeatureRow>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h.map_err(|e| err(1, e.to_string()))?,
        None => return Err(err(1, "missing header".into())),
    };
    let expected = feature_header();
    if header.iter().ne(expected.iter().copied()) {
        return Err(err(
            1,
            format!("header must be the {} canonical columns", expected.len()),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != expected.len() {
            return Err(err(
                line,
                format!("expected {} columns, got {}", expected.len(), rec.len()),
            ));
        }
        let real = |j: usize| -> Result<f64> {
            decimal::parse(&rec[j]).map_err(|e| err(line, format!("{}: {e}", expected[j])))
        };
        let opt = |j: usize| -> Result<Option<f64>> {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                real(j).map(Some)
            }
        };
        let mut features = [0.0; FEATURE_COUNT];
        for (j, f) in features.iter_mut().enumerate() {
            *f = real(j)?;
        }
        let m = FEATURE_COUNT;
        let label = if rec[m].is_empty() {
            None
        } else {
            Some(rec[m].parse::<Label>().map_err(|e| err(line, e.to_string()))?)
        };
        let n = rec[m + 1]
            .parse::<usize>()
            .map_err(|e| err(line, format!("n: {e}")))?;
        let seed = if rec[m + 6].is_empty() {
            None
        } else {
            Some(rec[m + 6].parse::<Seed>().map_err(|e| err(line, e))?)
        };
        rows.push(FeatureRow {
            features: FeatureVector(features),
            label,
            meta: SampleMeta {
                n,
                p: opt(m + 2)?,
                p_in: opt(m + 3)?,
                p_out: opt(m + 4)?,
                rewire_fraction: real(m + 5)?,
                seed,
            },
        });
    }
    Ok(rows)
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FeatureRow>> {
    parse_feature_csv(&read_text(path)?, path)
}

/// Labeled dataset over all 26 features; unlabeled rows are rejected.
pub fn rows_to_dataset(rows: &[FeatureRow]) -> Result<Dataset> {
    let mut d = Dataset::with_features(&FEATURE_NAMES);
    for (i, row) in rows.iter().enumerate() {
        let label = row
            .label
            .ok_or_else(|| Error::invalid(format!("row {} has no model label", i + 1)))?;
        d.push(Sample {
            features: row.features.0.to_vec(),
            label,
            meta: row.meta.clone(),
        })?;
    }
    Ok(d)
}

pub fn dataset_to_rows(d: &Dataset) -> Result<Vec<FeatureRow>> {
    if d.feature_names().iter().ne(FEATURE_NAMES.iter()) {
        return Err(Error::invalid(
            "only datasets over the 26 canonical features can be written",
        ));
    }
    Ok(d.rows()
        .iter()
        .map(|s| FeatureRow {
            features: FeatureVector(s.features.as_slice().try_into().expect("arity checked")),
            label: Some(s.label),
            meta: s.meta.clone(),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Forests

pub const FOREST_FORMAT: &str = "graphsel-forest";
pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    forest: Forest,
}

pub fn forest_to_json(forest: &Forest) -> Result<String> {
    let file = ForestFile {
        format: FOREST_FORMAT.into(),
        version: FOREST_FORMAT_VERSION,
        forest: forest.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn forest_from_json(text: &str) -> Result<Forest> {
    let file: ForestFile = serde_json::from_str(text)?;
    if file.format != FOREST_FORMAT || file.version != FOREST_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported forest file {} v{}",
            file.format, file.version
        )));
    }
    let f = file.forest;
    if f.trees().is_empty() || f.importances().len() != f.arity() {
        return Err(Error::invalid("forest file is inconsistent"));
    }
    for tree in f.trees() {
        check_tree(tree, f.arity())?;
    }
    Ok(f)
}

fn check_tree(node: &TreeNode, arity: usize) -> Result<()> {
    match node {
        TreeNode::Leaf { counts } if counts[0] + counts[1] == 0 => {
            Err(Error::invalid("forest file has an empty leaf"))
        }
        TreeNode::Leaf { .. } => Ok(()),
        TreeNode::Split {
            feature,
            left,
            right,
            ..
        } => {
            if *feature >= arity {
                return Err(Error::invalid(format!(
                    "forest file splits on feature {feature} of {arity}"
                )));
            }
            check_tree(left, arity)?;
            check_tree(right, arity)
        }
    }
}

/// Projects full rows onto a forest's columns, matched by name.
pub fn align_to_forest(forest: &Forest, data: &Dataset) -> Result<Dataset> {
    let indices = forest
        .feature_names()
        .iter()
        .map(|name| {
            data.feature_names()
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::invalid(format!("feature `{name}` missing from input")))
        })
        .collect::<Result<Vec<_>>>()?;
    let subset = crate::features::FeatureSubset::with_arity(indices, data.arity())?;
    data.project(&subset)
}

// ---------------------------------------------------------------------------
// Experiment configuration

fn default_n() -> usize {
    1000
}
fn default_instances() -> usize {
    100
}
fn default_train() -> usize {
    66
}
fn default_density() -> f64 {
    0.08
}
fn default_fractions() -> Vec<f64> {
    vec![0.1, 0.2]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.02, 0.04]
}
fn default_n_test() -> usize {
    1100
}

/// Experiment configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_train")]
    pub train: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_density")]
    pub density: f64,
    /// Restricts the sweep to these δ values; all grid pairs otherwise.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub forest: ForestConfig,
    /// Feature subsets per curve; each figure has its own default.
    #[serde(default)]
    pub subsets: Option<Vec<SubsetSpec>>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Worker threads; not part of the configuration hash.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

fn config_error(field: &str, e: Error) -> Error {
    Error::Config {
        field: field.to_string(),
        message: match e {
            Error::InvalidInput(m) => m,
            other => other.to_string(),
        },
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
                field: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            density: self.density,
            deltas: self.deltas.clone(),
        }
    }

    pub fn ensemble(&self) -> crate::experiments::EnsembleSpec {
        crate::experiments::EnsembleSpec {
            n: self.n,
            instances: self.instances,
            train: self.train,
            root_seed: self.seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble().validate().map_err(|e| {
            let field = if self.n < 3 { "n" } else { "train" };
            config_error(field, e)
        })?;
        self.grid()
            .points(self.n)
            .map_err(|e| config_error(if self.deltas.is_some() { "deltas" } else { "density" }, e))?;
        self.forest
            .validate(FEATURE_COUNT)
            .map_err(|e| config_error("forest", e))?;
        for (i, f) in self.fractions.iter().enumerate() {
            if !(0.0..=1.0).contains(f) {
                return Err(config_error(
                    &format!("fractions[{i}]"),
                    Error::invalid(format!("{f} outside [0, 1]")),
                ));
            }
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            let scaled = e * 1000.0;
            let ok = e >= 0.0
                && (scaled - scaled.round()).abs() < 1e-6
                && scaled.round() as u64 % crate::experiments::GRID_STEP as u64 == 0;
            if !ok {
                return Err(config_error(
                    &format!("epsilons[{i}]"),
                    Error::invalid(format!("{e} is not a multiple of the grid step")),
                ));
            }
        }
        if self.n_test < 3 {
            return Err(config_error("n_test", Error::invalid("must be at least 3")));
        }
        if self.jobs == Some(0) {
            return Err(config_error("jobs", Error::invalid("must be at least 1")));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `jobs`.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("jobs");
        }
        // serde_json maps are key-sorted, so this text is canonical.
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

// ---------------------------------------------------------------------------
// Reports

/// Run identity embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub root_seed: u64,
    pub grid: SweepGrid,
    pub forest: ForestConfig,
}

impl Provenance {
    pub fn new(config: &ExperimentConfig) -> Self {
        Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config_hash: config.hash(),
            root_seed: config.seed,
            grid: config.grid(),
            forest: config.forest.clone(),
        }
    }
}

/// Provenance plus wall-clock times. The only output that varies between
/// identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub command: String,
    pub started: String,
    pub finished: String,
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "density",
    "p_in",
    "p_out",
    "delta",
    "delta_star",
    "sbm_density",
    "subset",
    "rewire_fraction",
    "epsilon",
    "n_train",
    "n_test",
    "accuracy",
    "config_hash",
    "seed",
];

pub fn sweep_csv(report: &SweepReport, config_hash: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS).map_err(csv_error)?;
    for r in &report.rows {
        w.write_record([
            decimal::format(r.density),
            decimal::format(r.p_in),
            decimal::format(r.p_out),
            decimal::format(r.delta),
            decimal::format(r.delta_star),
            decimal::format(r.sbm_density),
            r.subset.clone(),
            decimal::format(r.rewire_fraction),
            opt_real(r.epsilon),
            r.n_train.to_string(),
            r.n_test.to_string(),
            decimal::format(r.accuracy),
            config_hash.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_error)?;
    }
    csv_string(w)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `(file name, contents)` for each curve: columns delta, accuracy,
/// delta_star.
pub fn plot_files(report: &SweepReport) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (curve, rows) in report.curves() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["delta", "accuracy", "delta_star"]).map_err(csv_error)?;
        for r in rows {
            w.write_record([
                decimal::format(r.delta),
                decimal::format(r.accuracy),
                decimal::format(r.delta_star),
            ])
            .map_err(csv_error)?;
        }
        out.push((format!("plot_{}_{curve}.csv", report.experiment), csv_string(w)?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SweepJson<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    report: &'a SweepReport,
}

pub fn sweep_json(report: &SweepReport, provenance: &Provenance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SweepJson { provenance, report })? + "\n")
}

pub fn importance_csv(report: &ImportanceReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p_in", "p_out", "delta", "rank", "feature", "importance"])
        .map_err(csv_error)?;
    for e in &report.entries {
        for (rank, f) in e.ranking.iter().enumerate() {
            w.write_record([
                decimal::format(e.p_in),
                decimal::format(e.p_out),
                decimal::format(e.delta),
                (rank + 1).to_string(),
                f.name.clone(),
                decimal::format(f.importance),
            ])
            .map_err(csv_error)?;
        }
    }
    csv_string(w)
}

/// Concentration curve: smallest k reaching the cumulative importance
/// level, per δ.
pub fn concentration_csv(report: &ImportanceReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["delta", "concentration_k"]).map_err(csv_error)?;
    for e in &report.entries {
        w.write_record([decimal::format(e.delta), e.concentration_k.to_string()])
            .map_err(csv_error)?;
    }
    csv_string(w)
}

#[derive(Serialize)]
struct ImportanceJson<'a> {
    provenance: &'a Provenance,
    concentration_level: f64,
    #[serde(flatten)]
    report: &'a ImportanceReport,
}

pub fn importance_json(report: &ImportanceReport, provenance: &Provenance) -> Result<String> {
    let doc = ImportanceJson {
        provenance,
        concentration_level: crate::experiments::CONCENTRATION_LEVEL,
        report,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

// ---------------------------------------------------------------------------
// Output sets

/// Files produced by one command, written together. If any write fails the
/// files already written by this set are removed.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((path.into(), contents.into()));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written: Vec<PathBuf> = Vec::new();
        for (path, bytes) in &self.files {
            let result = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map_or(Ok(()), fs::create_dir_all)
                .and_then(|_| fs::write(path, bytes));
            if let Err(e) = result {
                for done in &written {
                    let _ = fs::remove_file(done);
                }
                let _ = fs::remove_file(path);
                return Err(Error::io(path, e));
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}
