//! Grid-driven experiments: δ-sweeps against the detectability threshold,
//! importance reports, feature-subset retraining, rewiring robustness,
//! parameter aggregation and size transfer.
//!
//! Probabilities on the grid are handled as integer thousandths so that
//! matched-density pairing and δ are exact. Every instance is identified by
//! its model parameters, the experiment root seed, an instance index and an
//! optional rewiring fraction; its features are a pure function of that
//! identity and are cached in a [`FeatureStore`] shared between runs.

use std::collections::HashMap;
use std::ops::Range;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{featurize, slot, FeatureSubset, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::forest::{evaluate_accuracy, fit_forest, top_k_features, Dataset, Forest, ForestConfig};
use crate::forest::{Label, Sample, SampleMeta};
use crate::generators::{rewire_uniform, ErParams, ModelParams, SbmParams};
use crate::graph::Graph;
use crate::seed::{derive_root, tag, Seed};

/// Grid resolution in thousandths.
pub const GRID_STEP: u32 = 5;
const ER_RANGE: Range<u32> = 10..91;
const P_IN_RANGE: Range<u32> = 10..191;
const P_OUT_RANGE: Range<u32> = 10..91;

/// Cumulative importance the concentration summary must reach.
pub const CONCENTRATION_LEVEL: f64 = 0.90;

/// Detectability threshold `sqrt(2 (p_in + p_out) / n)`.
pub fn delta_star(p_in: f64, p_out: f64, n: usize) -> f64 {
    (2.0 * (p_in + p_out) / n as f64).sqrt()
}

fn milli(x: f64, what: &str) -> Result<u32> {
    let scaled = x * 1000.0;
    let m = scaled.round();
    if !x.is_finite() || m < 0.0 || (scaled - m).abs() > 1e-6 || m as u32 % GRID_STEP != 0 {
        return Err(Error::invalid(format!(
            "{what} = {x} is not on the {:.3} grid",
            GRID_STEP as f64 / 1000.0
        )));
    }
    Ok(m as u32)
}

fn prob(m: u32) -> f64 {
    m as f64 / 1000.0
}

fn check_range(m: u32, range: Range<u32>, what: &str) -> Result<()> {
    if !range.contains(&m) {
        return Err(Error::invalid(format!(
            "{what} = {} outside the grid range [{}, {}]",
            prob(m),
            prob(range.start),
            prob(range.end - 1)
        )));
    }
    Ok(())
}

/// One matched-density (ER, SBM) pairing on the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridPoint {
    n: usize,
    p_in: u32,
    p_out: u32,
}

impl GridPoint {
    /// A grid pair with `p_in > p_out` whose density bucket lies on the ER
    /// grid.
    pub fn new(n: usize, p_in: f64, p_out: f64) -> Result<Self> {
        let (a, b) = (milli(p_in, "p_in")?, milli(p_out, "p_out")?);
        check_range(a, P_IN_RANGE, "p_in")?;
        check_range(b, P_OUT_RANGE, "p_out")?;
        if a <= b {
            return Err(Error::invalid(format!(
                "p_in = {p_in} must exceed p_out = {p_out}"
            )));
        }
        if (a + b) % (2 * GRID_STEP) != 0 {
            return Err(Error::invalid(format!(
                "density bucket ({p_in} + {p_out}) / 2 is off the ER grid"
            )));
        }
        check_range((a + b) / 2, ER_RANGE, "density")?;
        Self::checked_n(n)?;
        Ok(GridPoint { n, p_in: a, p_out: b })
    }

    /// Diagnostic point with `p_in = p_out = p`: both generators then have
    /// the same distribution.
    pub fn null(n: usize, p: f64) -> Result<Self> {
        let m = milli(p, "p")?;
        check_range(m, ER_RANGE, "p")?;
        Self::checked_n(n)?;
        Ok(GridPoint { n, p_in: m, p_out: m })
    }

    fn checked_n(n: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::invalid(format!("n = {n} must be at least 3")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn with_n(self, n: usize) -> Result<Self> {
        Self::checked_n(n)?;
        Ok(GridPoint { n, ..self })
    }

    pub fn p_in(&self) -> f64 {
        prob(self.p_in)
    }

    pub fn p_out(&self) -> f64 {
        prob(self.p_out)
    }

    /// Density bucket `(p_in + p_out) / 2`, which is also the ER `p`.
    pub fn density(&self) -> f64 {
        prob((self.p_in + self.p_out) / 2)
    }

    pub fn delta(&self) -> f64 {
        prob(self.p_in - self.p_out)
    }

    pub fn delta_star(&self) -> f64 {
        delta_star_milli(self.p_in + self.p_out, self.n)
    }

    pub fn is_null(&self) -> bool {
        self.p_in == self.p_out
    }

    pub fn er(&self) -> ModelParams {
        ModelParams::Er(ErParams {
            n: self.n,
            p: self.density(),
        })
    }

    pub fn sbm(&self) -> ModelParams {
        ModelParams::Sbm(SbmParams {
            n: self.n,
            k: 2,
            p_in: self.p_in(),
            p_out: self.p_out(),
        })
    }

    pub fn model(&self, label: Label) -> ModelParams {
        match label {
            Label::Er => self.er(),
            Label::Sbm => self.sbm(),
        }
    }
}

fn delta_star_milli(sum: u32, n: usize) -> f64 {
    delta_star(prob(sum), 0.0, n)
}

/// Every grid pair at the given density bucket, in ascending δ.
pub fn grid_pairs(n: usize, density: f64) -> Result<Vec<GridPoint>> {
    let d = milli(density, "density")?;
    check_range(d, ER_RANGE, "density")?;
    let mut out = Vec::new();
    for p_out in P_OUT_RANGE.rev().step_by(GRID_STEP as usize) {
        if p_out % GRID_STEP != 0 || 2 * d <= 2 * p_out {
            continue;
        }
        let p_in = 2 * d - p_out;
        if P_IN_RANGE.contains(&p_in) {
            out.push(GridPoint { n, p_in, p_out });
        }
    }
    GridPoint::checked_n(n)?;
    Ok(out)
}

/// Grid rows an experiment runs over: a density bucket and optionally a
/// subset of its δ values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
}

impl SweepGrid {
    pub fn full(density: f64) -> Self {
        SweepGrid {
            density,
            deltas: None,
        }
    }

    pub fn points(&self, n: usize) -> Result<Vec<GridPoint>> {
        let all = grid_pairs(n, self.density)?;
        let Some(deltas) = &self.deltas else {
            return Ok(all);
        };
        let mut wanted = Vec::with_capacity(deltas.len());
        for &d in deltas {
            let m = milli(d, "delta")?;
            let found = all.iter().find(|p| p.p_in - p.p_out == m).ok_or_else(|| {
                Error::invalid(format!(
                    "delta = {d} has no grid pair at density {}",
                    self.density
                ))
            })?;
            wanted.push(*found);
        }
        wanted.sort_by_key(|p| p.p_in);
        wanted.dedup();
        Ok(wanted)
    }
}

/// Betweenness (min, max), closeness and clustering (all four), triangle
/// count and ASPL (max, avg, std).
pub const CRITICAL_FEATURES: [usize; 16] = [
    slot::BETWEENNESS + slot::MIN,
    slot::BETWEENNESS + slot::MAX,
    slot::CLOSENESS + slot::MIN,
    slot::CLOSENESS + slot::MAX,
    slot::CLOSENESS + slot::AVG,
    slot::CLOSENESS + slot::STD,
    slot::CLUSTERING + slot::MIN,
    slot::CLUSTERING + slot::MAX,
    slot::CLUSTERING + slot::AVG,
    slot::CLUSTERING + slot::STD,
    slot::TRIANGLES + slot::MAX,
    slot::TRIANGLES + slot::AVG,
    slot::TRIANGLES + slot::STD,
    slot::ASPL + slot::MAX,
    slot::ASPL + slot::AVG,
    slot::ASPL + slot::STD,
];

pub fn critical_features() -> FeatureSubset {
    FeatureSubset::new(CRITICAL_FEATURES.to_vec()).expect("critical set is valid")
}

/// Which feature columns a forest is trained on.
///
/// Serialized as `"all"`, `"critical"`, `"top<k>"` or a list of feature
/// names.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SubsetRepr", into = "SubsetRepr")]
pub enum SubsetSpec {
    All,
    /// The `k` most important features of the same point's all-feature
    /// forest.
    Top(usize),
    Critical,
    Explicit(FeatureSubset),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SubsetRepr {
    Name(String),
    Features(Vec<String>),
}

impl TryFrom<SubsetRepr> for SubsetSpec {
    type Error = Error;

    fn try_from(r: SubsetRepr) -> Result<Self> {
        match r {
            SubsetRepr::Name(s) => s.parse(),
            SubsetRepr::Features(names) => SubsetSpec::from_names(&names),
        }
    }
}

impl From<SubsetSpec> for SubsetRepr {
    fn from(s: SubsetSpec) -> Self {
        match s {
            SubsetSpec::Explicit(f) => {
                SubsetRepr::Features(f.names().into_iter().map(String::from).collect())
            }
            other => SubsetRepr::Name(other.id()),
        }
    }
}

impl FromStr for SubsetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(SubsetSpec::All),
            "critical" => Ok(SubsetSpec::Critical),
            _ => {
                if let Some(k) = s.strip_prefix("top") {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad subset `{s}`")))?;
                    if k == 0 || k > FEATURE_COUNT {
                        return Err(Error::invalid(format!(
                            "subset `{s}`: k outside 1..={FEATURE_COUNT}"
                        )));
                    }
                    return Ok(SubsetSpec::Top(k));
                }
                let names: Vec<String> = s.split(',').map(|t| t.trim().to_string()).collect();
                SubsetSpec::from_names(&names)
            }
        }
    }
}

impl SubsetSpec {
    pub fn from_names(names: &[String]) -> Result<Self> {
        let indices = names
            .iter()
            .map(|name| {
                FEATURE_NAMES
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| Error::invalid(format!("unknown feature `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SubsetSpec::Explicit(FeatureSubset::new(indices)?))
    }

    /// Short identifier used in report rows and file names.
    pub fn id(&self) -> String {
        match self {
            SubsetSpec::All => "all".into(),
            SubsetSpec::Top(k) => format!("top{k}"),
            SubsetSpec::Critical => "critical".into(),
            SubsetSpec::Explicit(f) => f.names().join("+"),
        }
    }

    /// Concrete columns, given the all-feature importances at the point.
    pub fn resolve(&self, importances: &[f64]) -> Result<FeatureSubset> {
        match self {
            SubsetSpec::All => Ok(FeatureSubset::all()),
            SubsetSpec::Top(k) => top_k_features(importances, *k),
            SubsetSpec::Critical => Ok(critical_features()),
            SubsetSpec::Explicit(f) => Ok(f.clone()),
        }
    }
}

/// Ensemble sizes, seeds and per-run conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n: usize,
    /// Instances per model per grid point.
    pub instances: usize,
    /// Leading instance indices used for training; the rest are test.
    pub train: usize,
    pub root_seed: u64,
    /// Rewiring applied to test graphs by [`Experiment::run_point`].
    pub rewire_fraction: f64,
    /// Columns used by [`Experiment::run_point`].
    pub subset: SubsetSpec,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n: 1000,
            instances: 100,
            train: 66,
            root_seed: 0,
            rewire_fraction: 0.0,
            subset: SubsetSpec::All,
        }
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        GridPoint::checked_n(self.n)?;
        if self.train == 0 || self.train >= self.instances {
            return Err(Error::invalid(format!(
                "train = {} must lie in 1..{}",
                self.train, self.instances
            )));
        }
        if !(0.0..=1.0).contains(&self.rewire_fraction) {
            return Err(Error::invalid(format!(
                "rewire fraction {} outside [0, 1]",
                self.rewire_fraction
            )));
        }
        Ok(())
    }

    pub fn train_indices(&self) -> Range<u64> {
        0..self.train as u64
    }

    pub fn test_indices(&self) -> Range<u64> {
        self.train as u64..self.instances as u64
    }
}

/// Seed of instance `index` of a model population.
pub fn instance_seed(model: &ModelParams, root: u64, index: u64) -> Seed {
    Seed::new(model.population_root(root), index)
}

/// Seed of the rewiring pass applied to instance `index`.
pub fn rewire_seed(model: &ModelParams, root: u64, fraction: f64, index: u64) -> Seed {
    let r = derive_root(model.population_root(root), &[tag("rewire"), fraction.to_bits()]);
    Seed::new(r, index)
}

/// The graph behind one instance identity.
pub fn instance_graph(model: &ModelParams, root: u64, index: u64, rewire: f64) -> Result<Graph> {
    let g = model.generate(instance_seed(model, root, index))?;
    if rewire == 0.0 {
        return Ok(g);
    }
    Ok(rewire_uniform(&g, rewire, rewire_seed(model, root, rewire, index))?.graph)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct InstanceKey {
    label: Label,
    n: usize,
    k: usize,
    a: u64,
    b: u64,
    root: u64,
    index: u64,
    rewire: u64,
}

impl InstanceKey {
    fn new(model: &ModelParams, root: u64, index: u64, rewire: f64) -> Self {
        let (k, a, b) = match model {
            ModelParams::Er(p) => (0, p.p.to_bits(), 0),
            ModelParams::Sbm(p) => (p.k, p.p_in.to_bits(), p.p_out.to_bits()),
        };
        InstanceKey {
            label: model.label(),
            n: model.n(),
            k,
            a,
            b,
            root,
            index,
            rewire: rewire.to_bits(),
        }
    }
}

type Cell = Arc<OnceLock<Result<FeatureVector, String>>>;

/// Thread-safe memo of instance features. Each instance is featurized at
/// most once even when requested concurrently.
#[derive(Debug, Default)]
pub struct FeatureStore {
    cells: Mutex<HashMap<InstanceKey, Cell>>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn features(
        &self,
        model: &ModelParams,
        root: u64,
        index: u64,
        rewire: f64,
    ) -> Result<FeatureVector> {
        let key = InstanceKey::new(model, root, index, rewire);
        let cell = {
            let mut cells = self.cells.lock().expect("feature store poisoned");
            cells.entry(key).or_default().clone()
        };
        cell.get_or_init(|| {
            instance_graph(model, root, index, rewire)
                .and_then(|g| featurize(&g))
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::InvalidInput)
    }

    /// Number of instances featurized or in progress.
    pub fn len(&self) -> usize {
        self.cells.lock().expect("feature store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One curve sample: a grid point evaluated under one subset and one test
/// condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub density: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub delta: f64,
    pub delta_star: f64,
    /// Exact expected density of the SBM at this point.
    pub sbm_density: f64,
    pub subset: String,
    pub rewire_fraction: f64,
    pub epsilon: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub seed: u64,
}

impl SweepRow {
    /// Name of the curve this row belongs to.
    pub fn curve(&self) -> String {
        let mut name = self.subset.clone();
        if self.rewire_fraction != 0.0 {
            name.push_str(&format!("_rewire{}", self.rewire_fraction));
        }
        if let Some(e) = self.epsilon {
            name.push_str(&format!("_eps{e}"));
        }
        if self.n_test != self.n_train {
            name.push_str(&format!("_n{}", self.n_test));
        }
        name
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub experiment: String,
    pub rows: Vec<SweepRow>,
    pub train_indices: Range<u64>,
    pub test_indices: Range<u64>,
    pub notes: Vec<String>,
}

impl SweepReport {
    /// Curves in order of first appearance, each in ascending δ.
    pub fn curves(&self) -> Vec<(String, Vec<&SweepRow>)> {
        let mut out: Vec<(String, Vec<&SweepRow>)> = Vec::new();
        for row in &self.rows {
            let name = row.curve();
            match out.iter_mut().find(|(c, _)| *c == name) {
                Some((_, rows)) => rows.push(row),
                None => out.push((name, vec![row])),
            }
        }
        for (_, rows) in &mut out {
            rows.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        }
        out
    }

    pub fn curve(&self, name: &str) -> Vec<&SweepRow> {
        self.curves()
            .into_iter()
            .find(|(c, _)| c == name)
            .map(|(_, rows)| rows)
            .unwrap_or_default()
    }
}

/// Mean accuracy of a set of rows; NaN when empty.
pub fn mean_accuracy<'a>(rows: impl IntoIterator<Item = &'a SweepRow>) -> f64 {
    let (sum, count) = rows
        .into_iter()
        .fold((0.0, 0usize), |(s, c), r| (s + r.accuracy, c + 1));
    sum / count as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub importance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub p_in: f64,
    pub p_out: f64,
    pub delta: f64,
    /// Descending importance; ties keep canonical feature order.
    pub ranking: Vec<RankedFeature>,
    /// Smallest k whose top-k importances reach [`CONCENTRATION_LEVEL`].
    pub concentration_k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub density: f64,
    pub entries: Vec<ImportanceEntry>,
}

/// Descending ranking plus the concentration summary.
pub fn rank_importances(names: &[String], importances: &[f64]) -> (Vec<RankedFeature>, usize) {
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    let ranking: Vec<RankedFeature> = order
        .iter()
        .map(|&i| RankedFeature {
            name: names[i].clone(),
            importance: importances[i],
        })
        .collect();
    let mut cumulative = 0.0;
    let mut k = ranking.len();
    for (i, r) in ranking.iter().enumerate() {
        cumulative += r.importance;
        // Slack for rounding in sums such as 0.6 + 0.3.
        if cumulative >= CONCENTRATION_LEVEL - 1e-12 {
            k = i + 1;
            break;
        }
    }
    (ranking, k)
}

/// Result of a single [`Experiment::run_point`].
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub point: GridPoint,
    pub features: FeatureSubset,
    pub accuracy: f64,
    pub forest: Forest,
}

impl PointOutcome {
    pub fn importances(&self) -> &[f64] {
        self.forest.importances()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Condition {
    n_test: usize,
    rewire: f64,
}

struct Evaluated {
    subset: String,
    condition: Condition,
    accuracy: f64,
}

const NOTE_CRITICAL: &str = "critical subset carries 16 features: betweenness min/max, closeness min/max/avg/std, clustering min/max/avg/std, triangles max/avg/std, aspl max/avg/std";
const NOTE_REWIRE: &str =
    "rewiring is applied to the test instances of both models; training instances are pure";
const NOTE_AGGREGATE: &str = "aggregation: SBM training rows are drawn uniformly, without replacement, from the training instances of every grid pair with the same density bucket, p_in > p_out and |p_in' - p_in| <= epsilon; the SBM training size is kept fixed; ER training and all test rows are unchanged";

/// Runs experiments for one ensemble spec and forest configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: EnsembleSpec,
    pub forest: ForestConfig,
    store: Arc<FeatureStore>,
}

impl Experiment {
    pub fn new(spec: EnsembleSpec, forest: ForestConfig) -> Result<Self> {
        Self::with_store(spec, forest, Arc::new(FeatureStore::new()))
    }

    /// Shares cached features with other experiments.
    pub fn with_store(
        spec: EnsembleSpec,
        forest: ForestConfig,
        store: Arc<FeatureStore>,
    ) -> Result<Self> {
        spec.validate()?;
        forest.validate(FEATURE_COUNT)?;
        Ok(Experiment {
            spec,
            forest,
            store,
        })
    }

    pub fn store(&self) -> &Arc<FeatureStore> {
        &self.store
    }

    /// Forest configuration used at a point; every subset and condition at
    /// the point shares it.
    pub fn point_forest_config(&self, point: &GridPoint) -> ForestConfig {
        ForestConfig {
            seed: derive_root(
                self.forest.seed,
                &[self.spec.root_seed, point.p_in().to_bits(), point.p_out().to_bits()],
            ),
            ..self.forest.clone()
        }
    }

    fn sample(&self, model: &ModelParams, index: u64, rewire: f64) -> Result<Sample> {
        let root = self.spec.root_seed;
        let features = self.store.features(model, root, index, rewire)?;
        let meta = match model {
            ModelParams::Er(p) => SampleMeta {
                n: p.n,
                p: Some(p.p),
                p_in: None,
                p_out: None,
                rewire_fraction: rewire,
                seed: Some(instance_seed(model, root, index)),
            },
            ModelParams::Sbm(p) => SampleMeta {
                n: p.n,
                p: None,
                p_in: Some(p.p_in),
                p_out: Some(p.p_out),
                rewire_fraction: rewire,
                seed: Some(instance_seed(model, root, index)),
            },
        };
        Ok(Sample {
            features: features.0.to_vec(),
            label: model.label(),
            meta,
        })
    }

    fn dataset(&self, items: Vec<(ModelParams, u64, f64)>) -> Result<Dataset> {
        let samples: Vec<Sample> = items
            .par_iter()
            .map(|(m, i, r)| self.sample(m, *i, *r))
            .collect::<Result<_>>()?;
        let mut d = Dataset::with_features(&FEATURE_NAMES);
        for s in samples {
            d.push(s)?;
        }
        Ok(d)
    }

    /// Pure training rows: ER then SBM, each in index order.
    fn train_set(&self, point: &GridPoint, sbm: Vec<(ModelParams, u64)>) -> Result<Dataset> {
        let er = point.er();
        let mut items: Vec<_> = self.spec.train_indices().map(|i| (er, i, 0.0)).collect();
        items.extend(sbm.into_iter().map(|(m, i)| (m, i, 0.0)));
        self.dataset(items)
    }

    fn own_sbm(&self, point: &GridPoint) -> Vec<(ModelParams, u64)> {
        let sbm = point.sbm();
        self.spec.train_indices().map(|i| (sbm, i)).collect()
    }

    fn test_set(&self, point: &GridPoint, c: Condition) -> Result<Dataset> {
        let at = point.with_n(c.n_test)?;
        let mut items = Vec::new();
        for label in Label::ALL {
            let model = at.model(label);
            items.extend(self.spec.test_indices().map(|i| (model, i, c.rewire)));
        }
        self.dataset(items)
    }

    fn evaluate(
        &self,
        point: &GridPoint,
        train: &Dataset,
        subsets: &[SubsetSpec],
        conditions: &[Condition],
    ) -> Result<Vec<Evaluated>> {
        let config = self.point_forest_config(point);
        let all = fit_forest(train, &config)?;
        let tests = conditions
            .iter()
            .map(|&c| self.test_set(point, c))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for subset in subsets {
            let columns = subset.resolve(all.importances())?;
            let fitted;
            let forest = if columns == FeatureSubset::all() {
                &all
            } else {
                fitted = fit_forest(&train.project(&columns)?, &config)?;
                &fitted
            };
            for (c, test) in conditions.iter().zip(&tests) {
                out.push(Evaluated {
                    subset: subset.id(),
                    condition: *c,
                    accuracy: evaluate_accuracy(forest, &test.project(&columns)?)?,
                });
            }
        }
        Ok(out)
    }

    fn row(&self, point: &GridPoint, e: &Evaluated, epsilon: Option<f64>) -> SweepRow {
        let sbm_density = match point.sbm() {
            ModelParams::Sbm(p) => p.expected_density(),
            ModelParams::Er(_) => unreachable!(),
        };
        SweepRow {
            density: point.density(),
            p_in: point.p_in(),
            p_out: point.p_out(),
            delta: point.delta(),
            delta_star: delta_star_milli(point.p_in + point.p_out, e.condition.n_test),
            sbm_density,
            subset: e.subset.clone(),
            rewire_fraction: e.condition.rewire,
            epsilon,
            n_train: point.n,
            n_test: e.condition.n_test,
            accuracy: e.accuracy,
            seed: self.spec.root_seed,
        }
    }

    fn report(&self, experiment: &str, rows: Vec<SweepRow>, mut notes: Vec<String>) -> SweepReport {
        if rows.iter().any(|r| r.subset == "critical") {
            notes.insert(0, NOTE_CRITICAL.to_string());
        }
        SweepReport {
            experiment: experiment.to_string(),
            rows,
            train_indices: self.spec.train_indices(),
            test_indices: self.spec.test_indices(),
            notes,
        }
    }

    fn sweep_with(
        &self,
        grid: &SweepGrid,
        subsets: &[SubsetSpec],
        conditions: &[Condition],
    ) -> Result<Vec<SweepRow>> {
        let points = grid.points(self.spec.n)?;
        let per_point = points
            .par_iter()
            .map(|pt| {
                let train = self.train_set(pt, self.own_sbm(pt))?;
                let evals = self.evaluate(pt, &train, subsets, conditions)?;
                Ok(evals.iter().map(|e| self.row(pt, e, None)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(per_point.into_iter().flatten().collect())
    }

    fn pure(&self) -> Condition {
        Condition {
            n_test: self.spec.n,
            rewire: 0.0,
        }
    }

    /// Trains on pure instances and evaluates one point under the spec's
    /// subset and test-time rewiring.
    pub fn run_point(&self, point: &GridPoint) -> Result<PointOutcome> {
        let point = point.with_n(self.spec.n)?;
        let config = self.point_forest_config(&point);
        let train = self.train_set(&point, self.own_sbm(&point))?;
        let columns = match &self.spec.subset {
            SubsetSpec::Top(_) => self.spec.subset.resolve(fit_forest(&train, &config)?.importances())?,
            other => other.resolve(&[])?,
        };
        let forest = fit_forest(&train.project(&columns)?, &config)?;
        let cond = Condition {
            rewire: self.spec.rewire_fraction,
            ..self.pure()
        };
        let test = self.test_set(&point, cond)?.project(&columns)?;
        Ok(PointOutcome {
            point,
            features: columns,
            accuracy: evaluate_accuracy(&forest, &test)?,
            forest,
        })
    }

    /// One accuracy curve per subset over the grid's δ points.
    pub fn run_delta_sweep(&self, grid: &SweepGrid, subsets: &[SubsetSpec]) -> Result<SweepReport> {
        let rows = self.sweep_with(grid, subsets, &[self.pure()])?;
        Ok(self.report("sweep", rows, Vec::new()))
    }

    pub fn run_importance_report(&self, grid: &SweepGrid) -> Result<ImportanceReport> {
        let points = grid.points(self.spec.n)?;
        let entries = points
            .par_iter()
            .map(|pt| {
                let train = self.train_set(pt, self.own_sbm(pt))?;
                let forest = fit_forest(&train, &self.point_forest_config(pt))?;
                let (ranking, concentration_k) =
                    rank_importances(forest.feature_names(), forest.importances());
                Ok(ImportanceEntry {
                    p_in: pt.p_in(),
                    p_out: pt.p_out(),
                    delta: pt.delta(),
                    ranking,
                    concentration_k,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ImportanceReport {
            density: grid.density,
            entries,
        })
    }

    /// Pure-trained forests tested on rewired instances. The pure curve is
    /// always included.
    pub fn run_rewire_experiment(
        &self,
        grid: &SweepGrid,
        fractions: &[f64],
        subsets: &[SubsetSpec],
    ) -> Result<SweepReport> {
        let mut conditions = vec![self.pure()];
        for &f in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("rewire fraction {f} outside [0, 1]")));
            }
            let c = Condition { rewire: f, ..self.pure() };
            if !conditions.contains(&c) {
                conditions.push(c);
            }
        }
        let rows = self.sweep_with(grid, subsets, &conditions)?;
        Ok(self.report("rewire", rows, vec![NOTE_REWIRE.to_string()]))
    }

    /// SBM training rows pooled over nearby grid pairs; `epsilon = 0` is
    /// the plain sweep. The unpooled curve is always included.
    pub fn run_aggregation_experiment(
        &self,
        grid: &SweepGrid,
        epsilons: &[f64],
        subsets: &[SubsetSpec],
    ) -> Result<SweepReport> {
        let mut eps = vec![0];
        for &e in epsilons {
            let m = milli(e, "epsilon")?;
            if !eps.contains(&m) {
                eps.push(m);
            }
        }
        let pairs = grid_pairs(self.spec.n, grid.density)?;
        let targets = grid.points(self.spec.n)?;
        let jobs: Vec<(u32, GridPoint)> = eps
            .iter()
            .flat_map(|&e| targets.iter().map(move |t| (e, *t)))
            .collect();
        let per_job = jobs
            .par_iter()
            .map(|(e, pt)| {
                let sbm = self.pooled_sbm(pt, &pairs, *e);
                let train = self.train_set(pt, sbm)?;
                let evals = self.evaluate(pt, &train, subsets, &[self.pure()])?;
                Ok(evals
                    .iter()
                    .map(|ev| self.row(pt, ev, Some(prob(*e))))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = per_job.into_iter().flatten().collect();
        Ok(self.report("aggregate", rows, vec![NOTE_AGGREGATE.to_string()]))
    }

    /// Training SBM instances for `target` when parameters are only known
    /// to within `eps` thousandths of `p_in`.
    fn pooled_sbm(&self, target: &GridPoint, pairs: &[GridPoint], eps: u32) -> Vec<(ModelParams, u64)> {
        let mut pool: Vec<(ModelParams, u64)> = Vec::new();
        for pair in pairs.iter().filter(|p| p.p_in.abs_diff(target.p_in) <= eps) {
            let sbm = pair.sbm();
            pool.extend(self.spec.train_indices().map(|i| (sbm, i)));
        }
        let seed = Seed::new(
            derive_root(
                self.spec.root_seed,
                &[tag("aggregate"), eps as u64, target.p_in as u64, target.p_out as u64],
            ),
            0,
        );
        let mut chosen = index::sample(&mut seed.rng(), pool.len(), self.spec.train).into_vec();
        chosen.sort_unstable();
        chosen.into_iter().map(|i| pool[i]).collect()
    }

    /// Forests fit at the spec's `n`, tested at `n_test` with the same
    /// probabilities. The matched-size curve is always included.
    pub fn run_size_transfer(
        &self,
        grid: &SweepGrid,
        n_test: usize,
        subsets: &[SubsetSpec],
    ) -> Result<SweepReport> {
        GridPoint::checked_n(n_test)?;
        let mut conditions = vec![self.pure()];
        if n_test != self.spec.n {
            conditions.push(Condition { n_test, rewire: 0.0 });
        }
        let rows = self.sweep_with(grid, subsets, &conditions)?;
        Ok(self.report("size", rows, Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        assert!((delta_star(0.12, 0.04, 1000) - 0.00032f64.sqrt()).abs() < 1e-15);
        assert!((delta_star(0.12, 0.04, 1000) - 0.0178885).abs() < 1e-7);
        assert_eq!(delta_star(0.0, 0.0, 10), 0.0);
        let ratio = delta_star(0.12, 0.04, 1000) / delta_star(0.12, 0.04, 4000);
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn density_08_has_fourteen_pairs() {
        let pts = grid_pairs(1000, 0.08).unwrap();
        assert_eq!(pts.len(), 14);
        let deltas: Vec<u32> = pts.iter().map(|p| p.p_in - p.p_out).collect();
        assert_eq!(deltas, (1..=14).map(|i| 10 * i).collect::<Vec<_>>());
        assert_eq!(pts[0].p_in(), 0.085);
        assert_eq!(pts[13].p_in(), 0.15);
        for p in &pts {
            assert_eq!(p.density(), 0.08);
            assert!((p.delta_star() - 0.0178885).abs() < 1e-7);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridPoint::new(1000, 0.12, 0.04).is_ok());
        assert!(GridPoint::new(1000, 0.04, 0.12).is_err());
        assert!(GridPoint::new(1000, 0.12, 0.035).is_err());
        assert!(GridPoint::new(1000, 0.121, 0.04).is_err());
        assert!(GridPoint::new(1000, 0.2, 0.04).is_err());
        assert!(grid_pairs(1000, 0.0825).is_err());
        assert!(grid_pairs(1000, 0.1).is_err());
        let null = GridPoint::null(1000, 0.08).unwrap();
        assert!(null.is_null() && null.delta() == 0.0);
    }

    #[test]
    fn grid_edges_of_table() {
        // Low densities are limited by p_out >= .01, high ones by p_out <= .09.
        assert!(grid_pairs(1000, 0.01).unwrap().is_empty());
        assert_eq!(grid_pairs(1000, 0.015).unwrap().len(), 1);
        let top = grid_pairs(1000, 0.09).unwrap();
        assert_eq!(top.first().unwrap().p_out(), 0.085);
        assert_eq!(top.last().unwrap().p_out(), 0.01);
    }

    #[test]
    fn reduced_grid_selection() {
        let grid = SweepGrid {
            density: 0.08,
            deltas: Some(vec![0.14, 0.01, 0.05]),
        };
        let pts = grid.points(1000).unwrap();
        let d: Vec<f64> = pts.iter().map(|p| p.delta()).collect();
        assert_eq!(d, vec![0.01, 0.05, 0.14]);
        let bad = SweepGrid {
            density: 0.08,
            deltas: Some(vec![0.015]),
        };
        assert!(bad.points(1000).is_err());
    }

    #[test]
    fn critical_set_is_sixteen_distinct() {
        let c = critical_features();
        assert_eq!(c.len(), 16);
        assert!(c.names().contains(&"aspl_std"));
        assert!(!c.names().contains(&"triangles_min"));
    }

    #[test]
    fn subset_spec_round_trip() {
        for s in ["\"all\"", "\"top15\"", "\"critical\"", "[\"degree_max\",\"diameter\"]"] {
            let spec: SubsetSpec = serde_json::from_str(s).unwrap();
            assert_eq!(serde_json::to_string(&spec).unwrap().replace(' ', ""), s);
        }
        assert!(serde_json::from_str::<SubsetSpec>("\"top0\"").is_err());
        assert!(serde_json::from_str::<SubsetSpec>("\"nonsense\"").is_err());
        assert_eq!("top10".parse::<SubsetSpec>().unwrap(), SubsetSpec::Top(10));
    }

    #[test]
    fn ranking_and_concentration() {
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let (r, k) = rank_importances(&names, &[0.05, 0.6, 0.05, 0.3]);
        let order: Vec<&str> = r.iter().map(|x| x.name.as_str()).collect();
        assert_eq!(order, ["b", "d", "a", "c"]);
        assert_eq!(k, 2);
        let (_, k) = rank_importances(&names, &[0.25; 4]);
        assert_eq!(k, 4);
    }

    fn small() -> Experiment {
        let spec = EnsembleSpec {
            n: 60,
            instances: 12,
            train: 8,
            root_seed: 5,
            ..EnsembleSpec::default()
        };
        let forest = ForestConfig {
            n_trees: 15,
            ..ForestConfig::default()
        };
        Experiment::new(spec, forest).unwrap()
    }

    fn small_grid() -> SweepGrid {
        SweepGrid {
            density: 0.08,
            deltas: Some(vec![0.02, 0.14]),
        }
    }

    #[test]
    fn train_and_test_seeds_are_disjoint() {
        let e = small();
        let pt = GridPoint::new(60, 0.15, 0.01).unwrap();
        let train = e.train_set(&pt, e.own_sbm(&pt)).unwrap();
        let test = e.test_set(&pt, e.pure()).unwrap();
        assert_eq!(train.class_counts(), [8, 8]);
        assert_eq!(test.class_counts(), [4, 4]);
        for a in train.rows() {
            for b in test.rows() {
                assert_ne!(a.meta.seed, b.meta.seed);
            }
        }
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let e = small();
        let report = e
            .run_delta_sweep(&small_grid(), &[SubsetSpec::All, SubsetSpec::Top(5)])
            .unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.curves().len(), 2);
        for r in &report.rows {
            assert!(r.delta > 0.0 && (0.0..=1.0).contains(&r.accuracy));
            assert_eq!(r.density, (r.p_in + r.p_out) / 2.0);
            let d = delta_star(r.p_in, r.p_out, r.n_test);
            assert!((d - r.delta_star).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_conditions_reproduce_the_sweep() {
        let e = small();
        let grid = small_grid();
        let sweep = e.run_delta_sweep(&grid, &[SubsetSpec::All]).unwrap();
        let rewire = e.run_rewire_experiment(&grid, &[0.0, 0.2], &[SubsetSpec::All]).unwrap();
        let agg = e.run_aggregation_experiment(&grid, &[0.0], &[SubsetSpec::All]).unwrap();
        let size = e.run_size_transfer(&grid, 60, &[SubsetSpec::All]).unwrap();
        let acc = |rows: Vec<&SweepRow>| rows.iter().map(|r| r.accuracy).collect::<Vec<_>>();
        let base = acc(sweep.curve("all"));
        assert_eq!(acc(rewire.curve("all")), base);
        assert_eq!(acc(agg.curve("all_eps0")), base);
        assert_eq!(acc(size.curve("all")), base);
        assert_eq!(rewire.curves().len(), 2);
        assert_eq!(size.curves().len(), 1);
    }

    #[test]
    fn pooling_respects_epsilon() {
        let e = small();
        let pairs = grid_pairs(60, 0.08).unwrap();
        let target = GridPoint::new(60, 0.12, 0.04).unwrap();
        let pooled = e.pooled_sbm(&target, &pairs, 20);
        assert_eq!(pooled.len(), 8);
        for (m, i) in &pooled {
            let ModelParams::Sbm(p) = m else { panic!("ER row in SBM pool") };
            assert!((p.p_in - 0.12).abs() <= 0.02 + 1e-12);
            assert_eq!(p.p_in + p.p_out, 0.12 + 0.04);
            assert!(*i < 8);
        }
        assert_eq!(pooled, e.pooled_sbm(&target, &pairs, 20));
        assert_eq!(e.pooled_sbm(&target, &pairs, 0), e.own_sbm(&target));
    }

    #[test]
    fn run_point_and_importances() {
        let mut e = small();
        let pt = GridPoint::new(60, 0.15, 0.01).unwrap();
        let out = e.run_point(&pt).unwrap();
        assert!(out.accuracy >= 0.75, "accuracy {}", out.accuracy);
        let sum: f64 = out.importances().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);

        e.spec.subset = SubsetSpec::Top(4);
        let top = e.run_point(&pt).unwrap();
        assert_eq!(top.features.len(), 4);
        assert_eq!(top.features, top_k_features(out.importances(), 4).unwrap());

        let report = e.run_importance_report(&small_grid()).unwrap();
        for entry in &report.entries {
            let s: f64 = entry.ranking.iter().map(|r| r.importance).sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(entry.ranking.windows(2).all(|w| w[0].importance >= w[1].importance));
        }
        assert_eq!(report, e.run_importance_report(&small_grid()).unwrap());
    }

    #[test]
    fn store_reuses_instances() {
        let e = small();
        e.run_delta_sweep(&small_grid(), &[SubsetSpec::All]).unwrap();
        // 12 shared ER instances plus 12 SBM instances per point.
        assert_eq!(e.store().len(), 12 + 2 * 12);
    }
}
