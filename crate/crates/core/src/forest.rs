//! CART trees with Gini impurity and a bagged random-forest ensemble.
//!
//! Trees split on `value <= threshold`, thresholds sit at midpoints between
//! consecutive distinct values, and every tie is broken deterministically
//! (lower feature index, then lower threshold). Each tree draws its bootstrap
//! and its per-node feature samples from its own stream derived from the
//! forest seed and the tree index, so fitting is schedule independent.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSubset;
use crate::seed::{derive_root, tag, Seed};

/// The two generative models being discriminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Er,
    Sbm,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Er, Label::Sbm];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Er => "er",
            Label::Sbm => "sbm",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "er" => Ok(Label::Er),
            "sbm" => Ok(Label::Sbm),
            other => Err(Error::invalid(format!("unknown model label `{other}`"))),
        }
    }
}

/// Provenance carried alongside each feature row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: usize,
    pub p: Option<f64>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub rewire_fraction: f64,
    pub seed: Option<Seed>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
    pub meta: SampleMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<Sample>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>) -> Self {
        Dataset {
            feature_names,
            rows: Vec::new(),
        }
    }

    pub fn with_features(names: &[&str]) -> Self {
        Self::new(names.iter().map(|s| s.to_string()).collect())
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if sample.features.len() != self.arity() {
            return Err(Error::invalid(format!(
                "row has {} features, dataset expects {}",
                sample.features.len(),
                self.arity()
            )));
        }
        if sample.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("row contains a non-finite feature"));
        }
        self.rows.push(sample);
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Sample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for r in &self.rows {
            c[r.label.index()] += 1;
        }
        c
    }

    /// Keeps only the selected feature columns, in subset order.
    pub fn project(&self, subset: &FeatureSubset) -> Result<Dataset> {
        if let Some(&bad) = subset.indices().iter().find(|&&i| i >= self.arity()) {
            return Err(Error::invalid(format!(
                "subset index {bad} out of range for arity {}",
                self.arity()
            )));
        }
        Ok(Dataset {
            feature_names: subset
                .indices()
                .iter()
                .map(|&i| self.feature_names[i].clone())
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| Sample {
                    features: subset.project(&r.features),
                    label: r.label,
                    meta: r.meta.clone(),
                })
                .collect(),
        })
    }
}

/// Gini impurity `1 - Σ (c_i / total)^2`.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("gini of an empty node"));
    }
    Ok(gini_unchecked(class_counts, total))
}

fn gini_unchecked(counts: &[usize], total: usize) -> f64 {
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let q = c as f64 / t;
            q * q
        })
        .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Parent impurity minus the size-weighted child impurity.
    pub decrease: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

/// Best axis-aligned split of `rows` over `candidates`.
///
/// Returns `None` when the node is pure or no candidate feature takes two
/// distinct values. A split with zero decrease is still returned for impure
/// separable nodes; stacked zero-gain splits are what resolves XOR-like
/// structure.
pub fn best_split(data: &Dataset, rows: &[usize], candidates: &[usize]) -> Option<SplitChoice> {
    if rows.len() < 2 {
        return None;
    }
    let mut parent = [0usize; 2];
    for &r in rows {
        parent[data.rows[r].label.index()] += 1;
    }
    if parent[0] == 0 || parent[1] == 0 {
        return None;
    }
    let total = rows.len();
    let parent_gini = gini_unchecked(&parent, total);

    let mut features = candidates.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<SplitChoice> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(total);
    for &f in &features {
        column.clear();
        column.extend(
            rows.iter()
                .map(|&r| (data.rows[r].features[f], data.rows[r].label.index())),
        );
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = [0usize; 2];
        for i in 0..total - 1 {
            left[column[i].1] += 1;
            let (lo, hi) = (column[i].0, column[i + 1].0);
            if lo == hi {
                continue;
            }
            let nl = i + 1;
            let nr = total - nl;
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let weighted = (nl as f64 * gini_unchecked(&left, nl)
                + nr as f64 * gini_unchecked(&right, nr))
                / total as f64;
            let decrease = (parent_gini - weighted).max(0.0);
            if best.map_or(true, |b| decrease > b.decrease) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    decrease,
                });
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features sampled per split; `None` means `floor(sqrt(arity))`.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            mtry: None,
            max_depth: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, arity: usize) -> Result<usize> {
        let m = self
            .mtry
            .unwrap_or_else(|| ((arity as f64).sqrt().floor() as usize).max(1));
        if m == 0 || m > arity {
            return Err(Error::invalid(format!("mtry {m} outside 1..={arity}")));
        }
        Ok(m)
    }

    pub fn validate(&self, arity: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        self.resolved_mtry(arity)?;
        Ok(())
    }

    /// Random stream owned by tree `index`.
    pub fn tree_seed(&self, index: usize) -> Seed {
        Seed::new(derive_root(self.seed, &[tag("tree")]), index as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        #[serde(with = "crate::decimal::string")]
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_counts(&self, x: &[f64]) -> [usize; 2] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return *counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn proba(&self, x: &[f64]) -> [f64; 2] {
        let c = self.leaf_counts(x);
        let t = (c[0] + c[1]) as f64;
        [c[0] as f64 / t, c[1] as f64 / t]
    }
}

/// A fitted tree plus its unnormalized impurity-decrease importances.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedTree {
    pub root: TreeNode,
    pub importance: Vec<f64>,
}

/// Uniform resample with replacement of `len` row indices.
pub fn bootstrap_indices<R: Rng>(len: usize, rng: &mut R) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(0..len)).collect()
}

struct Grower<'a, R> {
    data: &'a Dataset,
    config: &'a ForestConfig,
    mtry: usize,
    root_size: f64,
    importance: Vec<f64>,
    rng: &'a mut R,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, rows: &[usize], depth: usize) -> TreeNode {
        let mut counts = [0usize; 2];
        for &r in rows {
            counts[self.data.rows[r].label.index()] += 1;
        }
        let leaf = TreeNode::Leaf { counts };
        if counts[0] == 0
            || counts[1] == 0
            || rows.len() < self.config.min_samples_split
            || self.config.max_depth.is_some_and(|d| depth >= d)
        {
            return leaf;
        }
        let candidates = index::sample(self.rng, self.data.arity(), self.mtry).into_vec();
        let Some(split) = best_split(self.data, rows, &candidates) else {
            return leaf;
        };
        self.importance[split.feature] += rows.len() as f64 / self.root_size * split.decrease;
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.data.rows[r].features[split.feature] <= split.threshold);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(&left, depth + 1)),
            right: Box::new(self.grow(&right, depth + 1)),
        }
    }
}

/// Grows one CART tree on the given (possibly repeated) row indices.
pub fn fit_tree<R: Rng>(
    data: &Dataset,
    rows: &[usize],
    config: &ForestConfig,
    rng: &mut R,
) -> Result<FittedTree> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    let mtry = config.resolved_mtry(data.arity())?;
    let mut grower = Grower {
        data,
        config,
        mtry,
        root_size: rows.len() as f64,
        importance: vec![0.0; data.arity()],
        rng,
    };
    let root = grower.grow(rows, 0);
    Ok(FittedTree {
        root,
        importance: grower.importance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    config: ForestConfig,
    feature_names: Vec<String>,
    trees: Vec<TreeNode>,
    importances: Vec<f64>,
}

pub fn fit_forest(train: &Dataset, config: &ForestConfig) -> Result<Forest> {
    config.validate(train.arity())?;
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::invalid(format!(
            "training set needs both classes, got er = {}, sbm = {}",
            counts[0], counts[1]
        )));
    }
    let fitted: Vec<FittedTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = config.tree_seed(t).rng();
            let rows = bootstrap_indices(train.len(), &mut rng);
            fit_tree(train, &rows, config, &mut rng)
        })
        .collect::<Result<_>>()?;

    let arity = train.arity();
    let mut importances = vec![0.0; arity];
    for tree in &fitted {
        for (acc, x) in importances.iter_mut().zip(&tree.importance) {
            *acc += x;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for x in &mut importances {
            *x /= total;
        }
    }
    Ok(Forest {
        config: config.clone(),
        feature_names: train.feature_names().to_vec(),
        trees: fitted.into_iter().map(|t| t.root).collect(),
        importances,
    })
}

impl Forest {
    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn arity(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Mean decrease in impurity per feature, normalized to sum to 1.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.arity() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.arity(),
                x.len()
            )));
        }
        let mut acc = [0.0; 2];
        for tree in &self.trees {
            let p = tree.proba(x);
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let t = self.trees.len() as f64;
        Ok([acc[0] / t, acc[1] / t])
    }

    /// Argmax of [`Forest::predict_proba`]; an exact tie goes to ER.
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let p = self.predict_proba(x)?;
        Ok(if p[1] > p[0] { Label::Sbm } else { Label::Er })
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        config: ForestConfig,
        feature_names: Vec<String>,
        trees: Vec<TreeNode>,
        importances: Vec<f64>,
    ) -> Self {
        Forest {
            config,
            feature_names,
            trees,
            importances,
        }
    }
}

pub fn predict_proba(forest: &Forest, x: &[f64]) -> Result<[f64; 2]> {
    forest.predict_proba(x)
}

pub fn importances(forest: &Forest) -> Vec<f64> {
    forest.importances().to_vec()
}

pub fn evaluate_accuracy(forest: &Forest, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    let mut correct = 0usize;
    for row in test.rows() {
        if forest.predict(&row.features)? == row.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Indices of the `k` largest importances, descending; ties go to the lower
/// index.
pub fn top_k_features(importances: &[f64], k: usize) -> Result<FeatureSubset> {
    if k == 0 || k > importances.len() {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={}",
            importances.len()
        )));
    }
    let mut order: Vec<usize> = (0..importances.len()).collect();
    order.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    order.truncate(k);
    FeatureSubset::with_arity(order, importances.len())
}
