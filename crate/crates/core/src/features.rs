//! The 26-slot topological embedding of a graph.
//!
//! Per-vertex measures are summarized by min, max, mean and population
//! standard deviation. Slot layout:
//!
//! | slots  | measure                          |
//! |--------|----------------------------------|
//! | 0–3    | degree centrality                |
//! | 4–7    | betweenness centrality           |
//! | 8–11   | closeness centrality             |
//! | 12–15  | local clustering coefficient     |
//! | 16     | diameter                         |
//! | 17     | radius                           |
//! | 18–21  | triangles per vertex             |
//! | 22–25  | average shortest path length     |
//!
//! Disconnected graphs are handled with component-aware conventions:
//! closeness is scaled by the reachable fraction, diameter and radius come
//! from the largest component, path lengths average over reachable vertices
//! only, and isolated vertices score zero everywhere.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_sum::{to_fixed, ExactSum};
use crate::graph::{Graph, VertexStats};

pub const FEATURE_COUNT: usize = 26;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "degree_min",
    "degree_max",
    "degree_avg",
    "degree_std",
    "betweenness_min",
    "betweenness_max",
    "betweenness_avg",
    "betweenness_std",
    "closeness_min",
    "closeness_max",
    "closeness_avg",
    "closeness_std",
    "clustering_min",
    "clustering_max",
    "clustering_avg",
    "clustering_std",
    "diameter",
    "radius",
    "triangles_min",
    "triangles_max",
    "triangles_avg",
    "triangles_std",
    "aspl_min",
    "aspl_max",
    "aspl_avg",
    "aspl_std",
];

pub mod slot {
    pub const DEGREE: usize = 0;
    pub const BETWEENNESS: usize = 4;
    pub const CLOSENESS: usize = 8;
    pub const CLUSTERING: usize = 12;
    pub const DIAMETER: usize = 16;
    pub const RADIUS: usize = 17;
    pub const TRIANGLES: usize = 18;
    pub const ASPL: usize = 22;

    // Offsets within a four-number summary.
    pub const MIN: usize = 0;
    pub const MAX: usize = 1;
    pub const AVG: usize = 2;
    pub const STD: usize = 3;
}

/// Min, max, mean and population standard deviation of a value list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourStats {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

impl FourStats {
    pub fn as_array(&self) -> [f64; 4] {
        [self.min, self.max, self.avg, self.std]
    }
}

pub fn summarize(values: &[f64]) -> Result<FourStats> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty list"));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {bad} in summary input")));
    }
    // Sorting first makes the summary a function of the multiset alone.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let count = sorted.len() as f64;
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let avg = (sorted.iter().sum::<f64>() / count).clamp(min, max);
    let std = if min == max {
        0.0
    } else {
        let mut sq: Vec<f64> = sorted.iter().map(|v| (v - avg) * (v - avg)).collect();
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / count).sqrt()
    };
    Ok(FourStats { min, max, avg, std })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.0[i])
    }

    fn put(&mut self, base: usize, stats: FourStats) {
        self.0[base..base + 4].copy_from_slice(&stats.as_array());
    }
}

/// An ordered selection of distinct feature slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        Self::with_arity(indices, FEATURE_COUNT)
    }

    pub fn with_arity(indices: Vec<usize>, arity: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("feature subset is empty"));
        }
        let mut seen = vec![false; arity];
        for &i in &indices {
            if i >= arity {
                return Err(Error::invalid(format!("feature index {i} out of range 0..{arity}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("feature index {i} repeated")));
            }
        }
        Ok(FeatureSubset(indices))
    }

    pub fn all() -> Self {
        FeatureSubset((0..FEATURE_COUNT).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| row[i]).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.0.iter().map(|&i| FEATURE_NAMES[i]).collect()
    }
}

impl TryFrom<Vec<usize>> for FeatureSubset {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        FeatureSubset::new(v)
    }
}

impl From<FeatureSubset> for Vec<usize> {
    fn from(s: FeatureSubset) -> Self {
        s.0
    }
}

pub fn degree_centrality(g: &Graph) -> Result<VertexStats> {
    let n = g.vertex_count();
    if n < 2 {
        return Err(Error::invalid("degree centrality needs n >= 2"));
    }
    let scale = (n - 1) as f64;
    Ok(VertexStats(
        (0..n).map(|v| g.degree(v) as f64 / scale).collect(),
    ))
}

pub fn betweenness_centrality(g: &Graph) -> Result<VertexStats> {
    if g.vertex_count() < 3 {
        return Err(Error::invalid("betweenness centrality needs n >= 3"));
    }
    Ok(VertexStats(all_sources(g).betweenness(g.vertex_count())))
}

fn closeness_value(n: usize, reach: usize, dist_sum: u64) -> f64 {
    if reach == 0 {
        return 0.0;
    }
    let r = reach as f64;
    (r / (n - 1) as f64) * (r / dist_sum as f64)
}

fn aspl_value(reach: usize, dist_sum: u64) -> f64 {
    if reach == 0 {
        0.0
    } else {
        dist_sum as f64 / reach as f64
    }
}

/// Closeness scaled by the fraction of vertices reachable, so values stay
/// comparable on disconnected graphs.
pub fn closeness_centrality(g: &Graph) -> VertexStats {
    let n = g.vertex_count();
    VertexStats(
        (0..n)
            .map(|s| {
                let b = bfs(g, s);
                closeness_value(n, b.reach, b.dist_sum)
            })
            .collect(),
    )
}

pub fn avg_shortest_path_per_vertex(g: &Graph) -> VertexStats {
    VertexStats(
        (0..g.vertex_count())
            .map(|s| {
                let b = bfs(g, s);
                aspl_value(b.reach, b.dist_sum)
            })
            .collect(),
    )
}

pub fn triangles_per_vertex(g: &Graph) -> VertexStats {
    VertexStats(triangle_counts(g).into_iter().map(|t| t as f64).collect())
}

pub fn local_clustering(g: &Graph) -> VertexStats {
    let tri = triangle_counts(g);
    VertexStats(
        (0..g.vertex_count())
            .map(|v| clustering_value(g.degree(v), tri[v]))
            .collect(),
    )
}

fn clustering_value(degree: usize, triangles: u64) -> f64 {
    if degree < 2 {
        return 0.0;
    }
    let pairs = (degree * (degree - 1) / 2) as f64;
    triangles as f64 / pairs
}

/// `(diameter, radius)` of the largest component. Among equally large
/// components the largest `(diameter, radius)` wins, which keeps the result
/// independent of vertex labels.
pub fn eccentricity_extremes(g: &Graph) -> (usize, usize) {
    let ecc: Vec<u32> = (0..g.vertex_count()).map(|s| bfs(g, s).ecc).collect();
    extremes_on_largest_component(g, &ecc)
}

fn extremes_on_largest_component(g: &Graph, ecc: &[u32]) -> (usize, usize) {
    g.connected_components()
        .iter()
        .map(|part| {
            let diameter = part.iter().map(|&v| ecc[v]).max().unwrap_or(0);
            let radius = part.iter().map(|&v| ecc[v]).min().unwrap_or(0);
            (part.len(), diameter as usize, radius as usize)
        })
        .max()
        .map_or((0, 0), |(_, d, r)| (d, r))
}

/// Embeds `g` into the 26-slot feature space.
///
/// One all-sources Brandes pass supplies betweenness together with the BFS
/// distances behind closeness, eccentricity and path lengths.
pub fn featurize(g: &Graph) -> Result<FeatureVector> {
    let n = g.vertex_count();
    if n < 3 {
        return Err(Error::invalid("featurize needs n >= 3"));
    }
    let pass = all_sources(g);
    let tri = triangle_counts(g);

    let degree = degree_centrality(g)?;
    let betweenness = pass.betweenness(n);
    let closeness: Vec<f64> = (0..n)
        .map(|v| closeness_value(n, pass.reach[v], pass.dist_sum[v]))
        .collect();
    let clustering: Vec<f64> = (0..n).map(|v| clustering_value(g.degree(v), tri[v])).collect();
    let triangles: Vec<f64> = tri.iter().map(|&t| t as f64).collect();
    let aspl: Vec<f64> = (0..n)
        .map(|v| aspl_value(pass.reach[v], pass.dist_sum[v]))
        .collect();
    let (diameter, radius) = extremes_on_largest_component(g, &pass.ecc);

    let mut fv = FeatureVector([0.0; FEATURE_COUNT]);
    fv.put(slot::DEGREE, summarize(degree.values())?);
    fv.put(slot::BETWEENNESS, summarize(&betweenness)?);
    fv.put(slot::CLOSENESS, summarize(&closeness)?);
    fv.put(slot::CLUSTERING, summarize(&clustering)?);
    fv.0[slot::DIAMETER] = diameter as f64;
    fv.0[slot::RADIUS] = radius as f64;
    fv.put(slot::TRIANGLES, summarize(&triangles)?);
    fv.put(slot::ASPL, summarize(&aspl)?);
    Ok(fv)
}

fn triangle_counts(g: &Graph) -> Vec<u64> {
    let mut tri = vec![0u64; g.vertex_count()];
    for &(u, v) in g.edges() {
        let a = g.neighbors(u as usize);
        let b = g.neighbors(v as usize);
        // Only third vertices w > v, so each triangle u < v < w counts once.
        let mut i = a.partition_point(|&x| x <= v);
        let mut j = b.partition_point(|&x| x <= v);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    tri[u as usize] += 1;
                    tri[v as usize] += 1;
                    tri[a[i] as usize] += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    tri
}

struct BfsSummary {
    reach: usize,
    dist_sum: u64,
    ecc: u32,
}

fn bfs(g: &Graph, s: usize) -> BfsSummary {
    let mut dist = vec![u32::MAX; g.vertex_count()];
    let mut queue = VecDeque::from([s]);
    dist[s] = 0;
    let mut out = BfsSummary {
        reach: 0,
        dist_sum: 0,
        ecc: 0,
    };
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if v != s {
            out.reach += 1;
            out.dist_sum += d as u64;
            out.ecc = out.ecc.max(d);
        }
        for &w in g.neighbors(v) {
            if dist[w as usize] == u32::MAX {
                dist[w as usize] = d + 1;
                queue.push_back(w as usize);
            }
        }
    }
    out
}

/// Per-source results of the shared Brandes/BFS pass.
struct PathPass {
    dependency: Vec<ExactSum>,
    reach: Vec<usize>,
    dist_sum: Vec<u64>,
    ecc: Vec<u32>,
}

impl PathPass {
    fn betweenness(&self, n: usize) -> Vec<f64> {
        if n < 3 {
            return vec![0.0; n];
        }
        // Summing over every source visits each unordered pair twice; the
        // undirected normalizer (n-1)(n-2)/2 absorbs the factor of two.
        let norm = ((n - 1) * (n - 2)) as f64;
        self.dependency.iter().map(|d| d.value() / norm).collect()
    }
}

/// Reusable buffers for one Brandes source sweep.
///
/// Vertices are processed level by level. Each BFS level is expanded either
/// top-down (scan the frontier's neighbors) or bottom-up (scan the unvisited
/// vertices' neighbors for frontier parents), whichever touches fewer
/// adjacency entries; in dense-ish graphs almost everything sits at distance
/// two and the bottom-up step makes the last levels nearly free. The
/// dependency pass makes the same choice between pulling from successors and
/// pushing to predecessors. Both choices depend only on degree sums, and all
/// accumulations are exact, so results do not depend on vertex labels.
struct Workspace {
    dist: Vec<u32>,
    sigma: Vec<f64>,
    coeff: Vec<f64>,
    coeff_fixed: Vec<Option<i128>>,
    order: Vec<u32>,
    /// Offset of each level in `order`, followed by an end marker.
    levels: Vec<usize>,
    /// Adjacency entries owned by each level.
    level_degree: Vec<usize>,
    unvisited: Vec<u32>,
    acc: ExactSum,
    inbox: Vec<ExactSum>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            dist: vec![u32::MAX; n],
            sigma: vec![0.0; n],
            coeff: vec![0.0; n],
            coeff_fixed: vec![None; n],
            order: Vec::with_capacity(n),
            levels: Vec::new(),
            level_degree: Vec::new(),
            unvisited: Vec::with_capacity(n),
            acc: ExactSum::new(),
            inbox: vec![ExactSum::new(); n],
        }
    }

    fn set_coeff(&mut self, v: usize, c: f64) {
        self.coeff[v] = c;
        self.coeff_fixed[v] = to_fixed(c);
    }

    /// Runs one source and adds its dependencies into `dependency`.
    fn sweep(&mut self, g: &Graph, s: usize, dependency: &mut [ExactSum]) -> BfsSummary {
        let n = g.vertex_count();
        self.order.clear();
        self.levels.clear();
        self.level_degree.clear();

        self.order.push(s as u32);
        self.dist[s] = 0;
        self.sigma[s] = 1.0;
        self.levels.push(0);
        self.level_degree.push(g.degree(s));
        let mut unvisited_degree = 2 * g.edge_count() - g.degree(s);
        let mut unvisited_valid = false;
        let mut depth = 0u32;
        loop {
            let (lo, hi) = (self.levels[depth as usize], self.order.len());
            let next = depth + 1;
            let mut found_degree = 0;
            if self.level_degree[depth as usize] <= unvisited_degree {
                for k in lo..hi {
                    let v = self.order[k] as usize;
                    let sv = self.sigma[v];
                    for &w in g.neighbors(v) {
                        let w = w as usize;
                        let dw = self.dist[w];
                        if dw == u32::MAX {
                            self.dist[w] = next;
                            self.sigma[w] = sv;
                            self.order.push(w as u32);
                            found_degree += g.degree(w);
                        } else if dw == next {
                            self.sigma[w] += sv;
                        }
                    }
                }
                unvisited_valid = false;
            } else {
                if !unvisited_valid {
                    let dist = &self.dist;
                    self.unvisited.clear();
                    self.unvisited
                        .extend((0..n as u32).filter(|&u| dist[u as usize] == u32::MAX));
                }
                for &u in &self.unvisited {
                    let u = u as usize;
                    let mut paths = 0.0;
                    for &v in g.neighbors(u) {
                        if self.dist[v as usize] == depth {
                            paths += self.sigma[v as usize];
                        }
                    }
                    if paths > 0.0 {
                        self.sigma[u] = paths;
                        self.order.push(u as u32);
                        found_degree += g.degree(u);
                    }
                }
                // Distances are assigned after the scan so the level test
                // above only ever sees the current frontier.
                for k in hi..self.order.len() {
                    self.dist[self.order[k] as usize] = next;
                }
                let dist = &self.dist;
                self.unvisited.retain(|&u| dist[u as usize] == u32::MAX);
                unvisited_valid = true;
            }
            if self.order.len() == hi {
                break;
            }
            unvisited_degree -= found_degree;
            self.levels.push(hi);
            self.level_degree.push(found_degree);
            depth = next;
        }
        self.levels.push(self.order.len());

        let deepest = depth as usize;
        let mut out = BfsSummary {
            reach: self.order.len() - 1,
            dist_sum: 0,
            ecc: depth,
        };
        for d in 1..=deepest {
            let count = self.levels[d + 1] - self.levels[d];
            out.dist_sum += (d * count) as u64;
        }

        for k in self.levels[deepest]..self.levels[deepest + 1] {
            let w = self.order[k] as usize;
            self.set_coeff(w, 1.0 / self.sigma[w]);
        }
        for d in (0..deepest).rev() {
            let (lo, mid, hi) = (self.levels[d], self.levels[d + 1], self.levels[d + 2]);
            let pull = self.level_degree[d] <= self.level_degree[d + 1];
            if !pull {
                for k in mid..hi {
                    let w = self.order[k] as usize;
                    let (fixed, c) = (self.coeff_fixed[w], self.coeff[w]);
                    for &v in g.neighbors(w) {
                        if self.dist[v as usize] == d as u32 {
                            self.inbox[v as usize].add_prepared(fixed, c);
                        }
                    }
                }
            }
            for k in lo..mid {
                let v = self.order[k] as usize;
                let total = if pull {
                    self.acc.clear();
                    for &w in g.neighbors(v) {
                        let w = w as usize;
                        if self.dist[w] == d as u32 + 1 {
                            self.acc.add_prepared(self.coeff_fixed[w], self.coeff[w]);
                        }
                    }
                    self.acc.value()
                } else {
                    let t = self.inbox[v].value();
                    self.inbox[v].clear();
                    t
                };
                if total == 0.0 {
                    self.set_coeff(v, 1.0 / self.sigma[v]);
                    continue;
                }
                let delta = self.sigma[v] * total;
                self.set_coeff(v, (1.0 + delta) / self.sigma[v]);
                if v != s {
                    dependency[v].add(delta);
                }
            }
        }

        for &v in &self.order {
            let v = v as usize;
            self.dist[v] = u32::MAX;
            self.sigma[v] = 0.0;
        }
        out
    }
}

const SOURCE_BLOCK: usize = 64;

fn all_sources(g: &Graph) -> PathPass {
    let n = g.vertex_count();
    let sources: Vec<usize> = (0..n).collect();
    let blocks: Vec<(Vec<ExactSum>, Vec<BfsSummary>)> = sources
        .par_chunks(SOURCE_BLOCK)
        .map(|chunk| {
            let mut ws = Workspace::new(n);
            let mut dep = vec![ExactSum::new(); n];
            let summaries = chunk.iter().map(|&s| ws.sweep(g, s, &mut dep)).collect();
            (dep, summaries)
        })
        .collect();

    let mut pass = PathPass {
        dependency: vec![ExactSum::new(); n],
        reach: Vec::with_capacity(n),
        dist_sum: Vec::with_capacity(n),
        ecc: Vec::with_capacity(n),
    };
    for (dep, summaries) in blocks {
        for (total, part) in pass.dependency.iter_mut().zip(&dep) {
            total.merge(part);
        }
        for b in summaries {
            pass.reach.push(b.reach);
            pass.dist_sum.push(b.dist_sum);
            pass.ecc.push(b.ecc);
        }
    }
    pass
}
