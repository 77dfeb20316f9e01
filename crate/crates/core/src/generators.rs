//! Seeded Erdős–Rényi and stochastic block model generators, plus uniform
//! edge rewiring noise.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::Label;
use crate::graph::Graph;
use crate::seed::{derive_root, tag, Seed};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErParams {
    pub n: usize,
    pub p: f64,
}

impl ErParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        let params = ErParams { n, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("ER needs n >= 2, got {}", self.n)));
        }
        check_probability("p", self.p)
    }
}

/// Planted partition with `k` contiguous blocks of size `n / k`; the last
/// block absorbs the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n: usize,
    pub k: usize,
    pub p_in: f64,
    pub p_out: f64,
}

impl SbmParams {
    pub fn new(n: usize, p_in: f64, p_out: f64) -> Result<Self> {
        Self::with_blocks(n, 2, p_in, p_out)
    }

    pub fn with_blocks(n: usize, k: usize, p_in: f64, p_out: f64) -> Result<Self> {
        let params = SbmParams { n, k, p_in, p_out };
        params.validate()?;
        Ok(params)
    }

    /// `p_in == p_out` is accepted for null-model diagnostics; `p_in < p_out`
    /// is rejected.
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("SBM needs k >= 2 blocks, got {}", self.k)));
        }
        if self.n < self.k {
            return Err(Error::invalid(format!(
                "SBM with {} blocks needs n >= k, got n = {}",
                self.k, self.n
            )));
        }
        check_probability("p_in", self.p_in)?;
        check_probability("p_out", self.p_out)?;
        if self.p_in < self.p_out {
            return Err(Error::invalid(format!(
                "SBM requires p_in >= p_out, got p_in = {} < p_out = {}",
                self.p_in, self.p_out
            )));
        }
        Ok(())
    }

    pub fn block_size(&self) -> usize {
        self.n / self.k
    }

    pub fn block_of(&self, v: usize) -> usize {
        (v / self.block_size()).min(self.k - 1)
    }

    /// Number of vertex pairs inside a common block.
    pub fn within_pairs(&self) -> usize {
        let size = self.block_size();
        let last = self.n - size * (self.k - 1);
        (self.k - 1) * pair_count(size) + pair_count(last)
    }

    pub fn cross_pairs(&self) -> usize {
        pair_count(self.n) - self.within_pairs()
    }

    /// Exact expected density `(p_in·W + p_out·C) / (W + C)`.
    pub fn expected_density(&self) -> f64 {
        let w = self.within_pairs() as f64;
        let c = self.cross_pairs() as f64;
        (self.p_in * w + self.p_out * c) / (w + c)
    }

    /// The `(p_in + p_out) / 2` approximation used to pair SBM instances
    /// with ER instances of the same density.
    pub fn density_bucket(&self) -> f64 {
        (self.p_in + self.p_out) / 2.0
    }
}

/// Exact expected density of an SBM parameterization.
pub fn expected_density(params: &SbmParams) -> f64 {
    params.expected_density()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Er(ErParams),
    Sbm(SbmParams),
}

impl ModelParams {
    pub fn label(&self) -> Label {
        match self {
            ModelParams::Er(_) => Label::Er,
            ModelParams::Sbm(_) => Label::Sbm,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelParams::Er(p) => p.n,
            ModelParams::Sbm(p) => p.n,
        }
    }

    pub fn expected_density(&self) -> f64 {
        match self {
            ModelParams::Er(p) => p.p,
            ModelParams::Sbm(p) => p.expected_density(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Er(p) => p.validate(),
            ModelParams::Sbm(p) => p.validate(),
        }
    }

    pub fn generate(&self, seed: Seed) -> Result<Graph> {
        match self {
            ModelParams::Er(p) => generate_er(p, seed),
            ModelParams::Sbm(p) => generate_sbm(p, seed),
        }
    }

    /// Root of the random streams for instances of this parameterization
    /// under an experiment-wide root seed. Instance `i` uses
    /// `Seed::new(population_root, i)`.
    pub fn population_root(&self, root: u64) -> u64 {
        match self {
            ModelParams::Er(p) => derive_root(root, &[tag("er"), p.n as u64, p.p.to_bits()]),
            ModelParams::Sbm(p) => derive_root(
                root,
                &[
                    tag("sbm"),
                    p.n as u64,
                    p.k as u64,
                    p.p_in.to_bits(),
                    p.p_out.to_bits(),
                ],
            ),
        }
    }
}

/// Samples `G(n, p)`: every pair is included independently with
/// probability `p`.
pub fn generate_er(params: &ErParams, seed: Seed) -> Result<Graph> {
    params.validate()?;
    let n = params.n;
    let mut rng = seed.rng();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < params.p {
                edges.push((u as u32, v as u32));
            }
        }
    }
    Ok(Graph::from_canonical(n, edges))
}

pub fn generate_sbm(params: &SbmParams, seed: Seed) -> Result<Graph> {
    params.validate()?;
    let n = params.n;
    let blocks: Vec<usize> = (0..n).map(|v| params.block_of(v)).collect();
    let mut rng = seed.rng();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if blocks[u] == blocks[v] {
                params.p_in
            } else {
                params.p_out
            };
            if rng.gen::<f64>() < p {
                edges.push((u as u32, v as u32));
            }
        }
    }
    Ok(Graph::from_canonical(n, edges))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rewired {
    pub graph: Graph,
    /// Edges that received a new endpoint.
    pub rewired: usize,
    /// Selected edges left in place because the kept endpoint was already
    /// adjacent to every other vertex.
    pub skipped: usize,
}

/// Number of edges a rewiring pass touches: `floor(fraction · |E|)`.
pub fn rewire_count(edge_count: usize, fraction: f64) -> usize {
    // The small slack absorbs representation error such as 0.57 * 100.
    (((fraction * edge_count as f64) + 1e-9).floor() as usize).min(edge_count)
}

/// Rewires `floor(fraction · |E|)` distinct edges chosen uniformly.
///
/// For each chosen edge one endpoint, picked uniformly, is kept and the other
/// is replaced by a uniform vertex that creates neither a self-loop nor a
/// duplicate edge. Vertex and edge counts are preserved; the degree sequence
/// is not.
pub fn rewire_uniform(g: &Graph, fraction: f64, seed: Seed) -> Result<Rewired> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!(
            "rewire fraction {fraction} is outside [0, 1]"
        )));
    }
    let n = g.vertex_count();
    let m = g.edge_count();
    let count = rewire_count(m, fraction);
    if count == 0 {
        return Ok(Rewired {
            graph: g.clone(),
            rewired: 0,
            skipped: 0,
        });
    }

    let key = |a: u32, b: u32| -> u64 {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        ((u as u64) << 32) | v as u64
    };
    let mut present: HashSet<u64> = g.edges().iter().map(|&(u, v)| key(u, v)).collect();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();

    let mut rng = seed.rng();
    let chosen = index::sample(&mut rng, m, count);
    let (mut rewired, mut skipped) = (0, 0);
    for i in chosen.iter() {
        let (u, v) = g.edges()[i];
        let (keep, drop) = if rng.gen_bool(0.5) { (u, v) } else { (v, u) };
        if degree[keep as usize] + 1 >= n {
            skipped += 1;
            continue;
        }
        let target = loop {
            let w = rng.gen_range(0..n as u32);
            if w != keep && !present.contains(&key(keep, w)) {
                break w;
            }
        };
        present.remove(&key(keep, drop));
        present.insert(key(keep, target));
        degree[drop as usize] -= 1;
        degree[target as usize] += 1;
        rewired += 1;
    }

    let mut edges: Vec<(u32, u32)> = present
        .into_iter()
        .map(|k| ((k >> 32) as u32, k as u32))
        .collect();
    edges.sort_unstable();
    Ok(Rewired {
        graph: Graph::from_canonical(n, edges),
        rewired,
        skipped,
    })
}
