//! Brute-force reference implementations used by the integration tests.
//!
//! Everything here works from an adjacency matrix with Floyd–Warshall
//! distances and explicit enumeration, sharing no code with the library's
//! BFS/Brandes implementation.

#![allow(dead_code)]

use graphsel::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INF: usize = usize::MAX;

pub struct Oracle {
    pub n: usize,
    pub adj: Vec<Vec<bool>>,
    pub dist: Vec<Vec<usize>>,
}

impl Oracle {
    pub fn new(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut adj = vec![vec![false; n]; n];
        for &(u, v) in g.edges() {
            adj[u as usize][v as usize] = true;
            adj[v as usize][u as usize] = true;
        }
        let mut dist = vec![vec![INF; n]; n];
        for i in 0..n {
            dist[i][i] = 0;
            for j in 0..n {
                if adj[i][j] {
                    dist[i][j] = 1;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] != INF && dist[k][j] != INF && dist[i][k] + dist[k][j] < dist[i][j] {
                        dist[i][j] = dist[i][k] + dist[k][j];
                    }
                }
            }
        }
        Oracle { n, adj, dist }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&a| a).count()
    }

    pub fn degree_centrality(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| self.degree(v) as f64 / (self.n - 1) as f64)
            .collect()
    }

    /// Every simple path of exactly `len` edges from `s` to `t`; each call
    /// of `visit` receives the interior vertices.
    fn enumerate_paths(&self, s: usize, t: usize, len: usize, visit: &mut dyn FnMut(&[usize])) {
        let mut path = vec![s];
        let mut on_path = vec![false; self.n];
        on_path[s] = true;
        self.extend(t, len, &mut path, &mut on_path, visit);
    }

    fn extend(
        &self,
        t: usize,
        len: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        visit: &mut dyn FnMut(&[usize]),
    ) {
        let last = *path.last().unwrap();
        let edges = path.len() - 1;
        if last == t {
            if edges == len {
                visit(&path[1..path.len() - 1]);
            }
            return;
        }
        if edges == len {
            return;
        }
        for w in 0..self.n {
            if self.adj[last][w] && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                self.extend(t, len, path, on_path, visit);
                path.pop();
                on_path[w] = false;
            }
        }
    }

    /// Normalized betweenness from explicit shortest-path enumeration over
    /// unordered pairs.
    pub fn betweenness(&self) -> Vec<f64> {
        let n = self.n;
        let mut raw = vec![0.0; n];
        for s in 0..n {
            for t in s + 1..n {
                let d = self.dist[s][t];
                if d == INF || d < 2 {
                    continue;
                }
                let mut total = 0usize;
                let mut through = vec![0usize; n];
                self.enumerate_paths(s, t, d, &mut |interior| {
                    total += 1;
                    for &v in interior {
                        through[v] += 1;
                    }
                });
                for v in 0..n {
                    raw[v] += through[v] as f64 / total as f64;
                }
            }
        }
        let scale = 2.0 / ((n - 1) * (n - 2)) as f64;
        raw.iter().map(|x| x * scale).collect()
    }

    fn reach_and_sum(&self, v: usize) -> (usize, usize) {
        let mut reach = 0;
        let mut sum = 0;
        for u in 0..self.n {
            if u != v && self.dist[v][u] != INF {
                reach += 1;
                sum += self.dist[v][u];
            }
        }
        (reach, sum)
    }

    /// Wasserman–Faust closeness.
    pub fn closeness(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                let (r, s) = self.reach_and_sum(v);
                if r == 0 {
                    0.0
                } else {
                    (r as f64 / (self.n - 1) as f64) * (r as f64 / s as f64)
                }
            })
            .collect()
    }

    pub fn aspl(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                let (r, s) = self.reach_and_sum(v);
                if r == 0 {
                    0.0
                } else {
                    s as f64 / r as f64
                }
            })
            .collect()
    }

    pub fn triangles(&self) -> Vec<f64> {
        let n = self.n;
        let mut t = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if self.adj[i][j] && self.adj[j][k] && self.adj[i][k] {
                        t[i] += 1.0;
                        t[j] += 1.0;
                        t[k] += 1.0;
                    }
                }
            }
        }
        t
    }

    pub fn clustering(&self) -> Vec<f64> {
        let t = self.triangles();
        (0..self.n)
            .map(|v| {
                let d = self.degree(v);
                if d < 2 {
                    0.0
                } else {
                    t[v] / (d * (d - 1) / 2) as f64
                }
            })
            .collect()
    }

    /// Diameter and radius of the largest component; among equally large
    /// components the largest (diameter, radius) pair wins.
    pub fn diameter_radius(&self) -> (usize, usize) {
        let n = self.n;
        let mut best = (0, 0, 0);
        let mut seen = vec![false; n];
        for v in 0..n {
            if seen[v] {
                continue;
            }
            let comp: Vec<usize> = (0..n).filter(|&u| self.dist[v][u] != INF).collect();
            for &u in &comp {
                seen[u] = true;
            }
            let ecc: Vec<usize> = comp
                .iter()
                .map(|&a| comp.iter().map(|&b| self.dist[a][b]).max().unwrap())
                .collect();
            let candidate = (comp.len(), *ecc.iter().max().unwrap(), *ecc.iter().min().unwrap());
            best = best.max(candidate);
        }
        (best.1, best.2)
    }

    /// The 26-slot vector assembled from the brute-force measures.
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(26);
        for values in [
            self.degree_centrality(),
            self.betweenness(),
            self.closeness(),
            self.clustering(),
        ] {
            out.extend(four_stats(&values));
        }
        let (d, r) = self.diameter_radius();
        out.push(d as f64);
        out.push(r as f64);
        out.extend(four_stats(&self.triangles()));
        out.extend(four_stats(&self.aspl()));
        out
    }
}

/// Min, max, mean, population standard deviation.
pub fn four_stats(v: &[f64]) -> [f64; 4] {
    let n = v.len() as f64;
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    [min, max, mean, var.sqrt()]
}

/// A G(n, p)-style graph drawn without the library's generators.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

pub fn star(leaves: usize) -> Graph {
    Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
}

pub fn complete(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).unwrap()
}

pub fn k4_minus_edge() -> Graph {
    Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap()
}

/// Largest absolute difference between the library's measures and the
/// oracle's on one graph, plus whether diameter/radius agree.
pub fn compare_with_oracle(g: &Graph) -> (f64, bool) {
    use graphsel::features::*;
    let o = Oracle::new(g);
    let mut worst = 0.0f64;
    let mut track = |a: &[f64], b: &[f64]| {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
    };
    track(degree_centrality(g).unwrap().values(), &o.degree_centrality());
    track(betweenness_centrality(g).unwrap().values(), &o.betweenness());
    track(closeness_centrality(g).values(), &o.closeness());
    track(local_clustering(g).values(), &o.clustering());
    track(triangles_per_vertex(g).values(), &o.triangles());
    track(avg_shortest_path_per_vertex(g).values(), &o.aspl());
    track(&featurize(g).unwrap().0, &o.feature_vector());
    let ecc_ok = eccentricity_extremes(g) == o.diameter_radius();
    (worst, ecc_ok)
}
