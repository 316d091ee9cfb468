//! Directed communication topologies and consensus weight matrices.
//!
//! An edge `(j, i)` means agent `j` sends to agent `i`, so `j` is an
//! in-neighbor of `i`. Self-loops are never stored; self-influence lives only
//! on the diagonal of a [`WeightMatrix`].

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Row and column sums of generated weight matrices are exact to this bound.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Attempts before `random_binomial` gives up on finding a connected draw.
const MAX_GRAPH_DRAWS: u64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one agent")]
    Empty,
    #[error("edge ({from}, {to}) references an agent outside [0, {n})")]
    IndexOutOfRange { from: usize, to: usize, n: usize },
    #[error("duplicate edge ({from}, {to})")]
    DuplicateEdge { from: usize, to: usize },
    #[error("self-loop on agent {0}; self weights live on the matrix diagonal")]
    SelfLoop(usize),
    #[error("edge probability {0} must lie in (0, 1]")]
    BadProbability(f64),
    #[error("no strongly connected graph found after {0} draws")]
    NotConnected(u64),
    #[error("metropolis weights need an undirected graph (edge {from}->{to} has no reverse)")]
    Directed { from: usize, to: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Directed graph over agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    in_nbrs: Vec<BTreeSet<usize>>,
    out_nbrs: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut in_nbrs = vec![BTreeSet::new(); n];
        let mut out_nbrs = vec![BTreeSet::new(); n];
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(GraphError::IndexOutOfRange { from, to, n });
            }
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            if !out_nbrs[from].insert(to) {
                return Err(GraphError::DuplicateEdge { from, to });
            }
            in_nbrs[to].insert(from);
        }
        Ok(Self { n, in_nbrs, out_nbrs })
    }

    /// Undirected convenience constructor: every pair becomes two directed edges.
    pub fn undirected(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        let edges: Vec<_> = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        Self::from_edge_list(n, &edges)
    }

    /// Erdős–Rényi graph, redrawn until strongly connected.
    ///
    /// Each draw `k` uses its own stream seeded from `(seed, k)`, so the result
    /// depends only on `(n, p, seed, undirected)`.
    pub fn random_binomial(n: usize, p: f64, seed: u64, undirected: bool) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(GraphError::BadProbability(p));
        }
        for attempt in 0..MAX_GRAPH_DRAWS {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::rng::derive_seed(seed, attempt));
            let mut edges = Vec::new();
            for i in 0..n {
                let start = if undirected { i + 1 } else { 0 };
                for j in start..n {
                    if i == j {
                        continue;
                    }
                    if rng.random::<f64>() < p {
                        edges.push((i, j));
                        if undirected {
                            edges.push((j, i));
                        }
                    }
                }
            }
            let g = Self::from_edge_list(n, &edges)?;
            if g.is_strongly_connected() {
                return Ok(g);
            }
        }
        Err(GraphError::NotConnected(MAX_GRAPH_DRAWS))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn in_neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.in_nbrs[i]
    }

    pub fn out_neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.out_nbrs[i]
    }

    /// Edges sorted by `(from, to)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.out_nbrs
            .iter()
            .enumerate()
            .flat_map(|(from, outs)| outs.iter().map(move |&to| (from, to)))
            .collect()
    }

    pub fn is_undirected(&self) -> bool {
        self.edges().iter().all(|&(a, b)| self.out_nbrs[b].contains(&a))
    }

    pub fn is_strongly_connected(&self) -> bool {
        (0..self.n).all(|s| self.bfs_depths(s).iter().all(Option::is_some))
    }

    /// Longest shortest directed path, or `None` when not strongly connected.
    pub fn diameter(&self) -> Option<usize> {
        let mut diam = 0;
        for s in 0..self.n {
            for d in self.bfs_depths(s) {
                diam = diam.max(d?);
            }
        }
        Some(diam)
    }

    fn bfs_depths(&self, source: usize) -> Vec<Option<usize>> {
        let mut depth = vec![None; self.n];
        depth[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = depth[u].unwrap_or(0);
            for &v in &self.out_nbrs[u] {
                if depth[v].is_none() {
                    depth[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    /// One `from to` pair per line.
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Parses the `from to` edge-list format. Blank lines and `#` comments are
    /// skipped. When `n` is `None` the agent count is one past the largest index.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: &str| GraphError::Parse { line: lineno + 1, msg: msg.to_string() };
            let mut it = line.split_whitespace();
            let from: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("expected `from to`"))?;
            let to: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| parse_err("expected `from to`"))?;
            if it.next().is_some() {
                return Err(parse_err("trailing tokens"));
            }
            edges.push((from, to));
        }
        let n = n.unwrap_or_else(|| edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1));
        Self::from_edge_list(n, &edges)
    }

    /// Metropolis–Hastings weights for undirected graphs, uniform row weights
    /// `1/(|in_neighbors(i)| + 1)` otherwise.
    pub fn consensus_weights(&self) -> WeightMatrix {
        match self.metropolis_weights() {
            Ok(w) => w,
            Err(_) => self.uniform_weights(),
        }
    }

    pub fn metropolis_weights(&self) -> Result<WeightMatrix, GraphError> {
        for (a, b) in self.edges() {
            if !self.out_nbrs[b].contains(&a) {
                return Err(GraphError::Directed { from: a, to: b });
            }
        }
        let n = self.n;
        let deg: Vec<usize> = self.in_nbrs.iter().map(BTreeSet::len).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let mut off = 0.0;
            for &j in &self.in_nbrs[i] {
                let w = 1.0 / (1 + deg[i].max(deg[j])) as f64;
                data[i * n + j] = w;
                off += w;
            }
            data[i * n + i] = 1.0 - off;
        }
        Ok(WeightMatrix { n, data })
    }

    /// Row-stochastic weights for directed graphs.
    pub fn uniform_weights(&self) -> WeightMatrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let w = 1.0 / (self.in_nbrs[i].len() + 1) as f64;
            data[i * n + i] = w;
            for &j in &self.in_nbrs[i] {
                data[i * n + j] = w;
            }
        }
        WeightMatrix { n, data }
    }
}

/// Dense `n × n` consensus matrix; `a_ij > 0` only for `j = i` or `j` an
/// in-neighbor of `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Nonzero entries of row `i` keyed by column, including the diagonal.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        self.row(i).iter().copied().enumerate().filter(|&(j, w)| w != 0.0 || j == i).collect()
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n).map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_col_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|j| ((0..self.n).map(|i| self.get(i, j)).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.data.iter().all(|&w| w >= 0.0) && self.max_row_sum_error() <= STOCHASTIC_TOL
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        self.is_row_stochastic() && self.max_col_sum_error() <= STOCHASTIC_TOL
    }

    /// `A v`, summing each row in ascending column order.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length must match matrix size");
        (0..self.n).map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum()).collect()
    }

    /// CSV with `n` rows of `n` comma-separated weights.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|w| format!("{w:?}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// The 6-agent directed example network used throughout the docs: agent 1 has
/// in-neighbors {2, 3} and the single out-neighbor 3.
pub fn example_network() -> Graph {
    Graph::from_edge_list(6, &[(0, 2), (2, 1), (3, 1), (1, 3), (3, 0), (3, 4), (4, 5), (5, 0)])
        .expect("static edge list is valid")
}
