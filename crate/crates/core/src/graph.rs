//! Graph-derived metric spaces: shortest-path and effective-resistance
//! distances on undirected, unweighted graphs, feeding the weighting
//! pipeline. Weightings of graph metric spaces are not guaranteed to exist,
//! so the solve returns a structured outcome rather than an error.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::approx::{scatter_report, ScatterReport};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::scalar::Real;
use crate::space::{DistanceMatrix, DistanceSource, ScaleParameter};
use crate::weighting::{similarity_matrix, weighting_vector, WeightingVector};

/// Undirected, unweighted simple graph.
#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph { reason: "graph has no nodes".into() });
        }
        let mut adj = vec![Vec::new(); node_count];
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph { reason: format!("edge ({u},{v}) out of range") });
            }
            if u == v {
                return Err(Error::InvalidGraph { reason: format!("self-loop at {u}") });
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph { reason: format!("parallel edge ({u},{v})") });
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Ok(Self { node_count, edges, adj })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Connected components as sorted node lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.node_count];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for start in 0..self.node_count {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut queue = std::collections::VecDeque::from([start]);
            comp[start] = id;
            let mut members = vec![start];
            while let Some(u) = queue.pop_front() {
                for &v in &self.adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    fn require_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() > 1 {
            let summary = comps
                .iter()
                .map(|c| {
                    if c.len() <= 6 {
                        format!("{c:?}")
                    } else {
                        format!("[{}..; {} nodes]", c[0], c.len())
                    }
                })
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::DisconnectedGraph { summary });
        }
        Ok(())
    }

    /// BFS hop distances from one source.
    fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Choice of graph metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMetric {
    ShortestPath,
    #[default]
    Resistance,
}

/// All-pairs shortest-path hop distances.
pub fn shortest_path_metric<T: Real>(g: &Graph) -> Result<DistanceMatrix<T>> {
    g.require_connected()?;
    let n = g.node_count();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let d = g.bfs(i);
        for j in 0..n {
            m[(i, j)] = T::from_usize(d[j]).unwrap();
        }
    }
    Ok(DistanceMatrix::from_graph(m))
}

/// Effective resistance distance `r(i,j) = Lp_ii + Lp_jj - 2 Lp_ij`, where
/// `Lp` is the Laplacian pseudoinverse. The pseudoinverse is computed by
/// deflation: `Lp = (L + J/n)^{-1} - J/n`, which only needs an SPD solve.
pub fn resistance_metric<T: Real>(g: &Graph) -> Result<DistanceMatrix<T>> {
    g.require_connected()?;
    let n = g.node_count();
    let nf = T::from_usize(n).unwrap();
    let jn = T::one() / nf;
    let mut m = Mat::zeros(n, n);
    for v in 0..n {
        m[(v, v)] = T::from_usize(g.degree(v)).unwrap() + jn;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] += jn;
            }
        }
    }
    for &(u, v) in g.edges() {
        m[(u, v)] -= T::one();
        m[(v, u)] -= T::one();
    }
    let lp = {
        let mut inv = Cholesky::factor(m)?.inverse();
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] -= jn;
            }
        }
        inv
    };
    let mut r = Mat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (lp[(i, i)] + lp[(j, j)] - lp[(i, j)] - lp[(j, i)]).max(T::zero());
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(DistanceMatrix::from_graph(r))
}

impl<T: Real> DistanceMatrix<T> {
    fn from_graph(m: Mat<T>) -> Self {
        DistanceMatrix::from_parts(m, DistanceSource::Graph)
    }
}

/// Outcome of a graph weighting attempt: graph similarity matrices can be
/// singular or indefinite, which is a first-class result, not a crash.
#[derive(Debug, Clone)]
pub enum GraphWeighting<T> {
    Solved(WeightingVector<T>),
    Singular(SingularGraphReport<T>),
}

/// Why the solve failed and what scale would guarantee success.
#[derive(Debug, Clone)]
pub struct SingularGraphReport<T> {
    /// Scatter analysis at the attempted scale.
    pub scatter: ScatterReport<T>,
    /// Scale above which the space is scattered and the solve must succeed.
    pub suggested_t: Option<T>,
    /// The offending pivot from the factorization.
    pub pivot: f64,
}

/// Builds the similarity matrix of the chosen graph metric at scale `t` and
/// attempts the weighting solve.
pub fn graph_weighting<T: Real>(
    g: &Graph,
    metric: GraphMetric,
    t: ScaleParameter<T>,
) -> Result<GraphWeighting<T>> {
    let dist = match metric {
        GraphMetric::ShortestPath => shortest_path_metric(g)?,
        GraphMetric::Resistance => resistance_metric(g)?,
    };
    let zeta = similarity_matrix(&dist, t);
    match weighting_vector(&zeta) {
        Ok(w) => Ok(GraphWeighting::Solved(w)),
        Err(Error::SingularMatrix { pivot, .. }) => {
            let scatter = scatter_report(&dist, t);
            let suggested_t = scatter.t_required;
            Ok(GraphWeighting::Singular(SingularGraphReport { scatter, suggested_t, pivot }))
        }
        Err(e) => Err(e),
    }
}

/// Seeded Erdos-Renyi graph G(n, p); each unordered pair is an edge
/// independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("edge probability {p} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges)
}

/// Complete graph on n nodes.
pub fn complete_graph(n: usize) -> Result<Graph> {
    let edges = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    Graph::new(n, edges)
}
