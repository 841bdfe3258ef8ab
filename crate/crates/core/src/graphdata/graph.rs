use crate::error::{Error, Result};
use crate::numcore::{Adjacency, Dense2D};

/// Undirected labeled graph with dense node features.
///
/// Edges are stored canonically as `(u, v)` with `u < v`, sorted and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Dense2D,
    label: usize,
}

impl Graph {
    /// Validates and canonicalizes. Self-loops, out-of-range endpoints, a
    /// feature row count other than `num_nodes` and duplicate edges (in
    /// either orientation) are rejected.
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>, features: Dense2D, label: usize) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::Shape("graph needs at least one node".into()));
        }
        if features.rows() != num_nodes {
            return Err(Error::Shape(format!(
                "{num_nodes} nodes but {} feature rows",
                features.rows()
            )));
        }
        let mut canon = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::Shape(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Index(format!("edge ({u}, {v}) outside [0, {num_nodes})")));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Shape(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self { num_nodes, edges: canon, features, label })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Dense2D {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::from_undirected(self.num_nodes, &self.edges)
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let mut a = vec![vec![false; self.num_nodes]; self.num_nodes];
        for &(u, v) in &self.edges {
            a[u][v] = true;
            a[v][u] = true;
        }
        a
    }

    pub fn with_features(&self, features: Dense2D) -> Result<Self> {
        Graph::new(self.num_nodes, self.edges.clone(), features, self.label)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Domain("not a permutation of the node set".into()));
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut features = Dense2D::zeros(n, self.features.cols());
        for v in 0..n {
            features.row_mut(perm[v]).copy_from_slice(self.features.row(v));
        }
        Graph::new(n, edges, features, self.label)
    }

    /// Disjoint union; the result keeps this graph's label.
    pub fn disjoint_union(&self, other: &Graph) -> Result<Self> {
        let off = self.num_nodes;
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|&(u, v)| (u + off, v + off)));
        let features = Dense2D::vstack(&[&self.features, &other.features])?;
        Graph::new(off + other.num_nodes, edges, features, self.label)
    }
}
