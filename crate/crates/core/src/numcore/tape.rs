//! Reverse-mode differentiation over an explicitly recorded operation tape.
//!
//! Every operation appends a node whose operands have smaller indices, so
//! tape order is a topological order and the backward sweep simply walks the
//! tape from the root towards index zero. A tape is built fresh for each
//! forward pass and dropped afterwards.

use std::rc::Rc;

use super::dense::{count_multiply_adds, gemm_acc, Dense2D};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Compressed neighbor lists: neighbors of node `v` are
/// `neighbors[offsets[v]..offsets[v + 1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Adjacency {
    /// Builds symmetric neighbor lists from undirected edges over `n` nodes.
    pub fn from_undirected(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        Self { offsets, neighbors }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sum(Var),
    /// `(1 + eps) * h_v + sum of h_u over neighbors u of v`.
    Aggregate { input: Var, eps: Var, adjacency: Rc<Adjacency> },
    /// Row `s` of the output sums input rows `offsets[s]..offsets[s + 1]`.
    SegmentSum { input: Var, offsets: Rc<Vec<usize>> },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, weights: Vec<f64>, probs: Dense2D },
}

#[derive(Debug)]
struct Node {
    value: Dense2D,
    grad: Option<Dense2D>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Dense2D, op: Op) -> Var {
        self.nodes.push(Node { value, grad: None, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Dense2D) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Dense2D {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of `v`; zeros if no backward pass reached it.
    pub fn grad(&self, v: Var) -> Dense2D {
        let node = &self.nodes[v.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Dense2D::zeros(node.value.rows(), node.value.cols()))
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// Adds the `1 x cols` row `bias` to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::dims("add_row_bias", xv.shape(), bv.shape()));
        }
        let mut out = xv.clone();
        let cols = out.cols();
        for row in out.values_mut().chunks_mut(cols) {
            row.iter_mut().zip(bv.values()).for_each(|(o, b)| *o += b);
        }
        Ok(self.push(out, Op::AddRowBias(x, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dims("add", av.shape(), bv.shape()));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dims("mul", av.shape(), bv.shape()));
        }
        let mut out = av.clone();
        out.values_mut().iter_mut().zip(bv.values()).for_each(|(o, b)| *o *= b);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.scale_in_place(s);
        self.push(out, Op::Scale(a, s))
    }

    /// Elementwise `max(0, x)`; NaN stays NaN so divergence is not masked.
    /// The backward pass sends zero gradient where `x <= 0`.
    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.values_mut().iter_mut().filter(|v| **v < 0.0).for_each(|v| *v = 0.0);
        self.push(out, Op::Relu(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).values().iter().sum();
        self.push(Dense2D::scalar(s), Op::Sum(a))
    }

    /// GIN neighborhood aggregation with a learnable `1 x 1` self-weight `eps`.
    pub fn aggregate(&mut self, input: Var, eps: Var, adjacency: Rc<Adjacency>) -> Result<Var> {
        let h = self.value(input);
        let e = self
            .value(eps)
            .item()
            .ok_or_else(|| Error::Shape("eps must be 1x1".into()))?;
        if adjacency.num_nodes() != h.rows() {
            return Err(Error::dims("aggregate", h.shape(), (adjacency.num_nodes(), h.cols())));
        }
        let mut out = h.clone();
        out.scale_in_place(1.0 + e);
        let cols = h.cols();
        for v in 0..h.rows() {
            let nbrs = adjacency.neighbors(v);
            count_multiply_adds((nbrs.len() * cols) as u64);
            let dst = &mut out.values_mut()[v * cols..(v + 1) * cols];
            for &u in nbrs {
                dst.iter_mut().zip(h.row(u)).for_each(|(d, s)| *d += s);
            }
        }
        Ok(self.push(out, Op::Aggregate { input, eps, adjacency }))
    }

    /// Sums contiguous row segments; `offsets` has one more entry than the
    /// number of segments and ends at the input row count.
    pub fn segment_sum(&mut self, input: Var, offsets: Rc<Vec<usize>>) -> Result<Var> {
        let h = self.value(input);
        if offsets.len() < 2
            || offsets[0] != 0
            || *offsets.last().unwrap() != h.rows()
            || offsets.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Shape(format!(
                "segment offsets {:?} do not partition {} rows",
                offsets,
                h.rows()
            )));
        }
        let segs = offsets.len() - 1;
        let mut out = Dense2D::zeros(segs, h.cols());
        for s in 0..segs {
            let dst = out.row_mut(s);
            for r in offsets[s]..offsets[s + 1] {
                dst.iter_mut().zip(h.row(r)).for_each(|(d, x)| *d += x);
            }
        }
        Ok(self.push(out, Op::SegmentSum { input, offsets }))
    }

    /// `(1/B) * sum_n weights[n] * CE(softmax(logits[n]), labels[n])`.
    /// Weights are constants for the backward pass.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], weights: &[f64]) -> Result<Var> {
        let lv = self.value(logits);
        let (b, c) = lv.shape();
        if labels.len() != b || weights.len() != b {
            return Err(Error::Shape(format!(
                "cross entropy on {b} rows with {} labels and {} weights",
                labels.len(),
                weights.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::Index(format!("label {bad} outside [0, {c})")));
        }
        let mut probs = Dense2D::zeros(b, c);
        let mut loss = 0.0;
        for n in 0..b {
            let row = lv.row(n);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = max + z.ln();
            for (p, v) in probs.row_mut(n).iter_mut().zip(row) {
                *p = (v - log_z).exp();
            }
            loss += weights[n] * (log_z - row[labels[n]]);
        }
        loss /= b as f64;
        Ok(self.push(
            Dense2D::scalar(loss),
            Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), weights: weights.to_vec(), probs },
        ))
    }

    /// Propagates d(root)/d(node) to every node reachable from `root` and adds
    /// it to the stored gradients. Calling twice without [`Tape::zero_grad`]
    /// accumulates.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 root, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut adj: Vec<Option<Dense2D>> = (0..=root.0).map(|_| None).collect();
        adj[root.0] = Some(Dense2D::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&g),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Dense2D, adj: &mut [Option<Dense2D>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                gemm_acc(g, false, bv, true, slot(adj, *a, av));
                gemm_acc(av, true, g, false, slot(adj, *b, bv));
            }
            Op::AddRowBias(x, bias) => {
                slot(adj, *x, self.value(*x)).add_assign(g);
                let db = slot(adj, *bias, self.value(*bias));
                let cols = g.cols();
                for row in g.values().chunks(cols) {
                    db.values_mut().iter_mut().zip(row).for_each(|(d, v)| *d += v);
                }
            }
            Op::Add(a, b) => {
                slot(adj, *a, self.value(*a)).add_assign(g);
                slot(adj, *b, self.value(*b)).add_assign(g);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = slot(adj, *a, av);
                for ((d, gv), y) in da.values_mut().iter_mut().zip(g.values()).zip(bv.values()) {
                    *d += gv * y;
                }
                let db = slot(adj, *b, bv);
                for ((d, gv), x) in db.values_mut().iter_mut().zip(g.values()).zip(av.values()) {
                    *d += gv * x;
                }
            }
            Op::Scale(a, s) => {
                let da = slot(adj, *a, self.value(*a));
                da.values_mut().iter_mut().zip(g.values()).for_each(|(d, gv)| *d += s * gv);
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                let da = slot(adj, *a, av);
                for ((d, gv), x) in da.values_mut().iter_mut().zip(g.values()).zip(av.values()) {
                    if *x > 0.0 {
                        *d += gv;
                    }
                }
            }
            Op::Sum(a) => {
                let s = g.values()[0];
                let da = slot(adj, *a, self.value(*a));
                da.values_mut().iter_mut().for_each(|d| *d += s);
            }
            Op::Aggregate { input, eps, adjacency } => {
                let h = self.value(*input);
                let e = self.value(*eps).values()[0];
                let cols = h.cols();
                let deps: f64 = g.values().iter().zip(h.values()).map(|(a, b)| a * b).sum();
                slot(adj, *eps, self.value(*eps)).values_mut()[0] += deps;
                let dh = slot(adj, *input, h);
                count_multiply_adds((adjacency.neighbors.len() * cols) as u64);
                for v in 0..h.rows() {
                    let dst = &mut dh.values_mut()[v * cols..(v + 1) * cols];
                    dst.iter_mut().zip(g.row(v)).for_each(|(d, gv)| *d += (1.0 + e) * gv);
                    // symmetric adjacency: d out_u / d h_v = 1 for every neighbor u of v
                    for &u in adjacency.neighbors(v) {
                        dst.iter_mut().zip(g.row(u)).for_each(|(d, gv)| *d += gv);
                    }
                }
            }
            Op::SegmentSum { input, offsets } => {
                let dh = slot(adj, *input, self.value(*input));
                for s in 0..offsets.len() - 1 {
                    for r in offsets[s]..offsets[s + 1] {
                        dh.row_mut(r).iter_mut().zip(g.row(s)).for_each(|(d, gv)| *d += gv);
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, labels, weights, probs } => {
                let scale = g.values()[0] / labels.len() as f64;
                let dl = slot(adj, *logits, self.value(*logits));
                for (n, (&label, &w)) in labels.iter().zip(weights).enumerate() {
                    let coeff = scale * w;
                    if coeff == 0.0 {
                        continue;
                    }
                    let row = dl.row_mut(n);
                    for (c, (d, p)) in row.iter_mut().zip(probs.row(n)).enumerate() {
                        let target = if c == label { 1.0 } else { 0.0 };
                        *d += coeff * (p - target);
                    }
                }
            }
        }
    }
}

fn slot<'a>(adj: &'a mut [Option<Dense2D>], v: Var, like: &Dense2D) -> &'a mut Dense2D {
    adj[v.0].get_or_insert_with(|| Dense2D::zeros(like.rows(), like.cols()))
}
