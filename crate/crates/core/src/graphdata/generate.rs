use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::graph::Graph;
use super::Dataset;
use crate::error::{Error, Result};
use crate::numcore::Dense2D;
use crate::seed::{self, stream};

/// One-hot degree width used by every triangle dataset, so larger test graphs
/// keep the training feature dimension. Degrees above the cap share the last bucket.
pub const DEGREE_CAP: usize = 32;
pub const TRIANGLE_CLASSES: usize = 10;
pub const MAX_ATTEMPTS_PER_GRAPH: usize = 100_000;
pub const EDGE_PROB_RANGE: (f64, f64) = (0.1, 0.5);

fn sample_edges(n: usize, edge_prob: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < edge_prob {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Erdős–Rényi graph with a single constant feature column.
pub fn gen_random_graph(n: usize, edge_prob: f64, rng_seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Domain("graph needs at least one node".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Domain(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = seed::rng(rng_seed);
    let edges = sample_edges(n, edge_prob, &mut rng);
    Graph::new(n, edges, Dense2D::filled(n, 1, 1.0), 0)
}

/// Brute-force triangle count over all node triples.
pub fn count_triangles(g: &Graph) -> usize {
    let a = g.adjacency_matrix();
    let n = g.num_nodes();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            if !a[i][j] {
                continue;
            }
            for k in j + 1..n {
                if a[i][k] && a[j][k] {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Triangle count over sorted edge lists, stopping once `limit` is exceeded.
fn count_triangles_upto(n: usize, edges: &[(usize, usize)], limit: usize) -> usize {
    let mut higher: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        higher[u].push(v);
    }
    let mut mark = vec![false; n];
    let mut count = 0;
    for u in 0..n {
        for &v in &higher[u] {
            mark[v] = true;
        }
        for &v in &higher[u] {
            count += higher[v].iter().filter(|&&w| mark[w]).count();
            if count > limit {
                return count;
            }
        }
        for &v in &higher[u] {
            mark[v] = false;
        }
    }
    count
}

pub fn one_hot_degree_features(g: &Graph, max_degree: usize) -> Dense2D {
    let mut x = Dense2D::zeros(g.num_nodes(), max_degree + 1);
    for (v, d) in g.degrees().into_iter().enumerate() {
        x.set(v, d.min(max_degree), 1.0);
    }
    x
}

/// Triangle-counting dataset: rejection-sampled Erdős–Rényi graphs with 1 to
/// 10 triangles, labelled `triangles - 1`, with one-hot degree features.
pub fn gen_triangles_dataset(count: usize, min_nodes: usize, max_nodes: usize, rng_seed: u64) -> Result<Dataset> {
    if count == 0 || min_nodes < 3 || min_nodes > max_nodes {
        return Err(Error::Domain(format!(
            "need count >= 1 and 3 <= min_nodes <= max_nodes, got count={count}, nodes {min_nodes}..={max_nodes}"
        )));
    }
    let mut graphs = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = seed::rng(seed::derive(rng_seed, stream::GRAPH, i as u64));
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS_PER_GRAPH {
            let n = rng.gen_range(min_nodes..=max_nodes);
            let p = rng.gen_range(EDGE_PROB_RANGE.0..EDGE_PROB_RANGE.1);
            let edges = sample_edges(n, p, &mut rng);
            let t = count_triangles_upto(n, &edges, TRIANGLE_CLASSES);
            if (1..=TRIANGLE_CLASSES).contains(&t) {
                accepted = Some((n, edges));
                break;
            }
        }
        let (n, edges) = accepted.ok_or_else(|| {
            Error::Generation(format!(
                "no graph with 1..={TRIANGLE_CLASSES} triangles after {MAX_ATTEMPTS_PER_GRAPH} attempts \
                 (graph {i}, nodes {min_nodes}..={max_nodes}, seed {rng_seed})"
            ))
        })?;
        let g = Graph::new(n, edges, Dense2D::filled(n, 1, 1.0), 0)?;
        let triangles = count_triangles(&g);
        debug_assert!((1..=TRIANGLE_CLASSES).contains(&triangles));
        let x = one_hot_degree_features(&g, DEGREE_CAP);
        graphs.push(g.with_features(x)?.with_label(triangles - 1));
    }
    Dataset::new(graphs, TRIANGLE_CLASSES)
}

/// Seven-segment strokes `(x0, y0, x1, y1)` in the unit square:
/// top, upper right, lower right, bottom, lower left, upper left, middle.
const SEGMENTS: [(f64, f64, f64, f64); 7] = [
    (0.2, 0.9, 0.8, 0.9),
    (0.8, 0.9, 0.8, 0.5),
    (0.8, 0.5, 0.8, 0.1),
    (0.2, 0.1, 0.8, 0.1),
    (0.2, 0.1, 0.2, 0.5),
    (0.2, 0.5, 0.2, 0.9),
    (0.2, 0.5, 0.8, 0.5),
];

/// Lit segments per digit, bit `s` for `SEGMENTS[s]`.
const DIGIT_SEGMENTS: [u8; 10] = [
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110, 0b1101101, 0b1111101, 0b0000111, 0b1111111,
    0b1101111,
];

pub const DIGIT_STROKE_RADIUS: f64 = 0.12;
pub const DIGIT_NEIGHBORS: usize = 5;

fn distance_to_segment(px: f64, py: f64, (x0, y0, x1, y1): (f64, f64, f64, f64)) -> f64 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let t = (((px - x0) * dx + (py - y0) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((px - x0 - t * dx).powi(2) + (py - y0 - t * dy).powi(2)).sqrt()
}

/// Super-pixel style digit graphs: nodes are random points in the unit
/// square with features `(x, y, intensity)`, intensity 1 near a lit stroke
/// of the seven-segment digit and 0 elsewhere; edges join each node to its
/// nearest neighbors. Label is the digit.
pub fn gen_digits_dataset(count: usize, min_nodes: usize, max_nodes: usize, rng_seed: u64) -> Result<Dataset> {
    if count == 0 || min_nodes <= DIGIT_NEIGHBORS || min_nodes > max_nodes {
        return Err(Error::Domain(format!(
            "need count >= 1 and {DIGIT_NEIGHBORS} < min_nodes <= max_nodes, got count={count}, nodes {min_nodes}..={max_nodes}"
        )));
    }
    let mut graphs = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = seed::rng(seed::derive(rng_seed, stream::GRAPH, i as u64));
        let digit = rng.gen_range(0..10usize);
        let n = rng.gen_range(min_nodes..=max_nodes);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
        let mut x = Dense2D::zeros(n, 3);
        for (v, &(px, py)) in pts.iter().enumerate() {
            let lit = SEGMENTS.iter().enumerate().any(|(s, &seg)| {
                DIGIT_SEGMENTS[digit] >> s & 1 == 1 && distance_to_segment(px, py, seg) < DIGIT_STROKE_RADIUS
            });
            x.row_mut(v).copy_from_slice(&[px, py, if lit { 1.0 } else { 0.0 }]);
        }
        let mut edges = Vec::new();
        for (v, &(px, py)) in pts.iter().enumerate() {
            let mut others: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .filter(|&(u, _)| u != v)
                .map(|(u, &(qx, qy))| ((px - qx).powi(2) + (py - qy).powi(2), u))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            edges.extend(others.iter().take(DIGIT_NEIGHBORS).map(|&(_, u)| (u.min(v), u.max(v))));
        }
        edges.sort_unstable();
        edges.dedup();
        graphs.push(Graph::new(n, edges, x, digit)?);
    }
    Dataset::new(graphs, 10)
}

/// Copy of `d` with i.i.d. `N(0, sigma^2)` added to every feature entry.
/// Edges and labels are untouched.
pub fn add_feature_noise(d: &Dataset, sigma: f64, rng_seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(d.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let graphs = d
        .graphs()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = seed::rng(seed::derive(rng_seed, stream::NOISE, i as u64));
            let mut x = g.features().clone();
            x.values_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            g.with_features(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(graphs, d.num_classes())
}
