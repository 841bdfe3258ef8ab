#![allow(dead_code)]

use oodgnn::graphdata::{gen_random_graph, Graph};
use oodgnn::numcore::Dense2D;
use oodgnn::seed;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Dense2D {
    Dense2D::new(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Erdos-Renyi graph with standard normal node features.
pub fn random_graph(n: usize, p: f64, width: usize, label: usize, s: u64) -> Graph {
    let g = gen_random_graph(n, p, s).unwrap();
    let x = gaussian(n, width, &mut seed::rng(s ^ 0xfeed));
    g.with_features(x).unwrap().with_label(label)
}

pub fn random_perm(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
