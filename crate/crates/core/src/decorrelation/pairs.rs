use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::seed;

/// Dimension pairs `(i, j)`, `i < j`, in lexicographic order. With
/// `fraction < 1` the pairs range over a random subset of `ceil(fraction * d)`
/// dimensions chosen from `seed`.
pub fn sample_pairs(d: usize, fraction: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!("pair fraction {fraction} outside (0, 1]")));
    }
    let dims: Vec<usize> = if fraction == 1.0 {
        (0..d).collect()
    } else {
        // guard against 0.2 * 10 = 2.0000000000000004 style round-up
        let k = ((fraction * d as f64) - 1e-9).ceil().max(0.0) as usize;
        if k < 2 {
            return Err(Error::Domain(format!(
                "fraction {fraction} of {d} dimensions leaves {k}, need at least 2"
            )));
        }
        let mut picked = sample(&mut seed::rng(seed), d, k).into_vec();
        picked.sort_unstable();
        picked
    };
    if dims.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 dimensions, got {}", dims.len())));
    }
    let mut pairs = Vec::with_capacity(dims.len() * (dims.len() - 1) / 2);
    for (a, &i) in dims.iter().enumerate() {
        for &j in &dims[a + 1..] {
            pairs.push((i, j));
        }
    }
    Ok(pairs)
}
