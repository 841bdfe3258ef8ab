//! Gaussian-kernel HSIC (biased V-statistic) with a permutation test. Used
//! only as an independent check on the random-feature objective.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsicEstimate {
    pub value: f64,
    /// Set when an input had zero spread; `value` is then 0.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    /// 95th percentile of the permuted statistics.
    pub threshold: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Median of pairwise absolute differences; `None` when all values coincide.
pub fn median_bandwidth(x: &[f64]) -> Option<f64> {
    let mut d: Vec<f64> = Vec::with_capacity(x.len() * (x.len().saturating_sub(1)) / 2);
    for (i, a) in x.iter().enumerate() {
        for b in &x[i + 1..] {
            d.push((a - b).abs());
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    (m > 0.0).then_some(m)
}

fn gram(x: &[f64], bw: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    let c = 1.0 / (2.0 * bw * bw);
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = (-(x[i] - x[j]).powi(2) * c).exp();
        }
    }
    k
}

/// `H K H` with `H = I - (1/N) 11^T`.
fn double_center(k: &mut [f64], n: usize) {
    let row_means: Vec<f64> = (0..n).map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // K is symmetric, so column means equal row means
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] += grand - row_means[i] - row_means[j];
        }
    }
}

struct Prepared {
    kc: Vec<f64>,
    l: Vec<f64>,
    n: usize,
}

fn prepare(x: &[f64], y: &[f64], bandwidth: Option<f64>) -> Result<Option<Prepared>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("HSIC inputs have {} and {} samples", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(Error::Domain(format!("HSIC needs at least 4 samples, got {}", x.len())));
    }
    if let Some(bw) = bandwidth {
        if !(bw > 0.0) {
            return Err(Error::Domain(format!("bandwidth must be positive, got {bw}")));
        }
    }
    let spread = |v: &[f64]| v.iter().any(|a| *a != v[0]);
    if !spread(x) || !spread(y) {
        return Ok(None);
    }
    let bx = bandwidth.or_else(|| median_bandwidth(x));
    let by = bandwidth.or_else(|| median_bandwidth(y));
    let (Some(bx), Some(by)) = (bx, by) else { return Ok(None) };
    let n = x.len();
    let mut kc = gram(x, bx);
    double_center(&mut kc, n);
    Ok(Some(Prepared { kc, l: gram(y, by), n }))
}

impl Prepared {
    /// `(1/N^2) tr(Kc L_perm)` where `L_perm[a][b] = L[perm[a]][perm[b]]`.
    fn statistic(&self, perm: Option<&[usize]>) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for a in 0..n {
            let pa = perm.map_or(a, |p| p[a]);
            let krow = &self.kc[a * n..(a + 1) * n];
            let lrow = &self.l[pa * n..(pa + 1) * n];
            total += match perm {
                None => krow.iter().zip(lrow).map(|(k, l)| k * l).sum::<f64>(),
                Some(p) => krow.iter().zip(p).map(|(k, &pb)| k * lrow[pb]).sum::<f64>(),
            };
        }
        total / (n * n) as f64
    }
}

/// Biased HSIC estimate `(1/N^2) tr(K H L H)` with Gaussian kernels. A
/// missing bandwidth is set per input by the median heuristic.
pub fn hsic_gaussian(x: &[f64], y: &[f64], bandwidth: Option<f64>) -> Result<HsicEstimate> {
    Ok(match prepare(x, y, bandwidth)? {
        None => HsicEstimate { value: 0.0, degenerate: true },
        Some(p) => HsicEstimate { value: p.statistic(None).max(0.0), degenerate: false },
    })
}

/// Compares HSIC against `permutations` shuffles of `y`; significant when the
/// observed statistic exceeds the 95th percentile of the shuffled ones.
pub fn hsic_permutation_test(
    x: &[f64],
    y: &[f64],
    bandwidth: Option<f64>,
    permutations: usize,
    rng_seed: u64,
) -> Result<PermutationTest> {
    if permutations == 0 {
        return Err(Error::Domain("need at least one permutation".into()));
    }
    let Some(p) = prepare(x, y, bandwidth)? else {
        return Ok(PermutationTest { statistic: 0.0, threshold: 0.0, p_value: 1.0, significant: false });
    };
    let statistic = p.statistic(None).max(0.0);
    let mut rng = seed::rng(rng_seed);
    let mut perm: Vec<usize> = (0..p.n).collect();
    let mut null: Vec<f64> = (0..permutations)
        .map(|_| {
            perm.shuffle(&mut rng);
            p.statistic(Some(&perm)).max(0.0)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    let idx = ((0.95 * permutations as f64).ceil() as usize).clamp(1, permutations) - 1;
    let threshold = null[idx];
    let exceed = null.iter().filter(|&&v| v >= statistic).count();
    Ok(PermutationTest {
        statistic,
        threshold,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        significant: statistic > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Direct `trace(K H L H) / N^2` with explicit matrices.
    fn naive(x: &[f64], y: &[f64], bx: f64, by: f64) -> f64 {
        let n = x.len();
        let k = gram(x, bx);
        let l = gram(y, by);
        let h = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64;
        let mul = |a: &dyn Fn(usize, usize) -> f64, b: &dyn Fn(usize, usize) -> f64| {
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = (0..n).map(|t| a(i, t) * b(t, j)).sum();
                }
            }
            out
        };
        let kh = mul(&|i, j| k[i * n + j], &h);
        let lh = mul(&|i, j| l[i * n + j], &h);
        let prod = mul(&|i, j| kh[i * n + j], &|i, j| lh[i * n + j]);
        (0..n).map(|i| prod[i * n + i]).sum::<f64>() / (n * n) as f64
    }

    #[test]
    fn matches_naive_trace() {
        let mut rng = seed::rng(1);
        let x: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v * v + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let v = hsic_gaussian(&x, &y, Some(0.8)).unwrap().value;
        assert!((v - naive(&x, &y, 0.8, 0.8)).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_degenerate_zero() {
        let y = [0.1, 0.5, -0.2, 0.9, 1.4];
        let h = hsic_gaussian(&[3.0; 5], &y, None).unwrap();
        assert_eq!(h, HsicEstimate { value: 0.0, degenerate: true });
        // explicit bandwidth: centering annihilates the constant kernel
        assert!(hsic_gaussian(&[3.0; 5], &y, Some(1.0)).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn identical_inputs_are_significant() {
        let mut rng = seed::rng(2);
        let x: Vec<f64> = (0..256).map(|_| rng.sample(StandardNormal)).collect();
        let t = hsic_permutation_test(&x, &x, None, 200, 3).unwrap();
        assert!(t.significant && t.statistic > t.threshold, "{t:?}");
    }

    #[test]
    fn independent_inputs_rarely_significant() {
        let mut rng = seed::rng(3);
        let mut rejections = 0;
        for trial in 0..100 {
            let x: Vec<f64> = (0..256).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..256).map(|_| rng.sample(StandardNormal)).collect();
            rejections += hsic_permutation_test(&x, &y, None, 200, trial).unwrap().significant as usize;
        }
        assert!(rejections <= 10, "{rejections} false rejections");
    }

    #[test]
    fn input_validation() {
        assert!(hsic_gaussian(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None).is_err());
        assert!(hsic_gaussian(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0], None).is_err());
        assert!(hsic_gaussian(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0], Some(0.0)).is_err());
    }

    #[test]
    fn median_heuristic() {
        assert_eq!(median_bandwidth(&[0.0, 1.0, 3.0]), Some(2.0));
        assert_eq!(median_bandwidth(&[2.0, 2.0]), None);
    }
}
