//! Sum over dimension pairs of squared Frobenius norms of weighted partial
//! cross-covariances, and its exact gradient with respect to the weights.
//!
//! With `F`, `G` the `N x dQ` liftings of every dimension, `D_w` the diagonal
//! weight matrix and `H` the centering matrix, all pair covariances are blocks
//! of `C = (H D_w F)^T (H D_w G) / (N - 1)`. Writing `A = H D_w F`,
//! `B = H D_w G` and `M` for `C` with non-pair blocks zeroed, the objective is
//! `sum(M * C)` and its weight gradient is
//! `dJ/dw_n = 2/(N-1) * ((F M)_n . B_n + (A M)_n . G_n)`.

use super::rff::FeatureMaps;
use crate::error::{Error, Result};
use crate::numcore::Dense2D;

/// Objective for a fixed representation matrix and fixed feature maps.
#[derive(Clone, Debug)]
pub struct DecorrelationObjective {
    lifted_f: Dense2D,
    lifted_g: Dense2D,
    width: usize,
    dims: usize,
    pairs: Vec<(usize, usize)>,
}

fn weighted_centered(m: &Dense2D, w: &[f64]) -> Dense2D {
    let n = m.rows();
    let mut out = m.clone();
    for (r, &wr) in w.iter().enumerate() {
        out.row_mut(r).iter_mut().for_each(|v| *v *= wr);
    }
    for c in 0..m.cols() {
        let mean = (0..n).map(|r| out.get(r, c)).sum::<f64>() / n as f64;
        for r in 0..n {
            out.set(r, c, out.get(r, c) - mean);
        }
    }
    out
}

impl DecorrelationObjective {
    pub fn new(z: &Dense2D, maps: &FeatureMaps, pairs: &[(usize, usize)]) -> Result<Self> {
        if z.rows() < 2 {
            return Err(Error::Domain(format!("need at least 2 samples, got {}", z.rows())));
        }
        let d = z.cols();
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= j || j >= d) {
            return Err(Error::Index(format!("pair ({i}, {j}) must satisfy i < j < {d}")));
        }
        let (lifted_f, lifted_g) = maps.lift(z)?;
        Ok(Self { lifted_f, lifted_g, width: maps.width(), dims: d, pairs: pairs.to_vec() })
    }

    pub fn num_samples(&self) -> usize {
        self.lifted_f.rows()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn check_weights(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.num_samples() {
            return Err(Error::Shape(format!("{} weights for {} samples", w.len(), self.num_samples())));
        }
        Ok(())
    }

    fn cross(&self, a: &Dense2D, b: &Dense2D) -> Result<Dense2D> {
        let mut c = a.transpose().matmul(b)?;
        c.scale_in_place(1.0 / (self.num_samples() - 1) as f64);
        Ok(c)
    }

    fn pair_sum(&self, c: &Dense2D) -> f64 {
        let q = self.width;
        let mut total = 0.0;
        for &(i, j) in &self.pairs {
            for p in 0..q {
                for r in 0..q {
                    let v = c.get(i * q + p, j * q + r);
                    total += v * v;
                }
            }
        }
        total
    }

    /// Weighted partial cross-covariance block for dimensions `(i, j)`.
    pub fn pair_cov(&self, w: &[f64], i: usize, j: usize) -> Result<Dense2D> {
        self.check_weights(w)?;
        if i >= self.dims || j >= self.dims {
            return Err(Error::Index(format!("pair ({i}, {j}) outside {} dims", self.dims)));
        }
        let c = self.cross(&weighted_centered(&self.lifted_f, w), &weighted_centered(&self.lifted_g, w))?;
        let q = self.width;
        let mut block = Dense2D::zeros(q, q);
        for p in 0..q {
            for r in 0..q {
                block.set(p, r, c.get(i * q + p, j * q + r));
            }
        }
        Ok(block)
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        self.check_weights(w)?;
        let c = self.cross(&weighted_centered(&self.lifted_f, w), &weighted_centered(&self.lifted_g, w))?;
        Ok(self.pair_sum(&c))
    }

    /// Objective value and its gradient with respect to every weight.
    pub fn value_and_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_weights(w)?;
        let a = weighted_centered(&self.lifted_f, w);
        let b = weighted_centered(&self.lifted_g, w);
        let c = self.cross(&a, &b)?;
        let value = self.pair_sum(&c);

        let q = self.width;
        let mut masked = Dense2D::zeros(c.rows(), c.cols());
        for &(i, j) in &self.pairs {
            for p in 0..q {
                for r in 0..q {
                    masked.set(i * q + p, j * q + r, c.get(i * q + p, j * q + r));
                }
            }
        }
        let fm = self.lifted_f.matmul(&masked)?;
        let am = a.matmul(&masked)?;
        let scale = 2.0 / (self.num_samples() - 1) as f64;
        let grad = (0..self.num_samples())
            .map(|n| {
                let t1: f64 = fm.row(n).iter().zip(b.row(n)).map(|(x, y)| x * y).sum();
                let t2: f64 = am.row(n).iter().zip(self.lifted_g.row(n)).map(|(x, y)| x * y).sum();
                scale * (t1 + t2)
            })
            .collect();
        Ok((value, grad))
    }
}

/// Sum of squared Frobenius norms of the weighted partial cross-covariance
/// over the given dimension pairs.
pub fn decorrelation_objective(z: &Dense2D, weights: &[f64], maps: &FeatureMaps, pairs: &[(usize, usize)]) -> Result<f64> {
    DecorrelationObjective::new(z, maps, pairs)?.value(weights)
}

/// Gradient of `decorrelation_objective + l2_lambda * |w|^2` with respect to `w`.
pub fn objective_grad_weights(
    z: &Dense2D,
    weights: &[f64],
    maps: &FeatureMaps,
    pairs: &[(usize, usize)],
    l2_lambda: f64,
) -> Result<Vec<f64>> {
    let (_, mut grad) = DecorrelationObjective::new(z, maps, pairs)?.value_and_grad(weights)?;
    grad.iter_mut().zip(weights).for_each(|(g, w)| *g += 2.0 * l2_lambda * w);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorrelation::{sample_pairs, weighted_partial_cov};
    use crate::seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_z(rng: &mut impl Rng, n: usize, d: usize) -> Dense2D {
        Dense2D::new(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn matches_pairwise_covariances() {
        let mut rng = seed::rng(9);
        let z = random_z(&mut rng, 12, 4);
        let w: Vec<f64> = (0..12).map(|_| rng.gen_range(0.2..1.8)).collect();
        let maps = FeatureMaps::sample_rff(4, 3, &mut rng).unwrap();
        let pairs = sample_pairs(4, 1.0, 0).unwrap();
        let FeatureMaps::Rff { f, g } = &maps else { unreachable!() };
        let expected: f64 = pairs
            .iter()
            .map(|&(i, j)| weighted_partial_cov(&z.column(i), &z.column(j), &w, &f[i], &g[j]).unwrap().frobenius_sq())
            .sum();
        let got = decorrelation_objective(&z, &w, &maps, &pairs).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn duplicate_rows_give_zero() {
        let mut rng = seed::rng(3);
        let row: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = Dense2D::from_rows(&vec![row; 8]).unwrap();
        let maps = FeatureMaps::sample_rff(5, 2, &mut rng).unwrap();
        let pairs = sample_pairs(5, 1.0, 0).unwrap();
        assert!(decorrelation_objective(&z, &[1.0; 8], &maps, &pairs).unwrap().abs() < 1e-25);
    }

    #[test]
    fn two_dims_is_single_pair() {
        let mut rng = seed::rng(4);
        let z = random_z(&mut rng, 10, 2);
        let maps = FeatureMaps::sample_rff(2, 1, &mut rng).unwrap();
        let FeatureMaps::Rff { f, g } = &maps else { unreachable!() };
        let c = weighted_partial_cov(&z.column(0), &z.column(1), &[1.0; 10], &f[0], &g[1]).unwrap();
        let v = decorrelation_objective(&z, &[1.0; 10], &maps, &[(0, 1)]).unwrap();
        assert!((v - c.frobenius_sq()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_pairs() {
        let z = Dense2D::zeros(4, 3);
        let maps = FeatureMaps::Identity { dims: 3 };
        assert!(decorrelation_objective(&z, &[1.0; 4], &maps, &[(1, 1)]).is_err());
        assert!(decorrelation_objective(&z, &[1.0; 4], &maps, &[(0, 3)]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seed::rng(21);
        let z = random_z(&mut rng, 16, 4);
        let w: Vec<f64> = (0..16).map(|_| rng.gen_range(0.5..1.5)).collect();
        let maps = FeatureMaps::sample_rff(4, 1, &mut rng).unwrap();
        let pairs = sample_pairs(4, 1.0, 0).unwrap();
        let grad = objective_grad_weights(&z, &w, &maps, &pairs, 0.3).unwrap();
        let total = |w: &[f64]| {
            decorrelation_objective(&z, w, &maps, &pairs).unwrap() + 0.3 * w.iter().map(|v| v * v).sum::<f64>()
        };
        for n in 0..16 {
            let mut plus = w.clone();
            plus[n] += 1e-6;
            let mut minus = w.clone();
            minus[n] -= 1e-6;
            let numeric = (total(&plus) - total(&minus)) / 2e-6;
            let denom = grad[n].abs().max(numeric.abs()).max(1e-8);
            assert!((grad[n] - numeric).abs() / denom < 1e-4, "n={n}: {} vs {numeric}", grad[n]);
        }
    }

    #[test]
    fn twin_samples_get_equal_gradients() {
        let mut rng = seed::rng(8);
        let half = random_z(&mut rng, 6, 3);
        let z = Dense2D::vstack(&[&half, &half]).unwrap();
        let wh: Vec<f64> = (0..6).map(|_| rng.gen_range(0.5..1.5)).collect();
        let w: Vec<f64> = wh.iter().chain(&wh).cloned().collect();
        let maps = FeatureMaps::sample_rff(3, 2, &mut rng).unwrap();
        let g = objective_grad_weights(&z, &w, &maps, &sample_pairs(3, 1.0, 0).unwrap(), 1.0).unwrap();
        for n in 0..6 {
            assert!((g[n] - g[n + 6]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_weights_give_nonzero_finite_gradient() {
        let mut rng = seed::rng(64);
        let z = random_z(&mut rng, 64, 4);
        let maps = FeatureMaps::sample_rff(4, 1, &mut rng).unwrap();
        let g = objective_grad_weights(&z, &[1.0; 64], &maps, &sample_pairs(4, 1.0, 0).unwrap(), 0.0).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
        assert!(g.iter().map(|v| v * v).sum::<f64>() > 0.0);
    }
}
