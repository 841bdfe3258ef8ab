use super::rff::RffBank;
use crate::error::{Error, Result};
use crate::numcore::Dense2D;

fn lift(z: &[f64], bank: &RffBank) -> Vec<Vec<f64>> {
    z.iter()
        .map(|&x| {
            let mut row = vec![0.0; bank.q()];
            bank.apply_into(x, &mut row);
            row
        })
        .collect()
}

fn check_inputs(zi: &[f64], zj: &[f64], weights: Option<&[f64]>, f: &RffBank, g: &RffBank) -> Result<()> {
    if zi.len() != zj.len() || weights.is_some_and(|w| w.len() != zi.len()) {
        return Err(Error::Shape(format!(
            "sample counts differ: {} and {}{}",
            zi.len(),
            zj.len(),
            weights.map_or(String::new(), |w| format!(" with {} weights", w.len()))
        )));
    }
    if zi.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {}", zi.len())));
    }
    if f.q() != g.q() {
        return Err(Error::Shape(format!("bank sizes differ: {} and {}", f.q(), g.q())));
    }
    Ok(())
}

/// Weighted partial cross-covariance between RFF liftings of two dimensions:
/// `1/(N-1) * sum_n (w_n f(zi_n) - fbar)^T (w_n g(zj_n) - gbar)` with
/// `fbar = (1/N) sum_m w_m f(zi_m)` and likewise `gbar`. The result is `Q x Q`.
pub fn weighted_partial_cov(zi: &[f64], zj: &[f64], weights: &[f64], f: &RffBank, g: &RffBank) -> Result<Dense2D> {
    check_inputs(zi, zj, Some(weights), f, g)?;
    let n = zi.len();
    let q = f.q();
    let fz = lift(zi, f);
    let gz = lift(zj, g);
    let mut fbar = vec![0.0; q];
    let mut gbar = vec![0.0; q];
    for s in 0..n {
        for p in 0..q {
            fbar[p] += weights[s] * fz[s][p];
            gbar[p] += weights[s] * gz[s][p];
        }
    }
    fbar.iter_mut().chain(gbar.iter_mut()).for_each(|v| *v /= n as f64);
    let mut c = Dense2D::zeros(q, q);
    for s in 0..n {
        for p in 0..q {
            let a = weights[s] * fz[s][p] - fbar[p];
            for r in 0..q {
                let b = weights[s] * gz[s][r] - gbar[r];
                c.values_mut()[p * q + r] += a * b;
            }
        }
    }
    c.scale_in_place(1.0 / (n - 1) as f64);
    Ok(c)
}

/// Unweighted partial cross-covariance `1/(N-1) * sum_n (f_n - fbar)^T (g_n - gbar)`.
pub fn partial_cov(zi: &[f64], zj: &[f64], f: &RffBank, g: &RffBank) -> Result<Dense2D> {
    check_inputs(zi, zj, None, f, g)?;
    let n = zi.len() as f64;
    let fz = Dense2D::from_rows(&lift(zi, f))?;
    let gz = Dense2D::from_rows(&lift(zj, g))?;
    let center = |m: &Dense2D| {
        let mut out = m.clone();
        for col in 0..m.cols() {
            let mean = m.column(col).iter().sum::<f64>() / n;
            for r in 0..m.rows() {
                out.set(r, col, m.get(r, col) - mean);
            }
        }
        out
    };
    let mut c = center(&fz).transpose().matmul(&center(&gz))?;
    c.scale_in_place(1.0 / (n - 1.0));
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    /// Scalar transcription of the weighted formula, entry by entry.
    fn oracle(zi: &[f64], zj: &[f64], w: &[f64], f: &RffBank, g: &RffBank, p: usize, r: usize) -> f64 {
        let n = zi.len();
        let fq = |x: f64| 2f64.sqrt() * (f.freqs()[p] * x + f.phases()[p]).cos();
        let gq = |x: f64| 2f64.sqrt() * (g.freqs()[r] * x + g.phases()[r]).cos();
        let mut total = 0.0;
        for a in 0..n {
            let mut fmean = 0.0;
            let mut gmean = 0.0;
            for m in 0..n {
                fmean += w[m] * fq(zi[m]);
                gmean += w[m] * gq(zj[m]);
            }
            total += (w[a] * fq(zi[a]) - fmean / n as f64) * (w[a] * gq(zj[a]) - gmean / n as f64);
        }
        total / (n - 1) as f64
    }

    #[test]
    fn matches_term_by_term_oracle() {
        let mut rng = seed::rng(77);
        for _ in 0..20 {
            let zi: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let zj: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..5).map(|_| rng.gen_range(0.1..2.0)).collect();
            let f = RffBank::sample(2, &mut rng).unwrap();
            let g = RffBank::sample(2, &mut rng).unwrap();
            let c = weighted_partial_cov(&zi, &zj, &w, &f, &g).unwrap();
            for p in 0..2 {
                for r in 0..2 {
                    assert!((c.get(p, r) - oracle(&zi, &zj, &w, &f, &g, p, r)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_weights_reduce_to_unweighted() {
        let mut rng = seed::rng(5);
        let zi: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let zj: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let f = RffBank::sample(3, &mut rng).unwrap();
        let g = RffBank::sample(3, &mut rng).unwrap();
        let weighted = weighted_partial_cov(&zi, &zj, &[1.0; 9], &f, &g).unwrap();
        assert!(weighted.max_abs_diff(&partial_cov(&zi, &zj, &f, &g).unwrap()) < 1e-12);
    }

    #[test]
    fn constant_column_gives_zero() {
        let mut rng = seed::rng(6);
        let zj: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let f = RffBank::sample(2, &mut rng).unwrap();
        let g = RffBank::sample(2, &mut rng).unwrap();
        let c = weighted_partial_cov(&[0.7; 6], &zj, &[1.0; 6], &f, &g).unwrap();
        assert!(c.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn too_few_samples() {
        let b = RffBank::new(vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(weighted_partial_cov(&[1.0], &[1.0], &[1.0], &b, &b), Err(Error::Domain(_))));
        assert!(matches!(weighted_partial_cov(&[1.0, 2.0], &[1.0], &[1.0, 1.0], &b, &b), Err(Error::Shape(_))));
    }
}
