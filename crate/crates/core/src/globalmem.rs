//! Stored groups of past-batch representations and weights, concatenated with
//! the current batch during reweighting and refreshed by momentum updates.

use crate::error::{Error, Result};
use crate::numcore::Dense2D;

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMemory {
    batch_size: usize,
    d: usize,
    z_groups: Vec<Dense2D>,
    w_groups: Vec<Vec<f64>>,
    gammas: Vec<f64>,
}

/// `k` groups of zero representations with unit weights. `gammas` must hold
/// one coefficient per group, each in `[0, 1)`.
pub fn init_memory(k: usize, batch_size: usize, d: usize, gammas: &[f64]) -> Result<GlobalMemory> {
    if batch_size == 0 || d == 0 {
        return Err(Error::Domain(format!("batch_size and d must be positive, got {batch_size} and {d}")));
    }
    if gammas.len() != k {
        return Err(Error::Shape(format!("{} momentum coefficients for {k} groups", gammas.len())));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0 && **g < 1.0)) {
        return Err(Error::Domain(format!("momentum coefficient {g} outside [0, 1)")));
    }
    Ok(GlobalMemory {
        batch_size,
        d,
        z_groups: vec![Dense2D::zeros(batch_size, d); k],
        w_groups: vec![vec![1.0; batch_size]; k],
        gammas: gammas.to_vec(),
    })
}

impl GlobalMemory {
    pub fn k_groups(&self) -> usize {
        self.gammas.len()
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn z_groups(&self) -> &[Dense2D] {
        &self.z_groups
    }

    pub fn w_groups(&self) -> &[Vec<f64>] {
        &self.w_groups
    }

    /// Replaces stored state, e.g. from a checkpoint. Shapes must match.
    pub fn restore(&mut self, z_groups: Vec<Dense2D>, w_groups: Vec<Vec<f64>>) -> Result<()> {
        if z_groups.len() != self.k_groups() || w_groups.len() != self.k_groups() {
            return Err(Error::Shape(format!(
                "restoring {} / {} groups into memory of {}",
                z_groups.len(),
                w_groups.len(),
                self.k_groups()
            )));
        }
        for (z, w) in z_groups.iter().zip(&w_groups) {
            self.check_local(z, w)?;
        }
        self.z_groups = z_groups;
        self.w_groups = w_groups;
        Ok(())
    }

    fn check_local(&self, z: &Dense2D, w: &[f64]) -> Result<()> {
        if z.rows() != self.batch_size || z.cols() != self.d || w.len() != self.batch_size {
            return Err(Error::Shape(format!(
                "local batch {}x{} with {} weights, memory expects {}x{}",
                z.rows(),
                z.cols(),
                w.len(),
                self.batch_size,
                self.d
            )));
        }
        Ok(())
    }

    /// Stacks groups `g1..gK` then the local batch.
    pub fn concat(&self, z_local: &Dense2D, w_local: &[f64]) -> Result<(Dense2D, Vec<f64>)> {
        self.check_local(z_local, w_local)?;
        let mut blocks: Vec<&Dense2D> = self.z_groups.iter().collect();
        blocks.push(z_local);
        let z_hat = Dense2D::vstack(&blocks)?;
        let mut w_hat = Vec::with_capacity((self.k_groups() + 1) * self.batch_size);
        for w in &self.w_groups {
            w_hat.extend_from_slice(w);
        }
        w_hat.extend_from_slice(w_local);
        Ok((z_hat, w_hat))
    }

    /// `stored <- gamma * stored + (1 - gamma) * local` for every group.
    pub fn momentum_update(&mut self, z_local: &Dense2D, w_local: &[f64]) -> Result<()> {
        self.check_local(z_local, w_local)?;
        for ((z, w), &g) in self.z_groups.iter_mut().zip(&mut self.w_groups).zip(&self.gammas) {
            for (s, l) in z.values_mut().iter_mut().zip(z_local.values()) {
                *s = g * *s + (1.0 - g) * l;
            }
            for (s, l) in w.iter_mut().zip(w_local) {
                *s = g * *s + (1.0 - g) * l;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn local(rows: usize, cols: usize, base: f64) -> Dense2D {
        Dense2D::new(rows, cols, (0..rows * cols).map(|i| base + i as f64 * 0.25).collect()).unwrap()
    }

    #[test]
    fn init_contract() {
        let m = init_memory(1, 4, 8, &[0.9]).unwrap();
        assert_eq!(m.z_groups()[0], Dense2D::zeros(4, 8));
        assert_eq!(m.w_groups()[0], vec![1.0; 4]);
        assert!(init_memory(1, 4, 8, &[1.0]).is_err());
        assert!(init_memory(1, 4, 8, &[-0.1]).is_err());
        assert!(init_memory(2, 4, 8, &[0.5]).is_err());
        assert!(init_memory(0, 0, 8, &[]).is_err());
    }

    #[test]
    fn empty_memory_concat_is_identity() {
        let m = init_memory(0, 3, 2, &[]).unwrap();
        let z = local(3, 2, 1.0);
        let (zh, wh) = m.concat(&z, &[0.5, 1.0, 1.5]).unwrap();
        assert_eq!(zh, z);
        assert_eq!(wh, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn concat_order() {
        let mut m = init_memory(2, 3, 2, &[0.0, 0.5]).unwrap();
        m.momentum_update(&local(3, 2, 7.0), &[2.0; 3]).unwrap();
        let z = local(3, 2, -1.0);
        let (zh, wh) = m.concat(&z, &[0.5; 3]).unwrap();
        assert_eq!(zh.rows(), 9);
        assert_eq!(zh.slice_rows(0, 3).unwrap(), local(3, 2, 7.0));
        assert_eq!(zh.slice_rows(6, 9).unwrap(), z);
        assert_eq!(&wh[..3], &[2.0; 3]);
        assert_eq!(&wh[3..6], &[1.5; 3]);
        assert_eq!(&wh[6..], &[0.5; 3]);
        assert!(m.concat(&local(2, 2, 0.0), &[1.0; 2]).is_err());
    }

    #[test]
    fn update_examples() {
        let mut m = init_memory(1, 1, 1, &[0.9]).unwrap();
        m.momentum_update(&Dense2D::scalar(1.0), &[1.0]).unwrap();
        assert!((m.z_groups()[0].item().unwrap() - 0.1).abs() < 1e-15);

        let mut m = init_memory(1, 2, 2, &[0.0]).unwrap();
        let z = local(2, 2, 3.0);
        m.momentum_update(&z, &[0.5, 1.5]).unwrap();
        assert_eq!(m.z_groups()[0], z);
        assert_eq!(m.w_groups()[0], vec![0.5, 1.5]);

        let before = m.clone();
        let mut m2 = m.clone();
        m2.gammas = vec![0.7];
        m2.momentum_update(&z, &[0.5, 1.5]).unwrap();
        assert_eq!(m2.z_groups, before.z_groups);
    }

    #[test]
    fn gap_contracts_by_gamma() {
        for gamma in [0.0, 0.5, 0.9] {
            let mut m = init_memory(1, 4, 3, &[gamma]).unwrap();
            let z = local(4, 3, -2.0);
            let gap = |m: &GlobalMemory| {
                let d = m.z_groups()[0].max_abs_diff(&z);
                let dw = m.w_groups()[0].iter().map(|w| (w - 0.5).abs()).fold(0.0, f64::max);
                (d, dw)
            };
            let mut prev = gap(&m);
            for _ in 0..20 {
                m.momentum_update(&z, &[0.5; 4]).unwrap();
                let cur = gap(&m);
                assert!((cur.0 - gamma * prev.0).abs() < 1e-12);
                assert!((cur.1 - gamma * prev.1).abs() < 1e-12);
                prev = cur;
            }
        }
    }

    proptest! {
        #[test]
        fn update_is_convex_combination(
            stored in prop::collection::vec(-10.0f64..10.0, 6),
            loc in prop::collection::vec(-10.0f64..10.0, 6),
            gamma in 0.0f64..0.999,
        ) {
            let mut m = init_memory(1, 3, 2, &[gamma]).unwrap();
            m.momentum_update(&Dense2D::new(3, 2, stored.clone()).unwrap(), &[1.0; 3]).unwrap();
            m.gammas = vec![gamma];
            // force exact stored contents
            m.z_groups[0] = Dense2D::new(3, 2, stored.clone()).unwrap();
            m.momentum_update(&Dense2D::new(3, 2, loc.clone()).unwrap(), &[1.0; 3]).unwrap();
            for ((s, l), v) in stored.iter().zip(&loc).zip(m.z_groups()[0].values()) {
                prop_assert!(*v >= s.min(*l) - 1e-12 && *v <= s.max(*l) + 1e-12);
            }
        }

        #[test]
        fn concat_then_drop_recovers_local(vals in prop::collection::vec(-5.0f64..5.0, 8), k in 0usize..3) {
            let m = init_memory(k, 4, 2, &vec![0.9; k]).unwrap();
            let z = Dense2D::new(4, 2, vals).unwrap();
            let w = [0.25, 0.75, 1.0, 2.0];
            let (zh, wh) = m.concat(&z, &w).unwrap();
            prop_assert_eq!(zh.slice_rows(4 * k, 4 * (k + 1)).unwrap(), z);
            prop_assert_eq!(&wh[4 * k..], &w[..]);
        }
    }
}
