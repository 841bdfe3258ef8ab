use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numcore::Dense2D;

/// `q` random cosine features `sqrt(2) cos(freq * x + phase)` with
/// `freq ~ N(0, 1)` and `phase ~ U[0, 2 pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RffBank {
    freqs: Vec<f64>,
    phases: Vec<f64>,
}

impl RffBank {
    pub fn new(freqs: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if freqs.is_empty() || freqs.len() != phases.len() {
            return Err(Error::Shape(format!(
                "bank needs q >= 1 matching frequencies and phases, got {} and {}",
                freqs.len(),
                phases.len()
            )));
        }
        if let Some(p) = phases.iter().find(|p| !(0.0..2.0 * PI).contains(*p)) {
            return Err(Error::Domain(format!("phase {p} outside [0, 2pi)")));
        }
        if freqs.iter().any(|f| !f.is_finite()) {
            return Err(Error::Domain("non-finite frequency".into()));
        }
        Ok(Self { freqs, phases })
    }

    pub fn sample<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Result<Self> {
        let freqs = (0..q).map(|_| StandardNormal.sample(rng)).collect();
        let phases = (0..q).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        Self::new(freqs, phases)
    }

    pub fn q(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn apply_into(&self, x: f64, out: &mut [f64]) {
        for ((o, w), p) in out.iter_mut().zip(&self.freqs).zip(&self.phases) {
            *o = SQRT_2 * (w * x + p).cos();
        }
    }
}

pub fn rff_apply(x: f64, bank: &RffBank) -> Vec<f64> {
    let mut out = vec![0.0; bank.q()];
    bank.apply_into(x, &mut out);
    out
}

/// How each representation dimension is lifted before measuring dependence.
#[derive(Clone, Debug, PartialEq)]
pub enum FeatureMaps {
    /// One `(f, g)` bank pair per dimension: `f` for the left member of a
    /// pair, `g` for the right.
    Rff { f: Vec<RffBank>, g: Vec<RffBank> },
    /// `f(x) = g(x) = x`, which only removes linear correlation.
    Identity { dims: usize },
}

impl FeatureMaps {
    pub fn sample_rff<R: Rng + ?Sized>(dims: usize, q: usize, rng: &mut R) -> Result<Self> {
        let mut f = Vec::with_capacity(dims);
        let mut g = Vec::with_capacity(dims);
        for _ in 0..dims {
            f.push(RffBank::sample(q, rng)?);
            g.push(RffBank::sample(q, rng)?);
        }
        Ok(FeatureMaps::Rff { f, g })
    }

    pub fn dims(&self) -> usize {
        match self {
            FeatureMaps::Rff { f, .. } => f.len(),
            FeatureMaps::Identity { dims } => *dims,
        }
    }

    /// Features per dimension.
    pub fn width(&self) -> usize {
        match self {
            FeatureMaps::Rff { f, .. } => f.first().map_or(0, RffBank::q),
            FeatureMaps::Identity { .. } => 1,
        }
    }

    /// Lifts every column of `z` into an `N x (d * width)` matrix, block `i`
    /// holding the features of column `i`. Returns the `f` and `g` liftings.
    pub fn lift(&self, z: &Dense2D) -> Result<(Dense2D, Dense2D)> {
        let d = self.dims();
        if z.cols() != d {
            return Err(Error::Shape(format!("feature maps cover {d} dimensions, Z has {}", z.cols())));
        }
        match self {
            FeatureMaps::Identity { .. } => Ok((z.clone(), z.clone())),
            FeatureMaps::Rff { f, g } => {
                let q = self.width();
                let mut fm = Dense2D::zeros(z.rows(), d * q);
                let mut gm = Dense2D::zeros(z.rows(), d * q);
                for n in 0..z.rows() {
                    for i in 0..d {
                        let x = z.get(n, i);
                        f[i].apply_into(x, &mut fm.row_mut(n)[i * q..(i + 1) * q]);
                        g[i].apply_into(x, &mut gm.row_mut(n)[i * q..(i + 1) * q]);
                    }
                }
                Ok((fm, gm))
            }
        }
    }
}
