use crate::error::{Error, Result};

/// Smallest admissible sample weight.
pub const W_MIN: f64 = 1e-4;
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Nonnegative per-sample weights summing to the sample count.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        Self { w: vec![1.0; n] }
    }

    /// Checks `sum = N` within [`SUM_TOLERANCE`] and `min >= W_MIN`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        check_constraints(&w)?;
        Ok(Self { w })
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

pub fn check_constraints(w: &[f64]) -> Result<()> {
    let n = w.len() as f64;
    let sum: f64 = w.iter().sum();
    if (sum - n).abs() > SUM_TOLERANCE {
        return Err(Error::Domain(format!("weights sum to {sum}, expected {n}")));
    }
    if let Some(m) = w.iter().cloned().find(|&v| !(v >= W_MIN)) {
        return Err(Error::Domain(format!("weight {m} below floor {W_MIN}")));
    }
    Ok(())
}

/// Clamps to `>= W_MIN` and rescales to sum to `w.len()`. Entries pushed
/// back under the floor by the rescale are pinned at the floor and the rest
/// rescaled again until both constraints hold.
pub fn project(w: &mut [f64]) {
    let n = w.len();
    if n == 0 {
        return;
    }
    w.iter_mut().for_each(|v| {
        if !(*v >= W_MIN) {
            *v = W_MIN;
        }
    });
    let mut pinned = vec![false; n];
    loop {
        let k = pinned.iter().filter(|&&p| p).count();
        let target = n as f64 - k as f64 * W_MIN;
        let free_sum: f64 = w.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(v, _)| v).sum();
        let s = target / free_sum;
        let mut newly_pinned = false;
        for (v, p) in w.iter_mut().zip(pinned.iter_mut()) {
            if *p {
                *v = W_MIN;
                continue;
            }
            *v *= s;
            if *v < W_MIN {
                *p = true;
                newly_pinned = true;
            }
        }
        if !newly_pinned {
            break;
        }
    }
}
