use super::params::Model;
use crate::error::{Error, Result};
use crate::numcore::Dense2D;

/// Adaptive moment estimation over every parameter of a [`Model`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Dense2D>,
    v: Vec<Dense2D>,
}

impl Adam {
    pub fn new(model: &Model, lr: f64) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        let zeros: Vec<Dense2D> = model.params().iter().map(|p| Dense2D::zeros(p.rows(), p.cols())).collect();
        Ok(Self { lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: zeros.clone(), v: zeros })
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut Model, grads: &[Dense2D]) -> Result<()> {
        let mut params = model.params_mut();
        if grads.len() != params.len() {
            return Err(Error::Shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() {
                return Err(Error::dims("adam", p.shape(), g.shape()));
            }
            let it = p.values_mut().iter_mut().zip(g.values()).zip(m.values_mut()).zip(v.values_mut());
            for (((w, &gi), mi), vi) in it {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
