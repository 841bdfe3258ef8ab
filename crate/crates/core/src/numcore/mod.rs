//! Dense `f64` linear algebra with tape-based reverse-mode gradients.

mod dense;
mod gradcheck;
mod tape;

pub use dense::{multiply_add_count, reset_multiply_add_count, Dense2D};
pub use gradcheck::grad_check;
pub use tape::{Adjacency, Tape, Var};

use rand::Rng;

/// Uniform Glorot initialization over `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Dense2D {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let values = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
    Dense2D::new(fan_in, fan_out, values).expect("glorot shape")
}
