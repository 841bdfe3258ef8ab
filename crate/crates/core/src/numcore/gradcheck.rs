use super::dense::Dense2D;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Largest elementwise relative error between the tape gradient of `f` at `x`
/// and a central finite difference with the given `step`. The denominator is
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: F, x: &Dense2D, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let root = f(&mut tape, xv)?;
    tape.backward(root)?;
    let analytic = tape.grad(xv);

    let eval = |point: Dense2D| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.leaf(point);
        let r = f(&mut t, v)?;
        t.value(r)
            .item()
            .ok_or_else(|| Error::Contract("grad_check function must return a scalar".into()))
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.values().len() {
        let mut plus = x.clone();
        plus.values_mut()[i] += step;
        let mut minus = x.clone();
        minus.values_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        let a = analytic.values()[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
