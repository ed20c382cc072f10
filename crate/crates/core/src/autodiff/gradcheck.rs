use alloc::format;
use alloc::vec::Vec;

use super::{Tape, Var};
use crate::{Error, Result, Tensor};

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let value = tape.value(out);
    if value.shape() != (1, 1) {
        return Err(Error::shape("grad_check output", value.shape(), (1, 1)));
    }
    Ok(value.get(0, 0))
}

/// Compares tape gradients of a scalar function against central differences.
///
/// Returns the maximum over all parameter entries of
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).is_finite() {
        return Err(Error::NonFinite(format!("function value {:?}", tape.value(out))));
    }
    let grads = tape.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut probe: Vec<Tensor> = params.to_vec();
    for (p, var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zeros(*var, params[p].shape());
        for e in 0..params[p].len() {
            let orig = params[p].data()[e];
            probe[p].data_mut()[e] = orig + epsilon;
            let plus = evaluate(&f, &probe)?;
            probe[p].data_mut()[e] = orig - epsilon;
            let minus = evaluate(&f, &probe)?;
            probe[p].data_mut()[e] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "evaluation at parameter {p}, entry {e}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.data()[e];
            let rel = libm::fabs(a - numeric) / (libm::fabs(a) + libm::fabs(numeric)).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
