//! Central-difference gradient verification.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Worst error per checked parameter, in the order given.
    pub per_param: Vec<(String, f64)>,
    pub coordinates: usize,
}

/// Compares the tape gradient of `f` against `(f(θ+ε) − f(θ−ε)) / 2ε` for
/// every coordinate of the parameters in `ids`. The error of a coordinate is
/// `|a − n| / max(1, |a| + |n|)`.
///
/// `f` is evaluated twice up front; differing results are reported as
/// [`Error::NonDeterministic`]. Gradients in `store` are zeroed before and
/// after the check.
pub fn grad_check<F>(store: &mut ParamStore, ids: &[ParamId], eps: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(Error::Config(vec![format!("gradient check step {eps} must be positive")]));
    }
    fn eval<F>(f: &mut F, store: &ParamStore) -> Result<f64>
    where
        F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
    {
        let mut tape = Tape::new();
        let loss = f(&mut tape, store)?;
        Ok(tape.scalar(loss))
    }
    let first = eval(&mut f, store)?;
    let second = eval(&mut f, store)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    store.zero_grad();
    {
        let mut tape = Tape::new();
        let loss = f(&mut tape, store)?;
        tape.backward(loss, store)?;
    }
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| {
            let t = store.get(id);
            t.grad().map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec)
        })
        .collect();
    store.zero_grad();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        per_param: Vec::with_capacity(ids.len()),
        coordinates: 0,
    };
    for (&id, grads) in ids.iter().zip(&analytic) {
        let mut worst = 0.0f64;
        for (k, &a) in grads.iter().enumerate() {
            let orig = store.get(id).values()[k];
            store.get_mut(id).values_mut()[k] = orig + eps;
            let plus = eval(&mut f, store)?;
            store.get_mut(id).values_mut()[k] = orig - eps;
            let minus = eval(&mut f, store)?;
            store.get_mut(id).values_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1.0);
            worst = worst.max(err);
            report.coordinates += 1;
        }
        report.max_rel_err = report.max_rel_err.max(worst);
        report.per_param.push((store.name(id).to_string(), worst));
    }
    Ok(report)
}
