use crate::error::{Error, Result};
use crate::layers::Linear;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::ParamStore;

/// Local classifier `softmax(W h_i + b)` with `W: L×d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SoftmaxHead {
    pub linear: Linear,
    pub labels: usize,
}

impl SoftmaxHead {
    pub fn init(store: &mut ParamStore, prefix: &str, labels: usize, dim: usize, rng: &mut Rng) -> Self {
        SoftmaxHead {
            linear: Linear::init(store, prefix, dim, labels, rng),
            labels,
        }
    }

    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        self.linear.forward(tape, store, h)
    }

    /// `n×L` label distributions.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        let z = self.logits(tape, store, h)?;
        Ok(tape.softmax_rows(z))
    }

    /// `Σ_i −log softmax(z_i)[gold_i]`, computed through a log-softmax.
    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, h: Var, gold: &[usize]) -> Result<Var> {
        let z = self.logits(tape, store, h)?;
        cross_entropy_from_scores(tape, z, gold)
    }
}

/// `Σ_i −log softmax(scores_i)[gold_i]` for `n×L` scores.
pub fn cross_entropy_from_scores(tape: &mut Tape, scores: Var, gold: &[usize]) -> Result<Var> {
    let (n, l) = tape.shape(scores);
    if gold.len() != n {
        return Err(Error::Contract(format!("{} gold labels for {n} tokens", gold.len())));
    }
    if let Some(&bad) = gold.iter().find(|&&g| g >= l) {
        return Err(Error::Index {
            what: "label alphabet",
            index: bad,
            size: l,
        });
    }
    let logp = tape.log_softmax_rows(scores);
    let coords: Vec<(usize, usize)> = gold.iter().copied().enumerate().collect();
    let picked = tape.pick(logp, &coords)?;
    let total = tape.sum(picked);
    Ok(tape.scale(total, -1.0))
}
