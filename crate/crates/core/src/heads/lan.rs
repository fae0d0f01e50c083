//! Label attention: token states attend over the label embedding matrix,
//! producing a per-token label distribution α and a label summary `α·V`.
//!
//! Inner layers use `k` projected heads with a residual connection back to
//! the token states; the output layer uses a single unprojected head whose α
//! is read directly as the predicted label distribution.

use crate::error::{Error, Result};
use crate::kernels::{self, argmax};
use crate::layers::{embedding_init, glorot};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{ParamId, ParamStore, Tensor};

/// One embedding row per candidate label, `L×d_h`, shared by every layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelEmbeddingTable {
    pub param: ParamId,
}

impl LabelEmbeddingTable {
    pub fn init(store: &mut ParamStore, name: &str, labels: usize, dim: usize, rng: &mut Rng) -> Self {
        LabelEmbeddingTable {
            param: store.add(name, embedding_init(rng, labels, dim, None)),
        }
    }

    pub fn labels(&self, store: &ParamStore) -> usize {
        store.get(self.param).rows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadProjection {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

/// Per-head projections `W^Q_i, W^K_i, W^V_i ∈ R^{d_h×d_h/k}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanLayerParams {
    pub heads: Vec<HeadProjection>,
    pub model_dim: usize,
}

impl LanLayerParams {
    pub fn init(store: &mut ParamStore, prefix: &str, model_dim: usize, heads: usize, rng: &mut Rng) -> Result<Self> {
        if heads == 0 || !model_dim.is_multiple_of(heads) {
            return Err(Error::Config(vec![format!(
                "attention heads ({heads}) must divide the hidden size ({model_dim})"
            )]));
        }
        let dk = model_dim / heads;
        let heads = (0..heads)
            .map(|i| HeadProjection {
                query: store.add(format!("{prefix}.head{i}.wq"), glorot(rng, model_dim, dk)),
                key: store.add(format!("{prefix}.head{i}.wk"), glorot(rng, model_dim, dk)),
                value: store.add(format!("{prefix}.head{i}.wv"), glorot(rng, model_dim, dk)),
            })
            .collect();
        Ok(LanLayerParams { heads, model_dim })
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.heads.len()
    }
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// Pre-softmax scaled scores (single-head form only).
    pub scores: Option<Var>,
    /// One `n×L` distribution per head.
    pub head_alphas: Vec<Var>,
    /// `n×d_h` attention output (with the residual in the multi-head form).
    pub label_summary: Var,
}

/// `softmax(Q·Kᵀ/√d)·V`, returning `(scores, α, α·V)`.
fn scaled_attention(tape: &mut Tape, q: Var, k: Var, v: Var) -> Result<(Var, Var, Var)> {
    let d = tape.shape(q).1 as f64;
    let raw = tape.matmul_bt(q, k)?;
    let scores = tape.scale(raw, 1.0 / d.sqrt());
    let alpha = tape.softmax_rows(scores);
    let out = tape.matmul(alpha, v)?;
    Ok((scores, alpha, out))
}

/// Attention from token states `hw` (`n×d_h`) over the label embeddings.
///
/// Without `params`: `α = softmax(H·x^lᵀ/√d_h)` and the summary is `α·x^l`.
/// With `params`: each head attends over projected queries/keys/values with
/// scale `√(d_h/k)`; the summary is `concat(heads) + H`.
pub fn lan_attention(
    tape: &mut Tape,
    store: &ParamStore,
    hw: Var,
    labels: &LabelEmbeddingTable,
    params: Option<&LanLayerParams>,
) -> Result<AttentionOutput> {
    let xl = tape.param(store, labels.param);
    let (_, dh) = tape.shape(hw);
    let (_, dl) = tape.shape(xl);
    if dh != dl {
        return Err(Error::shape("label attention", &[dh], &[dl]));
    }
    match params {
        None => {
            let (scores, alpha, summary) = scaled_attention(tape, hw, xl, xl)?;
            Ok(AttentionOutput {
                scores: Some(scores),
                head_alphas: vec![alpha],
                label_summary: summary,
            })
        }
        Some(p) => {
            if p.model_dim != dh {
                return Err(Error::shape("label attention projections", &[p.model_dim], &[dh]));
            }
            let mut alphas = Vec::with_capacity(p.heads.len());
            let mut outs = Vec::with_capacity(p.heads.len());
            for head in &p.heads {
                let wq = tape.param(store, head.query);
                let wk = tape.param(store, head.key);
                let wv = tape.param(store, head.value);
                let q = tape.matmul(hw, wq)?;
                let k = tape.matmul(xl, wk)?;
                let v = tape.matmul(xl, wv)?;
                let (_, alpha, out) = scaled_attention(tape, q, k, v)?;
                alphas.push(alpha);
                outs.push(out);
            }
            let cat = tape.concat_cols(&outs)?;
            let summary = tape.add(cat, hw)?;
            Ok(AttentionOutput {
                scores: None,
                head_alphas: alphas,
                label_summary: summary,
            })
        }
    }
}

/// Mean of the per-head distributions as a plain tensor (rows still sum to 1).
pub fn mean_alpha(tape: &Tape, head_alphas: &[Var]) -> Tensor {
    let (n, l) = tape.shape(head_alphas[0]);
    let mut acc = vec![0.0; n * l];
    for &a in head_alphas {
        kernels::axpy(1.0, tape.value(a), &mut acc);
    }
    let k = head_alphas.len() as f64;
    acc.iter_mut().for_each(|v| *v /= k);
    Tensor::matrix(n, l, acc).expect("shape matches")
}

/// Per-token argmax of the output distribution; ties go to the lower id.
pub fn lan_output_decode(alpha: &Tensor) -> Vec<usize> {
    (0..alpha.rows()).map(|i| argmax(alpha.row(i))).collect()
}

/// `Σ_i −log α[i, gold_i]` on plain values.
pub fn lan_loss(alpha: &Tensor, gold: &[usize]) -> Result<f64> {
    if gold.len() != alpha.rows() {
        return Err(Error::Contract(format!(
            "{} gold labels for {} tokens",
            gold.len(),
            alpha.rows()
        )));
    }
    let mut total = 0.0;
    for (i, &g) in gold.iter().enumerate() {
        if g >= alpha.cols() {
            return Err(Error::Index {
                what: "label alphabet",
                index: g,
                size: alpha.cols(),
            });
        }
        let p = alpha.get(i, g);
        if p <= 0.0 {
            return Err(Error::Domain {
                op: "lan_loss",
                msg: format!("zero probability for gold label at token {i}"),
            });
        }
        total -= p.ln();
    }
    Ok(total)
}
