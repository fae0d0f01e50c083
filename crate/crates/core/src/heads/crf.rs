//! Linear-chain CRF: sequence scoring, the forward algorithm, posterior
//! marginals and first-order Viterbi decoding.
//!
//! Transitions live in an `(L+2)×(L+2)` matrix indexed `[from][to]`, where
//! row/column `L` is the virtual START state and `L+1` is STOP. Entries into
//! START and out of STOP are pinned at [`FORBIDDEN`] and never trained.

use crate::error::{Error, Result};
use crate::kernels::{self, logsumexp};
use crate::layers::glorot;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{ParamId, ParamStore, Tensor};

pub const FORBIDDEN: f64 = -1.0e4;

/// Borrowed view of a CRF score set: `n×L` emissions plus transitions.
#[derive(Debug, Clone, Copy)]
pub struct CrfScores<'a> {
    pub emissions: &'a [f64],
    pub transitions: &'a [f64],
    pub n: usize,
    pub labels: usize,
}

impl<'a> CrfScores<'a> {
    pub fn new(emissions: &'a [f64], transitions: &'a [f64], n: usize, labels: usize) -> Self {
        debug_assert_eq!(emissions.len(), n * labels);
        debug_assert_eq!(transitions.len(), (labels + 2) * (labels + 2));
        CrfScores {
            emissions,
            transitions,
            n,
            labels,
        }
    }

    #[inline]
    pub fn start(&self) -> usize {
        self.labels
    }

    #[inline]
    pub fn stop(&self) -> usize {
        self.labels + 1
    }

    #[inline]
    pub fn emit(&self, i: usize, j: usize) -> f64 {
        self.emissions[i * self.labels + j]
    }

    #[inline]
    pub fn trans(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * (self.labels + 2) + to]
    }
}

/// Score of one label path, START→l₁ and lₙ→STOP included.
pub fn path_score(s: &CrfScores, path: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut prev = s.start();
    for (i, &l) in path.iter().enumerate() {
        total += s.emit(i, l) + s.trans(prev, l);
        prev = l;
    }
    total + s.trans(prev, s.stop())
}

fn forward_table(s: &CrfScores) -> Vec<f64> {
    let l = s.labels;
    let mut alpha = vec![0.0; s.n * l];
    for j in 0..l {
        alpha[j] = s.trans(s.start(), j) + s.emit(0, j);
    }
    let mut buf = vec![0.0; l];
    for i in 1..s.n {
        for j in 0..l {
            for k in 0..l {
                buf[k] = alpha[(i - 1) * l + k] + s.trans(k, j);
            }
            alpha[i * l + j] = logsumexp(&buf) + s.emit(i, j);
        }
    }
    alpha
}

fn backward_table(s: &CrfScores) -> Vec<f64> {
    let l = s.labels;
    let mut beta = vec![0.0; s.n * l];
    for k in 0..l {
        beta[(s.n - 1) * l + k] = s.trans(k, s.stop());
    }
    let mut buf = vec![0.0; l];
    for i in (0..s.n - 1).rev() {
        for k in 0..l {
            for j in 0..l {
                buf[j] = s.trans(k, j) + s.emit(i + 1, j) + beta[(i + 1) * l + j];
            }
            beta[i * l + k] = logsumexp(&buf);
        }
    }
    beta
}

/// `log Σ_y exp(score(y))` by the forward algorithm.
pub fn log_partition(s: &CrfScores) -> f64 {
    let l = s.labels;
    let alpha = forward_table(s);
    let last: Vec<f64> = (0..l)
        .map(|j| alpha[(s.n - 1) * l + j] + s.trans(j, s.stop()))
        .collect();
    logsumexp(&last)
}

/// Posterior marginals, which are also the gradient of the log partition
/// function with respect to emissions and transitions.
#[derive(Debug, Clone)]
pub struct Marginals {
    pub log_z: f64,
    /// `n×L`: P(yᵢ = j).
    pub unary: Vec<f64>,
    /// `(L+2)×(L+2)`: expected number of uses of each transition.
    pub transitions: Vec<f64>,
}

pub fn marginals(s: &CrfScores) -> Marginals {
    let l = s.labels;
    let w = l + 2;
    let alpha = forward_table(s);
    let beta = backward_table(s);
    let last: Vec<f64> = (0..l)
        .map(|j| alpha[(s.n - 1) * l + j] + s.trans(j, s.stop()))
        .collect();
    let log_z = logsumexp(&last);

    let unary: Vec<f64> = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| (a + b - log_z).exp())
        .collect();
    let mut transitions = vec![0.0; w * w];
    for j in 0..l {
        transitions[s.start() * w + j] += unary[j];
        transitions[j * w + s.stop()] += unary[(s.n - 1) * l + j];
    }
    for i in 1..s.n {
        for k in 0..l {
            let a = alpha[(i - 1) * l + k];
            for j in 0..l {
                transitions[k * w + j] +=
                    (a + s.trans(k, j) + s.emit(i, j) + beta[i * l + j] - log_z).exp();
            }
        }
    }
    Marginals {
        log_z,
        unary,
        transitions,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiResult {
    pub path: Vec<usize>,
    pub score: f64,
    /// Number of transition scores consulted: `L²(n−1) + 2L`.
    pub transition_evals: u64,
}

/// Highest-scoring path. Ties go to the lower label id at every backpointer
/// and at the final state.
pub fn viterbi(s: &CrfScores) -> ViterbiResult {
    let l = s.labels;
    let mut evals = 0u64;
    let mut delta = vec![0.0; l];
    for (j, d) in delta.iter_mut().enumerate() {
        *d = s.trans(s.start(), j) + s.emit(0, j);
        evals += 1;
    }
    let mut back = vec![0usize; s.n * l];
    let mut next = vec![0.0; l];
    for i in 1..s.n {
        for j in 0..l {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (k, &dk) in delta.iter().enumerate() {
                let cand = dk + s.trans(k, j);
                evals += 1;
                if cand > best_score {
                    best_score = cand;
                    best = k;
                }
            }
            back[i * l + j] = best;
            next[j] = best_score + s.emit(i, j);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    let mut score = f64::NEG_INFINITY;
    for (j, &dj) in delta.iter().enumerate() {
        let cand = dj + s.trans(j, s.stop());
        evals += 1;
        if cand > score {
            score = cand;
            last = j;
        }
    }
    let mut path = vec![0; s.n];
    path[s.n - 1] = last;
    for i in (1..s.n).rev() {
        path[i - 1] = back[i * l + path[i]];
    }
    ViterbiResult {
        path,
        score,
        transition_evals: evals,
    }
}

/// CRF inference layer: emission weights `L×d` and START/STOP-augmented
/// transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrfHead {
    pub weight: ParamId,
    pub transitions: ParamId,
    pub labels: usize,
}

impl CrfHead {
    pub fn init(store: &mut ParamStore, prefix: &str, labels: usize, dim: usize, rng: &mut Rng) -> Self {
        let weight = store.add(format!("{prefix}.weight"), glorot(rng, labels, dim));
        let w = labels + 2;
        let mut trans = vec![0.0; w * w];
        let mut fixed = Vec::new();
        for from in 0..w {
            for to in 0..w {
                if to == labels || from == labels + 1 {
                    trans[from * w + to] = FORBIDDEN;
                    fixed.push(from * w + to);
                }
            }
        }
        let transitions = store.add(
            format!("{prefix}.transitions"),
            Tensor::matrix(w, w, trans).expect("square"),
        );
        store.set_fixed(transitions, fixed);
        CrfHead {
            weight,
            transitions,
            labels,
        }
    }

    /// `n×L` emission scores `H · Wᵀ`.
    pub fn emissions(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        tape.matmul_bt(h, w)
    }

    fn check_labels(&self, n: usize, labels: &[usize]) -> Result<()> {
        if labels.len() != n {
            return Err(Error::Contract(format!(
                "{} labels for a sequence of length {n}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.labels) {
            return Err(Error::Index {
                what: "label alphabet",
                index: bad,
                size: self.labels,
            });
        }
        Ok(())
    }

    /// Differentiable score of `labels` given emission scores.
    pub fn score_sequence(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        emissions: Var,
        labels: &[usize],
    ) -> Result<Var> {
        let n = tape.shape(emissions).0;
        self.check_labels(n, labels)?;
        let trans = tape.param(store, self.transitions);
        let emit_coords: Vec<(usize, usize)> = labels.iter().copied().enumerate().collect();
        let mut trans_coords = Vec::with_capacity(n + 1);
        let mut prev = self.labels;
        for &l in labels {
            trans_coords.push((prev, l));
            prev = l;
        }
        trans_coords.push((prev, self.labels + 1));
        let e = tape.pick(emissions, &emit_coords)?;
        let t = tape.pick(trans, &trans_coords)?;
        let es = tape.sum(e);
        let ts = tape.sum(t);
        tape.add(es, ts)
    }

    pub fn log_partition(&self, tape: &mut Tape, store: &ParamStore, emissions: Var) -> Result<Var> {
        let trans = tape.param(store, self.transitions);
        tape.crf_log_partition(emissions, trans)
    }

    /// `log Z − score(gold)`.
    pub fn nll(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        emissions: Var,
        gold: &[usize],
    ) -> Result<Var> {
        let score = self.score_sequence(tape, store, emissions, gold)?;
        let log_z = self.log_partition(tape, store, emissions)?;
        tape.sub(log_z, score)
    }

    /// Plain-value emissions for an `n×d` encoder output.
    pub fn emission_values(&self, store: &ParamStore, h: &Tensor) -> Result<Tensor> {
        let w = store.get(self.weight);
        if h.cols() != w.cols() {
            return Err(Error::shape("crf emissions", h.shape(), w.shape()));
        }
        let (n, d) = (h.rows(), h.cols());
        let mut out = vec![0.0; n * self.labels];
        kernels::matmul_bt(h.values(), w.values(), n, d, self.labels, &mut out);
        Tensor::matrix(n, self.labels, out)
    }

    pub fn decode(&self, store: &ParamStore, h: &Tensor) -> Result<ViterbiResult> {
        if h.rows() == 0 {
            return Err(Error::Contract("Viterbi over an empty sequence".into()));
        }
        let e = self.emission_values(store, h)?;
        let t = store.get(self.transitions);
        Ok(viterbi(&CrfScores::new(e.values(), t.values(), h.rows(), self.labels)))
    }
}
