//! The three architectures assembled from the shared representation stack:
//! word embeddings plus an optional character encoder, stacked BiLSTM layers,
//! and a softmax, CRF or label-attention output.

use std::fmt;
use std::str::FromStr;

use crate::corpus::{EncodedSentence, Vocabs, PAD, UNK};
use crate::error::{Error, Result};
use crate::heads::crf::{self, CrfScores, ViterbiResult};
use crate::heads::lan::{lan_attention, lan_output_decode, mean_alpha};
use crate::heads::softmax::cross_entropy_from_scores;
use crate::heads::{CrfHead, LabelEmbeddingTable, LanLayerParams, SoftmaxHead};
use crate::kernels::argmax;
use crate::layers::{dropout, embedding_init, BiLstm, CharEncoder, EmbeddingTable, LstmParams};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Softmax,
    Crf,
    Lan,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Softmax => "softmax",
            Arch::Crf => "crf",
            Arch::Lan => "lan",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(Arch::Softmax),
            "crf" => Ok(Arch::Crf),
            "lan" => Ok(Arch::Lan),
            _ => Err(Error::Config(vec![format!("unknown architecture {s:?} (expected softmax, crf or lan)")])),
        }
    }
}

/// Architecture and dimensions. `num_layers` counts BiLSTM layers; for LAN
/// the last of them feeds the output attention layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub num_layers: usize,
    /// Concatenated BiLSTM width `d_h` (each direction has `d_h/2`), also the
    /// label embedding width.
    pub hidden: usize,
    pub word_emb_dim: usize,
    pub char_emb_dim: usize,
    /// Per-direction character LSTM size; 0 disables the character encoder.
    pub char_hidden: usize,
    pub heads: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            arch: Arch::Lan,
            num_layers: 3,
            hidden: 400,
            word_emb_dim: 100,
            char_emb_dim: 30,
            char_hidden: 50,
            heads: 5,
            dropout: 0.5,
            seed: 1,
        }
    }
}

fn lstm_scalars(d_in: usize, hidden: usize) -> usize {
    LstmParams::num_scalars(d_in, hidden)
}

impl ModelConfig {
    /// Every violated constraint, as one config error.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.num_layers == 0 {
            errs.push("num_layers must be at least 1".to_string());
        }
        if self.hidden < 2 || !self.hidden.is_multiple_of(2) {
            errs.push(format!("hidden size {} must be even and at least 2", self.hidden));
        }
        if self.word_emb_dim == 0 {
            errs.push("word embedding dimension must be positive".to_string());
        }
        if self.char_hidden > 0 && self.char_emb_dim == 0 {
            errs.push("character embedding dimension must be positive when the character encoder is on".to_string());
        }
        if self.arch == Arch::Lan && (self.heads == 0 || !self.hidden.is_multiple_of(self.heads)) {
            errs.push(format!("attention heads ({}) must divide the hidden size ({})", self.heads, self.hidden));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            errs.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn char_dim(&self) -> usize {
        2 * self.char_hidden
    }

    pub fn word_rep_dim(&self) -> usize {
        self.word_emb_dim + self.char_dim()
    }

    /// Trainable scalars in closed form, fixed coordinates included.
    pub fn parameter_count(&self, words: usize, chars: usize, labels: usize) -> usize {
        let h = self.hidden;
        let mut total = words * self.word_emb_dim;
        if self.char_hidden > 0 {
            total += chars * self.char_emb_dim + 2 * lstm_scalars(self.char_emb_dim, self.char_hidden);
        }
        let later_input = if self.arch == Arch::Lan { 2 * h } else { h };
        for l in 0..self.num_layers {
            let d_in = if l == 0 { self.word_rep_dim() } else { later_input };
            total += 2 * lstm_scalars(d_in, h / 2);
        }
        total += match self.arch {
            Arch::Softmax => labels * h + labels,
            Arch::Crf => labels * h + (labels + 2) * (labels + 2),
            Arch::Lan => labels * h + (self.num_layers - 1) * 3 * h * h,
        };
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Softmax(SoftmaxHead),
    Crf(CrfHead),
    Lan(LabelEmbeddingTable),
}

/// Per-layer `n×L` attention distributions of a LAN forward pass. Inner
/// layers record the mean over heads; the last entry is the output α.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionTrace {
    pub layers: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// LAN: output α; softmax: label probabilities; CRF: emission scores.
    pub output: Tensor,
    pub trace: AttentionTrace,
}

/// Tape nodes of one forward pass.
#[derive(Debug, Clone)]
pub struct Graph {
    /// LAN: pre-softmax output scores; softmax: logits; CRF: emissions.
    pub output: Var,
    /// Per LAN layer, the per-head α nodes.
    pub alphas: Vec<Vec<Var>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    pub store: ParamStore,
    pub word_emb: EmbeddingTable,
    pub chars: Option<CharEncoder>,
    pub encoders: Vec<BiLstm>,
    /// Projections for the inner LAN layers (`num_layers − 1` of them).
    pub attention: Vec<LanLayerParams>,
    pub head: Head,
}

impl Model {
    /// Randomly initialized model; `pretrained` replaces the word table.
    pub fn build(config: ModelConfig, vocabs: Vocabs, pretrained: Option<Tensor>) -> Result<Model> {
        config.validate()?;
        let labels = vocabs.labels.len();
        if labels == 0 {
            return Err(Error::Config(vec!["the label alphabet is empty".into()]));
        }
        let mut rng = Rng::new(config.seed).substream("init");
        let mut store = ParamStore::new();

        let table = match pretrained {
            Some(t) => {
                if t.shape() != [vocabs.words.len(), config.word_emb_dim] {
                    return Err(Error::shape(
                        "pretrained word embeddings",
                        t.shape(),
                        &[vocabs.words.len(), config.word_emb_dim],
                    ));
                }
                t
            }
            None => embedding_init(&mut rng, vocabs.words.len(), config.word_emb_dim, Some(PAD)),
        };
        let word_emb = EmbeddingTable::register(&mut store, "word_emb", table, UNK, PAD);

        let chars = (config.char_hidden > 0).then(|| {
            let t = embedding_init(&mut rng, vocabs.chars.len(), config.char_emb_dim, Some(PAD));
            CharEncoder {
                embedding: EmbeddingTable::register(&mut store, "char_emb", t, UNK, PAD),
                lstm: BiLstm::init(&mut store, "char_lstm", config.char_emb_dim, config.char_hidden, &mut rng),
            }
        });

        let h = config.hidden;
        let mut encoders = Vec::with_capacity(config.num_layers);
        let mut attention = Vec::new();
        for l in 0..config.num_layers {
            let d_in = match (l, config.arch) {
                (0, _) => config.word_rep_dim(),
                (_, Arch::Lan) => 2 * h,
                _ => h,
            };
            encoders.push(BiLstm::init(&mut store, &format!("layer{l}.lstm"), d_in, h / 2, &mut rng));
            if config.arch == Arch::Lan && l + 1 < config.num_layers {
                attention.push(LanLayerParams::init(
                    &mut store,
                    &format!("layer{l}.attn"),
                    h,
                    config.heads,
                    &mut rng,
                )?);
            }
        }

        let head = match config.arch {
            Arch::Softmax => Head::Softmax(SoftmaxHead::init(&mut store, "softmax", labels, h, &mut rng)),
            Arch::Crf => Head::Crf(CrfHead::init(&mut store, "crf", labels, h, &mut rng)),
            Arch::Lan => Head::Lan(LabelEmbeddingTable::init(&mut store, "label_emb", labels, h, &mut rng)),
        };

        Ok(Model {
            config,
            vocabs,
            store,
            word_emb,
            chars,
            encoders,
            attention,
            head,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.vocabs.labels.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.config
            .parameter_count(self.vocabs.words.len(), self.vocabs.chars.len(), self.num_labels())
    }

    /// Records the forward pass. Dropout is active iff `rng` is given.
    pub fn graph(&self, tape: &mut Tape, sent: &EncodedSentence, mut rng: Option<&mut Rng>) -> Result<Graph> {
        if sent.is_empty() {
            return Err(Error::Contract("forward pass over an empty sentence".into()));
        }
        let store = &self.store;
        let rate = self.config.dropout;
        let mut x = self.word_emb.lookup(tape, store, &sent.words)?;
        if let Some(ce) = &self.chars {
            let c = ce.encode_sentence(tape, store, &sent.chars)?;
            x = tape.concat_cols(&[x, c])?;
        }
        x = dropout(tape, x, rate, rng.as_deref_mut())?;

        let mut alphas = Vec::new();
        let output = match &self.head {
            Head::Lan(labels) => {
                let last = self.encoders.len() - 1;
                let mut scores = None;
                for (l, enc) in self.encoders.iter().enumerate() {
                    let hw = enc.encode(tape, store, x)?;
                    if l < last {
                        let att = lan_attention(tape, store, hw, labels, Some(&self.attention[l]))?;
                        alphas.push(att.head_alphas);
                        let h = tape.concat_cols(&[hw, att.label_summary])?;
                        x = dropout(tape, h, rate, rng.as_deref_mut())?;
                    } else {
                        let att = lan_attention(tape, store, hw, labels, None)?;
                        alphas.push(att.head_alphas);
                        scores = att.scores;
                    }
                }
                scores.expect("output layer is single-head")
            }
            Head::Softmax(head) => {
                for enc in &self.encoders {
                    let h = enc.encode(tape, store, x)?;
                    x = dropout(tape, h, rate, rng.as_deref_mut())?;
                }
                head.logits(tape, store, x)?
            }
            Head::Crf(head) => {
                for enc in &self.encoders {
                    let h = enc.encode(tape, store, x)?;
                    x = dropout(tape, h, rate, rng.as_deref_mut())?;
                }
                head.emissions(tape, store, x)?
            }
        };
        Ok(Graph { output, alphas })
    }

    /// Sentence loss: summed token cross-entropy (softmax, LAN) or CRF
    /// negative log-likelihood.
    pub fn loss(&self, tape: &mut Tape, sent: &EncodedSentence, rng: Option<&mut Rng>) -> Result<Var> {
        if sent.labels.len() != sent.len() {
            return Err(Error::Contract(format!(
                "{} gold labels for {} tokens",
                sent.labels.len(),
                sent.len()
            )));
        }
        let g = self.graph(tape, sent, rng)?;
        match &self.head {
            Head::Crf(head) => head.nll(tape, &self.store, g.output, &sent.labels),
            _ => cross_entropy_from_scores(tape, g.output, &sent.labels),
        }
    }

    /// Eval-mode forward pass on plain values.
    pub fn forward(&self, sent: &EncodedSentence) -> Result<ForwardOutput> {
        let mut tape = Tape::new();
        let g = self.graph(&mut tape, sent, None)?;
        let trace = AttentionTrace {
            layers: g.alphas.iter().map(|heads| mean_alpha(&tape, heads)).collect(),
        };
        let output = match &self.head {
            Head::Lan(_) => trace.layers.last().expect("at least one layer").clone(),
            Head::Softmax(_) => {
                let p = tape.softmax_rows(g.output);
                tape.to_tensor(p)
            }
            Head::Crf(_) => tape.to_tensor(g.output),
        };
        Ok(ForwardOutput { output, trace })
    }

    fn viterbi(&self, head: &CrfHead, emissions: &Tensor) -> ViterbiResult {
        let t = self.store.get(head.transitions);
        crf::viterbi(&CrfScores::new(emissions.values(), t.values(), emissions.rows(), head.labels))
    }

    /// Predicted label ids: output α argmax (LAN), probability argmax
    /// (softmax) or the Viterbi path (CRF).
    pub fn predict(&self, sent: &EncodedSentence) -> Result<Vec<usize>> {
        let f = self.forward(sent)?;
        Ok(match &self.head {
            Head::Crf(head) => self.viterbi(head, &f.output).path,
            _ => lan_output_decode(&f.output),
        })
    }

    /// Per-token label distributions: α (LAN), softmax probabilities, or
    /// CRF posterior marginals.
    pub fn distributions(&self, sent: &EncodedSentence) -> Result<Tensor> {
        let f = self.forward(sent)?;
        match &self.head {
            Head::Crf(head) => {
                let t = self.store.get(head.transitions);
                let m = crf::marginals(&CrfScores::new(f.output.values(), t.values(), f.output.rows(), head.labels));
                Tensor::matrix(f.output.rows(), head.labels, m.unary)
            }
            _ => Ok(f.output),
        }
    }

    /// Label embedding matrix (`L×d_h`) of a LAN model.
    pub fn label_embeddings(&self) -> Result<&Tensor> {
        match &self.head {
            Head::Lan(t) => Ok(self.store.get(t.param)),
            _ => Err(Error::UnsupportedArch(self.config.arch.to_string())),
        }
    }
}

/// Index of the largest entry per row, as in prediction.
pub fn row_argmax(t: &Tensor) -> Vec<usize> {
    (0..t.rows()).map(|i| argmax(t.row(i))).collect()
}
