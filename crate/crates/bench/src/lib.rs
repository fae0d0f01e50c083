//! Shared fixtures for the criterion benchmarks.

use seqlab_core::heads::crf::FORBIDDEN;
use seqlab_core::layers::{embedding_init, glorot};
use seqlab_core::corpus::{build_vocabs, generate_synthetic};
use seqlab_core::{Arch, EncodedSentence, Model, ModelConfig, Rng, SyntheticSpec, Tape, Tensor};

/// Label counts of the decode benchmark grid.
pub const GRID: [usize; 4] = [10, 50, 100, 400];
pub const SENTENCE_LEN: usize = 30;
pub const HIDDEN: usize = 100;

pub struct DecodeFixture {
    pub h: Tensor,
    pub crf_weight: Tensor,
    pub transitions: Tensor,
    pub label_emb: Tensor,
}

impl DecodeFixture {
    pub fn new(labels: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed).substream(&format!("fixture-{labels}"));
        let mut h = vec![0.0; SENTENCE_LEN * HIDDEN];
        rng.fill_uniform(&mut h, -1.0, 1.0);
        let side = labels + 2;
        let mut t = vec![0.0; side * side];
        rng.fill_uniform(&mut t, -1.0, 1.0);
        for from in 0..side {
            for to in 0..side {
                if to == labels || from == labels + 1 {
                    t[from * side + to] = FORBIDDEN;
                }
            }
        }
        DecodeFixture {
            h: Tensor::matrix(SENTENCE_LEN, HIDDEN, h).expect("shape"),
            crf_weight: glorot(&mut rng, labels, HIDDEN),
            transitions: Tensor::matrix(side, side, t).expect("shape"),
            label_emb: embedding_init(&mut rng, labels, HIDDEN, None),
        }
    }
}

/// A POS-sized model (`d_h` = 100, two layers) and one 30-token sentence.
pub fn training_fixture(arch: Arch) -> (Model, EncodedSentence) {
    let spec = SyntheticSpec {
        min_len: SENTENCE_LEN,
        max_len: SENTENCE_LEN,
        ..SyntheticSpec::default()
    };
    let raw = generate_synthetic(&spec, 20).expect("valid spec");
    let vocabs = build_vocabs(&raw, 1).expect("non-empty corpus");
    let sent = vocabs.encode(&raw[0]).expect("labels in alphabet");
    let config = ModelConfig {
        arch,
        num_layers: 2,
        hidden: HIDDEN,
        word_emb_dim: 50,
        char_emb_dim: 30,
        char_hidden: 50,
        heads: 2,
        dropout: 0.5,
        seed: 1,
    };
    (Model::build(config, vocabs, None).expect("valid config"), sent)
}

/// One forward and backward pass with dropout; returns the loss.
pub fn train_step(model: &Model, sent: &EncodedSentence) -> f64 {
    let mut store = model.store.clone();
    let mut rng = Rng::new(7);
    let mut tape = Tape::new();
    let loss = model.loss(&mut tape, sent, Some(&mut rng)).expect("loss");
    tape.backward(loss, &mut store).expect("backward");
    tape.scalar(loss)
}
