#![allow(dead_code)]

use seqlab_core::corpus::{build_vocabs, parse_conll, EncodedSentence, LabelAlphabet, Vocabs};
use seqlab_core::heads::crf::FORBIDDEN;
use seqlab_core::model::{Arch, Model, ModelConfig};
use seqlab_core::Rng;

/// Vocabulary over `tok0..tok5` plus a few characters, with `labels` labels
/// named `L0, L1, ...`.
pub fn vocabs(labels: usize) -> Vocabs {
    let mut text = String::new();
    for i in 0..6 {
        text.push_str(&format!("tok{i} L0\n"));
    }
    text.push('\n');
    let mut v = build_vocabs(&parse_conll(&text).unwrap(), 1).unwrap();
    v.labels = LabelAlphabet::new((0..labels).map(|i| format!("L{i}")).collect()).unwrap();
    v
}

pub fn config(arch: Arch, layers: usize, hidden: usize, heads: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        arch,
        num_layers: layers,
        hidden,
        word_emb_dim: 5,
        char_emb_dim: 3,
        char_hidden: 2,
        heads,
        dropout: 0.0,
        seed,
    }
}

pub fn model(arch: Arch, labels: usize, seed: u64) -> Model {
    Model::build(config(arch, 2, 8, 2, seed), vocabs(labels), None).unwrap()
}

/// Random sentence of `n` vocabulary tokens (some unknown) with random gold labels.
pub fn sentence(v: &Vocabs, n: usize, rng: &mut Rng) -> EncodedSentence {
    let tokens: Vec<String> = (0..n).map(|_| format!("tok{}", rng.below(8))).collect();
    let mut s = v.encode_tokens(&tokens);
    s.labels = (0..n).map(|_| rng.below(v.labels.len())).collect();
    s
}

/// Emissions in [-2, 2] and transitions in [-2, 2] with START/STOP pinned.
pub fn crf_scores(rng: &mut Rng, n: usize, l: usize) -> (Vec<f64>, Vec<f64>) {
    let mut e = vec![0.0; n * l];
    rng.fill_uniform(&mut e, -2.0, 2.0);
    let w = l + 2;
    let mut t = vec![0.0; w * w];
    rng.fill_uniform(&mut t, -2.0, 2.0);
    for from in 0..w {
        for to in 0..w {
            if to == l || from == l + 1 {
                t[from * w + to] = FORBIDDEN;
            }
        }
    }
    (e, t)
}

/// Every label path of length `n` over `l` labels, in lexicographic order.
pub fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let total = l.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0; n];
            for i in (0..n).rev() {
                p[i] = code % l;
                code /= l;
            }
            p
        })
        .collect()
}
