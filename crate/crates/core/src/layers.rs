//! Representation layers shared by every architecture: embedding lookup,
//! LSTM cells, bidirectional encoders, the character encoder, dropout and
//! affine projections.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{ParamId, ParamStore, Tensor};

/// Glorot-uniform `rows×cols` matrix: `U(±√(6/(rows+cols)))`.
pub fn glorot(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut v = vec![0.0; rows * cols];
    rng.fill_uniform(&mut v, -bound, bound);
    Tensor::matrix(rows, cols, v).expect("shape matches")
}

/// Embedding table `U(±√(3/dim))` with an all-zero padding row.
pub fn embedding_init(rng: &mut Rng, rows: usize, dim: usize, pad: Option<usize>) -> Tensor {
    let bound = (3.0 / dim as f64).sqrt();
    let mut v = vec![0.0; rows * dim];
    rng.fill_uniform(&mut v, -bound, bound);
    if let Some(p) = pad {
        v[p * dim..(p + 1) * dim].iter_mut().for_each(|x| *x = 0.0);
    }
    Tensor::matrix(rows, dim, v).expect("shape matches")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingTable {
    pub param: ParamId,
    pub unk_id: usize,
    pub pad_id: usize,
}

impl EmbeddingTable {
    /// Registers `table`; the padding row is zeroed and frozen.
    pub fn register(
        store: &mut ParamStore,
        name: &str,
        mut table: Tensor,
        unk_id: usize,
        pad_id: usize,
    ) -> Self {
        let dim = table.cols();
        table.values_mut()[pad_id * dim..(pad_id + 1) * dim]
            .iter_mut()
            .for_each(|x| *x = 0.0);
        let param = store.add(name, table);
        store.set_fixed(param, (pad_id * dim..(pad_id + 1) * dim).collect());
        EmbeddingTable {
            param,
            unk_id,
            pad_id,
        }
    }

    pub fn dim(&self, store: &ParamStore) -> usize {
        store.get(self.param).cols()
    }

    pub fn lookup(&self, tape: &mut Tape, store: &ParamStore, ids: &[usize]) -> Result<Var> {
        let table = tape.param(store, self.param);
        tape.gather_rows(table, ids)
    }
}

/// One LSTM direction. Weights are stored input-major (`x · W`), gates in
/// the order input, forget, candidate, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn init(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w_ih = store.add(format!("{prefix}.w_ih"), glorot(rng, input_dim, 4 * hidden));
        let w_hh = store.add(format!("{prefix}.w_hh"), glorot(rng, hidden, 4 * hidden));
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        let bias = store.add(format!("{prefix}.bias"), Tensor::vector(b));
        LstmParams {
            w_ih,
            w_hh,
            bias,
            input_dim,
            hidden,
        }
    }

    pub fn num_scalars(input_dim: usize, hidden: usize) -> usize {
        4 * hidden * (input_dim + hidden + 1)
    }
}

/// Gate arithmetic given the input projection `x·W_ih + b` for one step.
/// Missing previous states are zero.
fn cell_from_projection(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    projected: Var,
    h_prev: Option<Var>,
    c_prev: Option<Var>,
) -> Result<(Var, Var)> {
    let hd = p.hidden;
    let gates = match h_prev {
        Some(h) => {
            let w_hh = tape.param(store, p.w_hh);
            let rec = tape.matmul(h, w_hh)?;
            tape.add(projected, rec)?
        }
        None => projected,
    };
    let sig = tape.sigmoid(gates);
    let i = tape.slice_cols(sig, 0, hd)?;
    let f = tape.slice_cols(sig, hd, hd)?;
    let o = tape.slice_cols(sig, 3 * hd, hd)?;
    let g_pre = tape.slice_cols(gates, 2 * hd, hd)?;
    let g = tape.tanh(g_pre);
    let ig = tape.mul(i, g)?;
    let c = match c_prev {
        Some(c_prev) => {
            let fc = tape.mul(f, c_prev)?;
            tape.add(fc, ig)?
        }
        None => ig,
    };
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// One LSTM step on `1×d_in` input with `1×hidden` states.
pub fn lstm_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let (xr, xc) = tape.shape(x);
    if xr != 1 || xc != p.input_dim {
        return Err(Error::shape("lstm_step input", &[1, p.input_dim], &[xr, xc]));
    }
    for s in [h_prev, c_prev] {
        let (r, c) = tape.shape(s);
        if r != 1 || c != p.hidden {
            return Err(Error::shape("lstm_step state", &[1, p.hidden], &[r, c]));
        }
    }
    let w_ih = tape.param(store, p.w_ih);
    let b = tape.param(store, p.bias);
    let proj = tape.matmul(x, w_ih)?;
    let proj = tape.add_row(proj, b)?;
    cell_from_projection(tape, store, p, proj, Some(h_prev), Some(c_prev))
}

/// Runs one direction over the rows of `xs` (`n×d_in`) and returns the
/// `n×hidden` hidden states in original row order.
pub fn lstm_sequence(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    xs: Var,
    reverse: bool,
) -> Result<Var> {
    let (n, d) = tape.shape(xs);
    if n == 0 {
        return Err(Error::Contract("LSTM over an empty sequence".into()));
    }
    if d != p.input_dim {
        return Err(Error::shape("lstm input", &[n, p.input_dim], &[n, d]));
    }
    let w_ih = tape.param(store, p.w_ih);
    let b = tape.param(store, p.bias);
    let proj = tape.matmul(xs, w_ih)?;
    let proj = tape.add_row(proj, b)?;
    let mut hs: Vec<Option<Var>> = vec![None; n];
    let (mut h, mut c) = (None, None);
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..n).rev())
    } else {
        Box::new(0..n)
    };
    for t in order {
        let row = tape.row(proj, t)?;
        let (h2, c2) = cell_from_projection(tape, store, p, row, h, c)?;
        hs[t] = Some(h2);
        h = Some(h2);
        c = Some(c2);
    }
    let hs: Vec<Var> = hs.into_iter().map(|v| v.expect("every step ran")).collect();
    tape.stack_rows(&hs)
}

/// `[→h_i ; ←h_i]` for every position: `n×(h_fwd + h_bwd)`.
pub fn bilstm_encode(
    tape: &mut Tape,
    store: &ParamStore,
    fwd: &LstmParams,
    bwd: &LstmParams,
    xs: Var,
) -> Result<Var> {
    let f = lstm_sequence(tape, store, fwd, xs, false)?;
    let b = lstm_sequence(tape, store, bwd, xs, true)?;
    tape.concat_cols(&[f, b])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstm {
    pub fn init(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden_per_dir: usize, rng: &mut Rng) -> Self {
        BiLstm {
            fwd: LstmParams::init(store, &format!("{prefix}.fwd"), input_dim, hidden_per_dir, rng),
            bwd: LstmParams::init(store, &format!("{prefix}.bwd"), input_dim, hidden_per_dir, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden + self.bwd.hidden
    }

    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, xs: Var) -> Result<Var> {
        bilstm_encode(tape, store, &self.fwd, &self.bwd, xs)
    }
}

/// Character embeddings followed by a BiLSTM; a word is the concatenation of
/// the final forward state and the final backward state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharEncoder {
    pub embedding: EmbeddingTable,
    pub lstm: BiLstm,
}

impl CharEncoder {
    pub fn output_dim(&self) -> usize {
        self.lstm.output_dim()
    }

    /// `1×2d_c` encoding of one word.
    pub fn encode_word(&self, tape: &mut Tape, store: &ParamStore, chars: &[usize]) -> Result<Var> {
        if chars.is_empty() {
            return Err(Error::Contract("character encoding of an empty word".into()));
        }
        let emb = self.embedding.lookup(tape, store, chars)?;
        let f = lstm_sequence(tape, store, &self.lstm.fwd, emb, false)?;
        let b = lstm_sequence(tape, store, &self.lstm.bwd, emb, true)?;
        let last = tape.row(f, chars.len() - 1)?;
        let first = tape.row(b, 0)?;
        tape.concat_cols(&[last, first])
    }

    /// `n×2d_c` encodings for a sentence.
    pub fn encode_sentence(&self, tape: &mut Tape, store: &ParamStore, words: &[Vec<usize>]) -> Result<Var> {
        let rows = words
            .iter()
            .map(|w| self.encode_word(tape, store, w))
            .collect::<Result<Vec<_>>>()?;
        tape.stack_rows(&rows)
    }
}

/// Inverted dropout. Identity (the same node) in eval mode or at rate 0.
pub fn dropout(tape: &mut Tape, x: Var, rate: f64, rng: Option<&mut Rng>) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(vec![format!("dropout rate {rate} outside [0, 1)")]));
    }
    let Some(rng) = rng else { return Ok(x) };
    if rate == 0.0 {
        return Ok(x);
    }
    let (r, c) = tape.shape(x);
    let keep = 1.0 / (1.0 - rate);
    let mask = (0..r * c)
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect();
    tape.mask(x, mask)
}

/// Affine map `x·Wᵀ + b` with `W: d_out×d_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn init(store: &mut ParamStore, prefix: &str, d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        Linear {
            weight: store.add(format!("{prefix}.weight"), glorot(rng, d_out, d_in)),
            bias: store.add(format!("{prefix}.bias"), Tensor::vector(vec![0.0; d_out])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let y = tape.matmul_bt(x, w)?;
        tape.add_row(y, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::sigmoid;

    fn small_lstm(seed: u64, d_in: usize, h: usize) -> (ParamStore, LstmParams) {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed);
        let p = LstmParams::init(&mut store, "lstm", d_in, h, &mut rng);
        // Non-trivial biases so every gate path is exercised.
        rng.fill_uniform(store.get_mut(p.bias).values_mut(), -0.5, 0.5);
        (store, p)
    }

    /// Scalar-by-scalar gate pre-activations.
    fn scalar_preacts(store: &ParamStore, p: &LstmParams, x: &[f64], h: &[f64]) -> Vec<f64> {
        let w_ih = store.get(p.w_ih);
        let w_hh = store.get(p.w_hh);
        let b = store.get(p.bias).values();
        let mut z = vec![0.0; 4 * p.hidden];
        for (g, zg) in z.iter_mut().enumerate() {
            let mut s = b[g];
            for (k, xk) in x.iter().enumerate() {
                s += xk * w_ih.get(k, g);
            }
            for (k, hk) in h.iter().enumerate() {
                s += hk * w_hh.get(k, g);
            }
            *zg = s;
        }
        z
    }

    /// Scalar-by-scalar reference cell.
    fn scalar_cell(store: &ParamStore, p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = p.hidden;
        let z = scalar_preacts(store, p, x, h);
        let mut h_new = vec![0.0; hd];
        let mut c_new = vec![0.0; hd];
        for j in 0..hd {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[hd + j]);
            let g = z[2 * hd + j].tanh();
            let o = sigmoid(z[3 * hd + j]);
            c_new[j] = f * c[j] + i * g;
            h_new[j] = o * c_new[j].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_cell_gives_zero_state() {
        let mut store = ParamStore::new();
        let p = LstmParams {
            w_ih: store.add("a", Tensor::zeros(&[3, 8])),
            w_hh: store.add("b", Tensor::zeros(&[2, 8])),
            bias: store.add("c", Tensor::zeros(&[8])),
            input_dim: 3,
            hidden: 2,
        };
        let mut tape = Tape::new();
        let x = tape.constant(1, 3, vec![0.0; 3]).unwrap();
        let z = tape.constant(1, 2, vec![0.0; 2]).unwrap();
        let (h, c) = lstm_step(&mut tape, &store, &p, x, z, z).unwrap();
        assert_eq!(tape.value(h), &[0.0, 0.0]);
        assert_eq!(tape.value(c), &[0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_carries_cell() {
        let (mut store, p) = small_lstm(3, 2, 3);
        for v in &mut store.get_mut(p.bias).values_mut()[3..6] {
            *v = 50.0;
        }
        let mut tape = Tape::new();
        let x = tape.constant(1, 2, vec![0.3, -0.2]).unwrap();
        let h0 = tape.constant(1, 3, vec![0.1, 0.2, -0.1]).unwrap();
        let c0 = tape.constant(1, 3, vec![0.5, -0.4, 0.9]).unwrap();
        let (_, c) = lstm_step(&mut tape, &store, &p, x, h0, c0).unwrap();
        let z = scalar_preacts(&store, &p, &[0.3, -0.2], &[0.1, 0.2, -0.1]);
        let c0 = [0.5, -0.4, 0.9];
        for j in 0..3 {
            let ig = sigmoid(z[j]) * z[6 + j].tanh();
            assert!((tape.value(c)[j] - (c0[j] + ig)).abs() < 1e-12);
        }
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let (store, p) = small_lstm(17, 4, 3);
        let mut rng = Rng::new(99);
        let mut x = vec![0.0; 4];
        let mut h = vec![0.0; 3];
        let mut c = vec![0.0; 3];
        rng.fill_uniform(&mut x, -1.0, 1.0);
        rng.fill_uniform(&mut h, -1.0, 1.0);
        rng.fill_uniform(&mut c, -1.0, 1.0);
        let mut tape = Tape::new();
        let xv = tape.constant(1, 4, x.clone()).unwrap();
        let hv = tape.constant(1, 3, h.clone()).unwrap();
        let cv = tape.constant(1, 3, c.clone()).unwrap();
        let (h1, c1) = lstm_step(&mut tape, &store, &p, xv, hv, cv).unwrap();
        let (h_ref, c_ref) = scalar_cell(&store, &p, &x, &h, &c);
        for j in 0..3 {
            assert!((tape.value(h1)[j] - h_ref[j]).abs() <= 1e-12);
            assert!((tape.value(c1)[j] - c_ref[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn bilstm_matches_step_composition() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(5);
        let bi = BiLstm::init(&mut store, "enc", 3, 2, &mut rng);
        let mut xs = vec![0.0; 9];
        rng.fill_uniform(&mut xs, -1.0, 1.0);
        let rows: Vec<&[f64]> = xs.chunks(3).collect();

        let mut tape = Tape::new();
        let xv = tape.constant(3, 3, xs.clone()).unwrap();
        let out = bi.encode(&mut tape, &store, xv).unwrap();
        assert_eq!(tape.shape(out), (3, 4));

        let run = |p: &LstmParams, order: Vec<usize>| {
            let mut h = vec![0.0; 2];
            let mut c = vec![0.0; 2];
            let mut hs = vec![vec![]; 3];
            for t in order {
                let (h2, c2) = scalar_cell(&store, p, rows[t], &h, &c);
                hs[t] = h2.clone();
                h = h2;
                c = c2;
            }
            hs
        };
        let f = run(&bi.fwd, vec![0, 1, 2]);
        let b = run(&bi.bwd, vec![2, 1, 0]);
        let got = tape.value(out);
        for t in 0..3 {
            let expect: Vec<f64> = f[t].iter().chain(&b[t]).copied().collect();
            for (k, e) in expect.iter().enumerate() {
                assert!((got[t * 4 + k] - e).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_direction_is_forward_on_reversed_input() {
        let (store, p) = small_lstm(8, 3, 4);
        let mut rng = Rng::new(1);
        let mut xs = vec![0.0; 5 * 3];
        rng.fill_uniform(&mut xs, -1.0, 1.0);
        let rev: Vec<f64> = xs.chunks(3).rev().flatten().copied().collect();

        let mut tape = Tape::new();
        let a = tape.constant(5, 3, xs).unwrap();
        let b = tape.constant(5, 3, rev).unwrap();
        let back = lstm_sequence(&mut tape, &store, &p, a, true).unwrap();
        let fwd_rev = lstm_sequence(&mut tape, &store, &p, b, false).unwrap();
        let back_rows: Vec<&[f64]> = tape.value(back).chunks(4).collect();
        let fwd_rows: Vec<&[f64]> = tape.value(fwd_rev).chunks(4).rev().collect();
        assert_eq!(back_rows, fwd_rows);
    }

    #[test]
    fn single_token_bilstm() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(12);
        let bi = BiLstm::init(&mut store, "enc", 2, 3, &mut rng);
        let mut tape = Tape::new();
        let x = tape.constant(1, 2, vec![0.4, -0.6]).unwrap();
        let out = bi.encode(&mut tape, &store, x).unwrap();
        let (hf, _) = scalar_cell(&store, &bi.fwd, &[0.4, -0.6], &[0.0; 3], &[0.0; 3]);
        let (hb, _) = scalar_cell(&store, &bi.bwd, &[0.4, -0.6], &[0.0; 3], &[0.0; 3]);
        let expect: Vec<f64> = hf.into_iter().chain(hb).collect();
        for (g, e) in tape.value(out).iter().zip(&expect) {
            assert!((g - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let (store, p) = small_lstm(1, 2, 2);
        let mut tape = Tape::new();
        let x = tape.constant(0, 2, vec![]).unwrap();
        assert!(matches!(
            lstm_sequence(&mut tape, &store, &p, x, false),
            Err(Error::Contract(_))
        ));
    }

    fn char_encoder(seed: u64, zero: bool) -> (ParamStore, CharEncoder) {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed);
        let table = embedding_init(&mut rng, 6, 3, Some(0));
        let embedding = EmbeddingTable::register(&mut store, "char_emb", table, 1, 0);
        let lstm = BiLstm::init(&mut store, "char", 3, 2, &mut rng);
        if zero {
            for id in [lstm.fwd.w_ih, lstm.fwd.w_hh, lstm.fwd.bias, lstm.bwd.w_ih, lstm.bwd.w_hh, lstm.bwd.bias] {
                store.get_mut(id).values_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        (store, CharEncoder { embedding, lstm })
    }

    #[test]
    fn char_encoding_shapes_and_zero_case() {
        let (store, enc) = char_encoder(4, true);
        let mut tape = Tape::new();
        let v = enc.encode_word(&mut tape, &store, &[2, 3, 4]).unwrap();
        assert_eq!(tape.shape(v), (1, 4));
        assert!(tape.value(v).iter().all(|&x| x == 0.0));

        let (store, enc) = char_encoder(4, false);
        for len in 1..6 {
            let word: Vec<usize> = (0..len).map(|i| 1 + i % 5).collect();
            let mut tape = Tape::new();
            let v = enc.encode_word(&mut tape, &store, &word).unwrap();
            assert_eq!(tape.shape(v), (1, enc.output_dim()));
        }
        let mut tape = Tape::new();
        assert!(enc.encode_word(&mut tape, &store, &[]).is_err());
    }

    #[test]
    fn char_encoding_matches_composition() {
        let (store, enc) = char_encoder(21, false);
        let word = [2, 5, 3, 2];
        let table = store.get(enc.embedding.param);
        let rows: Vec<&[f64]> = word.iter().map(|&c| table.row(c)).collect();
        let mut h = vec![0.0; 2];
        let mut c = vec![0.0; 2];
        for r in &rows {
            let (h2, c2) = scalar_cell(&store, &enc.lstm.fwd, r, &h, &c);
            h = h2;
            c = c2;
        }
        let fwd_last = h;
        let mut h = vec![0.0; 2];
        let mut c = vec![0.0; 2];
        for r in rows.iter().rev() {
            let (h2, c2) = scalar_cell(&store, &enc.lstm.bwd, r, &h, &c);
            h = h2;
            c = c2;
        }
        let expect: Vec<f64> = fwd_last.into_iter().chain(h).collect();
        let mut tape = Tape::new();
        let v = enc.encode_word(&mut tape, &store, &word).unwrap();
        for (g, e) in tape.value(v).iter().zip(&expect) {
            assert!((g - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn embedding_lookup_and_pad() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(2);
        let t = embedding_init(&mut rng, 5, 3, None);
        let row2 = t.row(2).to_vec();
        let table = EmbeddingTable::register(&mut store, "emb", t, 1, 0);
        let mut tape = Tape::new();
        let v = table.lookup(&mut tape, &store, &[2]).unwrap();
        assert_eq!(tape.value(v), row2.as_slice());
        let p = table.lookup(&mut tape, &store, &[0]).unwrap();
        assert_eq!(tape.value(p), &[0.0; 3]);
        assert!(table.lookup(&mut tape, &store, &[5]).is_err());
    }

    #[test]
    fn embedding_grad_accumulates_on_repeats() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(2);
        let t = embedding_init(&mut rng, 5, 3, Some(0));
        let table = EmbeddingTable::register(&mut store, "emb", t, 1, 0);
        let mut tape = Tape::new();
        let v = table.lookup(&mut tape, &store, &[3, 3]).unwrap();
        let s = tape.sum(v);
        tape.backward(s, &mut store).unwrap();
        let g = store.get(table.param).grad().unwrap();
        assert_eq!(&g[9..12], &[2.0, 2.0, 2.0]);
        assert!(g[..9].iter().chain(&g[12..]).all(|&x| x == 0.0));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut tape = Tape::new();
        let x = tape.constant(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut rng = Rng::new(0);
        assert_eq!(dropout(&mut tape, x, 0.5, None).unwrap(), x);
        assert_eq!(dropout(&mut tape, x, 0.0, Some(&mut rng)).unwrap(), x);
        assert!(matches!(dropout(&mut tape, x, 1.0, Some(&mut rng)), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_keep_fraction_and_scale() {
        let mut tape = Tape::new();
        let n = 100_000;
        let x = tape.constant(1, n, vec![1.0; n]).unwrap();
        let mut rng = Rng::new(31);
        let y = dropout(&mut tape, x, 0.5, Some(&mut rng)).unwrap();
        let vals = tape.value(y);
        let kept = vals.iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((kept - 0.5).abs() <= 0.02, "kept {kept}");
        assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
        let mean = vals.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() <= 0.04);
    }

    #[test]
    fn linear_identity_and_bias() {
        let mut store = ParamStore::new();
        let lin = Linear {
            weight: store.add("w", Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()),
            bias: store.add("b", Tensor::vector(vec![0.0, 0.0])),
        };
        let mut tape = Tape::new();
        let x = tape.constant(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = lin.forward(&mut tape, &store, x).unwrap();
        assert_eq!(tape.value(y), &[1.0, 2.0, 3.0, 4.0]);

        store.get_mut(lin.bias).values_mut().copy_from_slice(&[0.5, -1.5]);
        let mut tape = Tape::new();
        let z = tape.constant(3, 2, vec![0.0; 6]).unwrap();
        let y = lin.forward(&mut tape, &store, z).unwrap();
        assert_eq!(tape.value(y), &[0.5, -1.5, 0.5, -1.5, 0.5, -1.5]);
    }
}
