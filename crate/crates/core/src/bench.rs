//! Decoding-cost harness for the two structured inference layers.
//!
//! Both decoders start from the same `n×d_h` encoder output. CRF decoding
//! computes emissions and runs Viterbi, consulting `L²(n−1) + 2L` transition
//! scores; LAN decoding computes `L·n` attention scores and takes a row-wise
//! argmax. Counters are exact; wall-clock medians are informational.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::heads::crf::{viterbi, CrfScores, FORBIDDEN};
use crate::kernels::{self, argmax};
use crate::layers::{embedding_init, glorot};
use crate::model::Arch;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub fn viterbi_transition_count(labels: usize, n: usize) -> u64 {
    let (l, n) = (labels as u64, n as u64);
    l * l * (n - 1) + 2 * l
}

pub fn attention_score_count(labels: usize, n: usize) -> u64 {
    (labels * n) as u64
}

/// Output-layer LAN decode on plain values, counting score evaluations.
pub fn lan_decode_counted(h: &Tensor, label_emb: &Tensor) -> (Vec<usize>, u64) {
    let (n, d) = (h.rows(), h.cols());
    let l = label_emb.rows();
    let scale = 1.0 / (d as f64).sqrt();
    let mut evals = 0u64;
    let mut row = vec![0.0; l];
    let mut path = Vec::with_capacity(n);
    for i in 0..n {
        let hi = h.row(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r = kernels::dot(hi, label_emb.row(j)) * scale;
            evals += 1;
        }
        kernels::softmax_in_place(&mut row);
        path.push(argmax(&row));
    }
    (path, evals)
}

/// CRF decode on plain values: emissions `H·Wᵀ`, then Viterbi.
pub fn crf_decode(h: &Tensor, weight: &Tensor, transitions: &Tensor) -> (Vec<usize>, u64) {
    let (n, d) = (h.rows(), h.cols());
    let l = weight.rows();
    let mut e = vec![0.0; n * l];
    kernels::matmul_bt(h.values(), weight.values(), n, d, l, &mut e);
    let r = viterbi(&CrfScores::new(&e, transitions.values(), n, l));
    (r.path, r.transition_evals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub arch: Arch,
    pub labels: usize,
    pub n: usize,
    pub reps: usize,
    pub median_seconds: f64,
    pub ops: u64,
    pub expected_ops: u64,
}

impl BenchResult {
    pub fn sentences_per_second(&self) -> f64 {
        if self.median_seconds > 0.0 {
            1.0 / self.median_seconds
        } else {
            f64::INFINITY
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    let mut v = vec![0.0; rows * cols];
    rng.fill_uniform(&mut v, -1.0, 1.0);
    Tensor::matrix(rows, cols, v).expect("shape matches")
}

/// Times `reps` decodes of one random `n×hidden` sentence for every label
/// count in `grid` with a randomly initialized inference layer.
pub fn bench_decode(arch: Arch, grid: &[usize], n: usize, hidden: usize, reps: usize, seed: u64) -> Result<Vec<BenchResult>> {
    if n == 0 || reps == 0 || hidden == 0 {
        return Err(Error::Config(vec!["bench needs n, hidden and reps ≥ 1".into()]));
    }
    if arch == Arch::Softmax {
        return Err(Error::UnsupportedArch("softmax (bench covers crf and lan)".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for &labels in grid {
        if labels == 0 {
            return Err(Error::Config(vec!["label count must be positive".into()]));
        }
        let mut rng = Rng::new(seed).substream(&format!("bench-{arch}-{labels}"));
        let h = random_matrix(&mut rng, n, hidden);
        let mut times = Vec::with_capacity(reps);
        let mut ops = 0;
        match arch {
            Arch::Crf => {
                let w = glorot(&mut rng, labels, hidden);
                let side = labels + 2;
                let mut t = random_matrix(&mut rng, side, side);
                for from in 0..side {
                    for to in 0..side {
                        if to == labels || from == labels + 1 {
                            t.values_mut()[from * side + to] = FORBIDDEN;
                        }
                    }
                }
                for _ in 0..reps {
                    let start = Instant::now();
                    let (path, count) = crf_decode(&h, &w, &t);
                    times.push(start.elapsed().as_secs_f64());
                    std::hint::black_box(path);
                    ops = count;
                }
            }
            _ => {
                let x = embedding_init(&mut rng, labels, hidden, None);
                for _ in 0..reps {
                    let start = Instant::now();
                    let (path, count) = lan_decode_counted(&h, &x);
                    times.push(start.elapsed().as_secs_f64());
                    std::hint::black_box(path);
                    ops = count;
                }
            }
        }
        let expected_ops = match arch {
            Arch::Crf => viterbi_transition_count(labels, n),
            _ => attention_score_count(labels, n),
        };
        out.push(BenchResult {
            arch,
            labels,
            n,
            reps,
            median_seconds: median(times),
            ops,
            expected_ops,
        });
    }
    Ok(out)
}

pub const REPORT_HEADER: &str = "arch\tlabels\tn\treps\tmedian_seconds\tsentences_per_second\tops\texpected_ops";

pub fn report_tsv(results: &[BenchResult]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.9}\t{:.2}\t{}\t{}",
            r.arch,
            r.labels,
            r.n,
            r.reps,
            r.median_seconds,
            r.sentences_per_second(),
            r.ops,
            r.expected_ops
        );
    }
    s
}
