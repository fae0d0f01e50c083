mod common;

use common::{all_paths, crf_scores};
use seqlab_core::heads::crf::{log_partition, marginals, path_score, viterbi, CrfHead, CrfScores};
use seqlab_core::kernels::logsumexp;
use seqlab_core::{ParamStore, Rng, Tape, Tensor};

/// Exhaustive argmax where ties are broken the way Viterbi breaks them:
/// walking backwards, each position prefers the lowest label.
fn enumerated_best(s: &CrfScores) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in all_paths(s.n, s.labels) {
        let sc = path_score(s, &p);
        let better = match &best {
            None => true,
            Some((bp, bs)) => sc > *bs || (sc == *bs && p.iter().rev().lt(bp.iter().rev())),
        };
        if better {
            best = Some((p, sc));
        }
    }
    best.unwrap()
}

#[test]
fn forward_viterbi_and_normalization_match_enumeration() {
    for n in 1..=5 {
        for l in 1..=4 {
            for seed in 0..20 {
                let mut rng = Rng::new(seed).substream(&format!("crf-{n}-{l}"));
                let (e, t) = crf_scores(&mut rng, n, l);
                let s = CrfScores::new(&e, &t, n, l);
                let scores: Vec<f64> = all_paths(n, l).iter().map(|p| path_score(&s, p)).collect();
                let brute = logsumexp(&scores);
                let z = log_partition(&s);
                assert!((z - brute).abs() <= 1e-8, "n={n} l={l} seed={seed}: {z} vs {brute}");

                let total: f64 = scores.iter().map(|sc| (sc - z).exp()).sum();
                assert!((total - 1.0).abs() <= 1e-8, "probabilities sum to {total}");

                let v = viterbi(&s);
                let (path, score) = enumerated_best(&s);
                assert_eq!(v.path, path, "n={n} l={l} seed={seed}");
                assert_eq!(path_score(&s, &v.path), score);
                assert_eq!(v.transition_evals, (l * l * (n - 1) + 2 * l) as u64);
            }
        }
    }
}

#[test]
fn equal_scores_decode_to_label_zero() {
    for n in 1..=5 {
        for l in 1..=4 {
            let e = vec![0.0; n * l];
            let t = vec![0.0; (l + 2) * (l + 2)];
            let s = CrfScores::new(&e, &t, n, l);
            assert_eq!(viterbi(&s).path, vec![0; n]);
            assert_eq!(enumerated_best(&s).0, vec![0; n]);
        }
    }
}

#[test]
fn marginals_match_enumerated_posteriors() {
    let mut rng = Rng::new(3);
    let (n, l) = (4, 3);
    let (e, t) = crf_scores(&mut rng, n, l);
    let s = CrfScores::new(&e, &t, n, l);
    let m = marginals(&s);
    let mut brute = vec![0.0; n * l];
    for p in all_paths(n, l) {
        let prob = (path_score(&s, &p) - m.log_z).exp();
        for (i, &j) in p.iter().enumerate() {
            brute[i * l + j] += prob;
        }
    }
    for (a, b) in m.unary.iter().zip(&brute) {
        assert!((a - b).abs() <= 1e-10);
    }
    for i in 0..n {
        let row: f64 = m.unary[i * l..(i + 1) * l].iter().sum();
        assert!((row - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn tape_nll_matches_enumerated_probability() {
    let mut rng = Rng::new(9);
    let (n, l, d) = (3, 3, 4);
    let mut store = ParamStore::new();
    let head = CrfHead::init(&mut store, "crf", l, d, &mut rng);
    let mut h = vec![0.0; n * d];
    rng.fill_uniform(&mut h, -1.0, 1.0);
    let h = Tensor::matrix(n, d, h).unwrap();
    let e = head.emission_values(&store, &h).unwrap();
    let t = store.get(head.transitions).clone();
    let s = CrfScores::new(e.values(), t.values(), n, l);
    let scores: Vec<f64> = all_paths(n, l).iter().map(|p| path_score(&s, p)).collect();
    let z = logsumexp(&scores);
    let mut total = 0.0;
    for (p, sc) in all_paths(n, l).iter().zip(&scores) {
        let mut tape = Tape::new();
        let hv = tape.input(&h);
        let em = head.emissions(&mut tape, &store, hv).unwrap();
        let nll = head.nll(&mut tape, &store, em, p).unwrap();
        let v = tape.scalar(nll);
        assert!(v >= 0.0);
        assert!((v - (z - sc)).abs() <= 1e-8);
        total += (-v).exp();
    }
    assert!((total - 1.0).abs() <= 1e-8);
}

#[test]
fn single_label_has_zero_loss() {
    let mut rng = Rng::new(1);
    let (e, t) = crf_scores(&mut rng, 4, 1);
    let s = CrfScores::new(&e, &t, 4, 1);
    assert!((log_partition(&s) - path_score(&s, &[0; 4])).abs() <= 1e-12);
}
