//! Column-format corpora, vocabularies, pretrained embeddings and the
//! synthetic long-range tagging corpus.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl RawSentence {
    pub fn new(tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Contract(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        if tokens.iter().any(String::is_empty) {
            return Err(Error::Contract("empty token".into()));
        }
        Ok(RawSentence { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Parses whitespace-separated column text. The first field of a line is the
/// token and the last is the tag; blank lines end sentences and
/// `-DOCSTART-` lines are skipped.
pub fn parse_conll(text: &str) -> Result<Vec<RawSentence>> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            if !tokens.is_empty() {
                out.push(RawSentence::new(std::mem::take(&mut tokens), std::mem::take(&mut tags))?);
            }
            continue;
        }
        if fields[0].starts_with("-DOCSTART-") {
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected at least 2 fields, found {}", fields.len()),
            });
        }
        tokens.push(fields[0].to_string());
        tags.push(fields[fields.len() - 1].to_string());
    }
    if !tokens.is_empty() {
        out.push(RawSentence::new(tokens, tags)?);
    }
    Ok(out)
}

pub fn read_conll(path: &Path) -> Result<Vec<RawSentence>> {
    parse_conll(&std::fs::read_to_string(path)?)
}

/// Two-column `token<TAB>tag` rendering, blank line after each sentence.
pub fn write_conll(sentences: &[RawSentence]) -> String {
    let mut s = String::new();
    for sent in sentences {
        for (t, g) in sent.tokens.iter().zip(&sent.tags) {
            let _ = writeln!(s, "{t}\t{g}");
        }
        s.push('\n');
    }
    s
}

/// Bijection between strings and dense ids, with PAD = 0 and UNK = 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_items(entries: impl IntoIterator<Item = String>) -> Self {
        let mut items = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        items.extend(entries.into_iter().filter(|e| e != PAD_TOKEN && e != UNK_TOKEN));
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }

    /// Id of `key`, or UNK.
    pub fn id(&self, key: &str) -> usize {
        self.index.get(key).copied().unwrap_or(UNK)
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entries after the two specials, in id order.
    pub fn entries(&self) -> &[String] {
        &self.items[2..]
    }
}

/// Label strings and their ids; no special entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAlphabet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelAlphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Contract(format!("duplicate label {l}")));
            }
        }
        Ok(LabelAlphabet { labels, index })
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabs {
    pub words: Vocab,
    pub chars: Vocab,
    pub labels: LabelAlphabet,
}

/// Key used for word-embedding lookup (characters keep their case).
pub fn normalize_word(w: &str) -> String {
    w.to_lowercase()
}

fn ranked(counts: HashMap<String, usize>, min_count: usize) -> Vec<String> {
    let mut v: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.into_iter().map(|(s, _)| s).collect()
}

/// Builds word, character and label alphabets from training data. Ids are
/// assigned by descending frequency, then lexicographically.
pub fn build_vocabs(train: &[RawSentence], min_count: usize) -> Result<Vocabs> {
    if train.iter().all(RawSentence::is_empty) {
        return Err(Error::Contract("cannot build vocabularies from an empty corpus".into()));
    }
    let mut words = HashMap::new();
    let mut chars = HashMap::new();
    let mut labels = HashMap::new();
    for s in train {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            *words.entry(normalize_word(tok)).or_insert(0) += 1;
            for c in tok.chars() {
                *chars.entry(c.to_string()).or_insert(0) += 1;
            }
            *labels.entry(tag.clone()).or_insert(0) += 1;
        }
    }
    Ok(Vocabs {
        words: Vocab::from_items(ranked(words, min_count.max(1))),
        chars: Vocab::from_items(ranked(chars, 1)),
        labels: LabelAlphabet::new(ranked(labels, 1))?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    /// Empty for untagged input.
    pub labels: Vec<usize>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Vocabs {
    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> EncodedSentence {
        EncodedSentence {
            words: tokens.iter().map(|t| self.words.id(&normalize_word(t.as_ref()))).collect(),
            chars: tokens
                .iter()
                .map(|t| {
                    let mut buf = [0u8; 4];
                    t.as_ref().chars().map(|c| self.chars.id(c.encode_utf8(&mut buf))).collect()
                })
                .collect(),
            labels: Vec::new(),
        }
    }

    /// Encodes a tagged sentence; every tag must belong to the label alphabet.
    pub fn encode(&self, s: &RawSentence) -> Result<EncodedSentence> {
        let mut e = self.encode_tokens(&s.tokens);
        e.labels = s
            .tags
            .iter()
            .map(|t| {
                self.labels
                    .id(t)
                    .ok_or_else(|| Error::Contract(format!("label {t:?} is not in the model's label alphabet")))
            })
            .collect::<Result<_>>()?;
        Ok(e)
    }

    pub fn encode_all(&self, data: &[RawSentence]) -> Result<Vec<EncodedSentence>> {
        data.iter().map(|s| self.encode(s)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PretrainedTable {
    /// `|V|×dim`, PAD row zero.
    pub table: Tensor,
    /// Vocabulary entries copied from the file.
    pub found: usize,
    pub warnings: Vec<String>,
}

/// Builds a word-embedding table from `word v₁ … v_dim` lines. Vocabulary
/// rows present in the file are copied; the rest are drawn from
/// `U(±√(3/dim))`. The UNK row is the mean of every vector in the file.
/// Duplicate words: the last line wins and a warning is recorded.
pub fn parse_pretrained_embeddings(text: &str, vocab: &Vocab, dim: usize, rng: &mut Rng) -> Result<PretrainedTable> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut vectors: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut sum = vec![0.0; dim];
    let mut loaded = 0usize;
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad float {f:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {dim} values, found {}", values.len()),
            });
        }
        kernels_add(&mut sum, &values);
        loaded += 1;
        let key = normalize_word(word);
        if let Some(prev) = seen.insert(key.clone(), i + 1) {
            let msg = format!("line {}: duplicate embedding for {key:?} (first seen on line {prev}); keeping the later one", i + 1);
            warn!("{msg}");
            warnings.push(msg);
        }
        if let Some(id) = vocab.get(&key) {
            vectors.insert(id, values);
        }
    }
    let bound = (3.0 / dim as f64).sqrt();
    let mut table = vec![0.0; vocab.len() * dim];
    for id in 0..vocab.len() {
        let row = &mut table[id * dim..(id + 1) * dim];
        if id == PAD {
            continue;
        }
        if let Some(v) = vectors.get(&id) {
            row.copy_from_slice(v);
        } else {
            rng.fill_uniform(row, -bound, bound);
        }
    }
    if loaded > 0 && !vectors.contains_key(&UNK) {
        for (dst, s) in table[UNK * dim..(UNK + 1) * dim].iter_mut().zip(&sum) {
            *dst = s / loaded as f64;
        }
    }
    Ok(PretrainedTable {
        table: Tensor::matrix(vocab.len(), dim, table)?,
        found: vectors.len(),
        warnings,
    })
}

fn kernels_add(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

pub fn load_pretrained_embeddings(path: &Path, vocab: &Vocab, dim: usize, rng: &mut Rng) -> Result<PretrainedTable> {
    parse_pretrained_embeddings(&std::fs::read_to_string(path)?, vocab, dim, rng)
}

/// Generator settings for a corpus whose ambiguous tokens can only be tagged
/// from the identity of a trigger token that may be far away.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Number of distinct filler words.
    pub filler_words: usize,
    /// Filler word `i` is tagged `F{i mod filler_tags}`.
    pub filler_tags: usize,
    /// One entry per ambiguous word type: its tag under the first and the
    /// second trigger.
    pub label_pairs: Vec<(String, String)>,
    /// Exactly two trigger tokens.
    pub triggers: Vec<String>,
    pub min_len: usize,
    pub max_len: usize,
    pub max_ambiguous: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            filler_words: 12,
            filler_tags: 4,
            label_pairs: vec![("NN".into(), "VB".into()), ("JJ".into(), "RB".into())],
            triggers: vec!["alpha".into(), "omega".into()],
            min_len: 8,
            max_len: 16,
            max_ambiguous: 2,
            seed: 1,
        }
    }
}

pub const TRIGGER_TAG: &str = "TRG";

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.label_pairs.is_empty() {
            errs.push("at least one ambiguous word type is required".to_string());
        }
        if self.label_pairs.iter().any(|(a, b)| a == b) {
            errs.push("each ambiguous word needs two distinct tags".to_string());
        }
        if self.triggers.len() != 2 || self.triggers[0] == self.triggers[1] {
            errs.push("exactly two distinct trigger tokens are required".to_string());
        }
        if self.min_len < 2 || self.min_len > self.max_len {
            errs.push(format!("invalid length range [{}, {}]", self.min_len, self.max_len));
        }
        if self.max_ambiguous == 0 {
            errs.push("max_ambiguous must be at least 1".to_string());
        }
        if self.filler_words == 0 || self.filler_tags == 0 {
            errs.push("filler vocabulary and tag set must be non-empty".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn ambiguous_word(k: usize) -> String {
        format!("amb{k}")
    }

    pub fn filler_word(i: usize) -> String {
        format!("w{i}")
    }
}

/// Sentences with one trigger at a uniform position, 1..=max_ambiguous
/// ambiguous words whose tag is fixed by the trigger, and fillers elsewhere.
pub fn generate_synthetic(spec: &SyntheticSpec, n_sentences: usize) -> Result<Vec<RawSentence>> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed).substream("synthetic");
    let mut out = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let len = rng.range_inclusive(spec.min_len, spec.max_len);
        let trigger_pos = rng.below(len);
        let trigger = rng.below(2);
        let n_amb = rng.range_inclusive(1, spec.max_ambiguous.min(len - 1));
        let mut others: Vec<usize> = (0..len).filter(|&p| p != trigger_pos).collect();
        rng.shuffle(&mut others);
        let mut tokens = vec![String::new(); len];
        let mut tags = vec![String::new(); len];
        tokens[trigger_pos] = spec.triggers[trigger].clone();
        tags[trigger_pos] = TRIGGER_TAG.to_string();
        for (slot, &p) in others.iter().enumerate() {
            if slot < n_amb {
                let k = rng.below(spec.label_pairs.len());
                let (a, b) = &spec.label_pairs[k];
                tokens[p] = SyntheticSpec::ambiguous_word(k);
                tags[p] = if trigger == 0 { a.clone() } else { b.clone() };
            } else {
                let w = rng.below(spec.filler_words);
                tokens[p] = SyntheticSpec::filler_word(w);
                tags[p] = format!("F{}", w % spec.filler_tags);
            }
        }
        out.push(RawSentence::new(tokens, tags)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn minimal_and_multi_sentence_parse() {
        let s = parse_conll("the\tDT\n\n").unwrap();
        assert_eq!(s, vec![RawSentence::new(vec!["the".into()], vec!["DT".into()]).unwrap()]);
        let two = parse_conll("a X\nb Y\n\nc Z\n").unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1].tags, vec!["Z"]);
    }

    #[test]
    fn multi_column_uses_first_and_last_and_skips_docstart() {
        let text = "-DOCSTART- -X- -X- O\n\nEU NNP B-NP B-ORG\nrejects VBZ B-VP O\n\n\n";
        let s = parse_conll(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, vec!["EU", "rejects"]);
        assert_eq!(s[0].tags, vec!["B-ORG", "O"]);
    }

    #[test]
    fn crlf_matches_lf() {
        let lf = "a X\nb Y\n\nc Z\n\n";
        let crlf = lf.replace('\n', "\r\n");
        assert_eq!(parse_conll(lf).unwrap(), parse_conll(&crlf).unwrap());
    }

    #[test]
    fn short_line_reports_line_number() {
        match parse_conll("a X\nlonely\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_parse_preserves_content() {
        let text = "The DT x\ncat NN y\n\nsat VBD z\n";
        let parsed = parse_conll(text).unwrap();
        assert_eq!(parse_conll(&write_conll(&parsed)).unwrap(), parsed);
    }

    #[test]
    fn vocab_ordering_and_labels() {
        let train = vec![
            RawSentence::new(vec!["a".into(), "b".into()], vec!["X".into(), "Y".into()]).unwrap(),
        ];
        let v = build_vocabs(&train, 1).unwrap();
        assert_eq!(v.labels.names(), &["X".to_string(), "Y".to_string()]);

        let train = parse_conll("b T\na T\nb U\nC T\n\n").unwrap();
        let v = build_vocabs(&train, 1).unwrap();
        // b (2) first, then a/c (1) lexicographically; words lowercased.
        assert_eq!(v.words.entries(), &["b".to_string(), "a".to_string(), "c".to_string()]);
        assert_eq!(v.labels.names(), &["T".to_string(), "U".to_string()]);
        assert!(v.chars.get("C").is_some());
        assert_eq!(build_vocabs(&train, 1).unwrap(), v);
        let pruned = build_vocabs(&train, 2).unwrap();
        assert_eq!(pruned.words.id("a"), UNK);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(build_vocabs(&[], 1).is_err());
    }

    #[test]
    fn encode_rejects_unknown_label() {
        let train = parse_conll("a X\n\n").unwrap();
        let v = build_vocabs(&train, 1).unwrap();
        let bad = parse_conll("a Q\n\n").unwrap();
        assert!(v.encode(&bad[0]).is_err());
        let e = v.encode_tokens(&["zzz"]);
        assert_eq!(e.words, vec![UNK]);
        assert_eq!(e.chars, vec![vec![UNK; 3]]);
    }

    fn tiny_vocab() -> Vocab {
        Vocab::from_items(["a".to_string(), "b".to_string()])
    }

    #[test]
    fn pretrained_copy_and_unk_average() {
        let v = tiny_vocab();
        let mut rng = Rng::new(1);
        let t = parse_pretrained_embeddings("a 0.1 0.2\nzzz 0.3 0.4\n", &v, 2, &mut rng).unwrap();
        assert_eq!(t.found, 1);
        assert_eq!(t.table.row(v.id("a")), &[0.1, 0.2]);
        assert_eq!(t.table.row(PAD), &[0.0, 0.0]);
        let unk = t.table.row(UNK);
        assert!((unk[0] - 0.2).abs() < 1e-15 && (unk[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn pretrained_without_overlap_is_random() {
        let v = tiny_vocab();
        let mut rng = Rng::new(1);
        let t = parse_pretrained_embeddings("q 1 2\n", &v, 2, &mut rng).unwrap();
        assert_eq!(t.found, 0);
        assert!(t.table.row(v.id("a")).iter().all(|x| x.abs() <= (1.5f64).sqrt()));
    }

    #[test]
    fn pretrained_duplicates_last_wins_with_warning() {
        let v = tiny_vocab();
        let mut rng = Rng::new(1);
        let t = parse_pretrained_embeddings("a 1 1\nb 0 0\nA 2 3\n", &v, 2, &mut rng).unwrap();
        assert_eq!(t.table.row(v.id("a")), &[2.0, 3.0]);
        assert_eq!(t.warnings.len(), 1);
        assert!(t.warnings[0].contains("line 3"));
    }

    #[test]
    fn pretrained_dim_mismatch_reports_line() {
        let v = tiny_vocab();
        let mut rng = Rng::new(1);
        match parse_pretrained_embeddings("a 1 1\nb 0\n", &v, 2, &mut rng) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn synthetic_tags_follow_trigger() {
        let spec = SyntheticSpec::default();
        let data = generate_synthetic(&spec, 300).unwrap();
        for s in &data {
            let trig = s.tokens.iter().position(|t| spec.triggers.contains(t)).unwrap();
            let which = spec.triggers.iter().position(|t| *t == s.tokens[trig]).unwrap();
            assert_eq!(s.tokens.iter().filter(|t| spec.triggers.contains(t)).count(), 1);
            for (tok, tag) in s.tokens.iter().zip(&s.tags) {
                if let Some(k) = (0..spec.label_pairs.len()).find(|&k| *tok == SyntheticSpec::ambiguous_word(k)) {
                    let (a, b) = &spec.label_pairs[k];
                    assert_eq!(tag, if which == 0 { a } else { b });
                }
            }
            assert!((spec.min_len..=spec.max_len).contains(&s.len()));
        }
        assert_eq!(generate_synthetic(&spec, 300).unwrap(), data);
    }

    #[test]
    fn synthetic_long_distances_occur() {
        let spec = SyntheticSpec {
            min_len: 12,
            max_len: 20,
            ..SyntheticSpec::default()
        };
        let data = generate_synthetic(&spec, 500).unwrap();
        let max_dist = data
            .iter()
            .map(|s| {
                let t = s.tokens.iter().position(|w| spec.triggers.contains(w)).unwrap();
                s.tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| w.starts_with("amb"))
                    .map(|(i, _)| i.abs_diff(t))
                    .max()
                    .unwrap()
            })
            .max()
            .unwrap();
        assert!(max_dist > 10, "max distance {max_dist}");
    }

    #[test]
    fn synthetic_tags_not_predictable_from_local_window() {
        let spec = SyntheticSpec::default();
        let data = generate_synthetic(&spec, 2000).unwrap();
        let mut seen: HashMap<(String, String, String), HashSet<String>> = HashMap::new();
        for s in &data {
            for i in 0..s.len() {
                if !s.tokens[i].starts_with("amb") {
                    continue;
                }
                let left = if i > 0 { s.tokens[i - 1].clone() } else { "<s>".into() };
                let right = s.tokens.get(i + 1).cloned().unwrap_or_else(|| "</s>".into());
                seen.entry((left, s.tokens[i].clone(), right))
                    .or_default()
                    .insert(s.tags[i].clone());
            }
        }
        assert!(seen.values().any(|tags| tags.len() == 2));
    }

    #[test]
    fn synthetic_trigger_balance() {
        let spec = SyntheticSpec {
            seed: 99,
            ..SyntheticSpec::default()
        };
        let data = generate_synthetic(&spec, 10_000).unwrap();
        let first = data.iter().filter(|s| s.tokens.contains(&spec.triggers[0])).count();
        let frac = first as f64 / data.len() as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn synthetic_spec_validation() {
        let bad = SyntheticSpec {
            label_pairs: vec![],
            min_len: 5,
            max_len: 3,
            ..SyntheticSpec::default()
        };
        match bad.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
