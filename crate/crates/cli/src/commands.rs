use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use seqlab_core::bench::{bench_decode, report_tsv};
use seqlab_core::corpus::{
    build_vocabs, generate_synthetic, load_pretrained_embeddings, read_conll, write_conll, RawSentence, SyntheticSpec, Vocabs,
};
use seqlab_core::export::export_attention;
use seqlab_core::metrics::{evaluate_accuracy, evaluate_span_f1};
use seqlab_core::serialize::{export_label_embeddings, fmt_f64, load_model, save_model};
use seqlab_core::spans::{spans_from_labels, Scheme};
use seqlab_core::train::{dev_metric, train, Metric};
use seqlab_core::{Arch, EncodedSentence, Model, Rng};

use crate::cli::{BenchArgs, EvalArgs, SynthArgs, TagArgs, TrainArgs};
use crate::settings::{parse_metric, resolve_train};
use crate::UsageError;

fn encode(vocabs: &Vocabs, data: &[RawSentence], path: &Path) -> Result<Vec<EncodedSentence>> {
    vocabs
        .encode_all(data)
        .with_context(|| format!("{}: label alphabet mismatch with the model", path.display()))
}

fn read_data(path: &Path) -> Result<Vec<RawSentence>> {
    let data = read_conll(path).with_context(|| format!("reading {}", path.display()))?;
    if data.is_empty() {
        bail!("{} contains no sentences", path.display());
    }
    Ok(data)
}

/// Fails early with a scheme error if gold tags do not fit the scheme.
fn check_scheme(data: &[RawSentence], scheme: Scheme, path: &Path) -> Result<()> {
    for s in data {
        spans_from_labels(&s.tags, scheme).with_context(|| format!("{}: span-f1 needs prefixed tags", path.display()))?;
    }
    Ok(())
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Accuracy => "accuracy",
        Metric::SpanF1(_) => "f1",
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let s = resolve_train(args)?;
    let train_raw = read_data(&s.train)?;
    let dev_raw = read_data(&s.dev)?;
    if let Metric::SpanF1(scheme) = s.train_cfg.metric {
        check_scheme(&dev_raw, scheme, &s.dev)?;
    }
    let vocabs = build_vocabs(&train_raw, s.min_count)?;
    let train_set = encode(&vocabs, &train_raw, &s.train)?;
    let dev_set = encode(&vocabs, &dev_raw, &s.dev)?;

    let pretrained = match &s.embeddings {
        Some(p) => {
            let mut rng = Rng::new(s.model.seed).substream("pretrained");
            let t = load_pretrained_embeddings(p, &vocabs.words, s.model.word_emb_dim, &mut rng)
                .with_context(|| format!("loading embeddings {}", p.display()))?;
            for w in &t.warnings {
                warn!("{w}");
            }
            info!("pretrained vectors found for {} of {} words", t.found, vocabs.words.len());
            Some(t.table)
        }
        None => None,
    };
    let model = Model::build(s.model.clone(), vocabs, pretrained)?;
    info!(
        "{} model, {} parameters, {} labels, {} train / {} dev sentences",
        model.config.arch,
        model.parameter_count(),
        model.num_labels(),
        train_set.len(),
        dev_set.len()
    );

    let (best, report) = train(&model, &train_set, &dev_set, &s.train_cfg, |_| {})?;
    save_model(&best, &s.model_path).with_context(|| format!("writing {}", s.model_path.display()))?;
    fs::write(&s.report, report.to_tsv()).with_context(|| format!("writing {}", s.report.display()))?;
    if let Some(p) = &s.export_labels {
        export_label_embeddings(&best, p).with_context(|| format!("writing {}", p.display()))?;
    }

    let mut out = io::stdout().lock();
    let name = metric_name(s.train_cfg.metric);
    if let (Some(epoch), Some(m)) = (report.best_epoch, report.best_metric) {
        writeln!(out, "best_epoch\t{epoch}")?;
        writeln!(out, "dev_{name}\t{m}")?;
    }
    if let Some(p) = &s.test {
        let test_raw = read_data(p)?;
        let test = encode(&best.vocabs, &test_raw, p)?;
        writeln!(out, "test_{name}\t{}", dev_metric(&best, &test, s.train_cfg.metric)?)?;
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let scheme = Scheme::from_str(&args.scheme).map_err(|e| UsageError(e.to_string()))?;
    let metric = parse_metric(&args.metric, scheme)?;
    let model = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let raw = read_data(&args.test)?;
    let data = encode(&model.vocabs, &raw, &args.test)?;
    let mut out = io::stdout().lock();
    match metric {
        Metric::Accuracy => writeln!(out, "accuracy\t{}", evaluate_accuracy(&model, &data)?)?,
        Metric::SpanF1(scheme) => {
            check_scheme(&raw, scheme, &args.test)?;
            let prf = evaluate_span_f1(&model, &data, scheme)?;
            writeln!(out, "precision\t{}", prf.precision)?;
            writeln!(out, "recall\t{}", prf.recall)?;
            writeln!(out, "f1\t{}", prf.f1)?;
        }
    }
    Ok(())
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

/// Non-empty whitespace-tokenized lines; empty lines are reported and skipped.
pub fn tokenize_lines(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            warn!("input line {}: empty, skipped", i + 1);
        } else {
            out.push(tokens);
        }
    }
    out
}

/// `token<TAB>tag` lines plus a blank line; with `top_k`, `label=p` fields
/// for the k most probable labels follow (ties to the lower label id).
pub fn tag_sentence(model: &Model, tokens: &[String], top_k: Option<usize>, out: &mut String) -> Result<()> {
    let sent = model.vocabs.encode_tokens(tokens);
    let pred = model.predict(&sent)?;
    let dist = match top_k {
        Some(_) => Some(model.distributions(&sent)?),
        None => None,
    };
    for (i, (tok, &p)) in tokens.iter().zip(&pred).enumerate() {
        out.push_str(tok);
        out.push('\t');
        out.push_str(model.vocabs.labels.name(p));
        if let (Some(k), Some(d)) = (top_k, &dist) {
            let row = d.row(i);
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            for &j in order.iter().take(k) {
                out.push('\t');
                out.push_str(model.vocabs.labels.name(j));
                out.push('=');
                out.push_str(&fmt_f64(row[j]));
            }
        }
        out.push('\n');
    }
    out.push('\n');
    Ok(())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn cmd_tag(args: &TagArgs) -> Result<()> {
    if args.with_probs && args.top_k == 0 {
        return Err(UsageError("--top-k must be at least 1".into()).into());
    }
    let model = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let needs_lan = args.export_attention.is_some() || args.export_labels.is_some();
    if needs_lan && model.config.arch != Arch::Lan {
        bail!("attention and label exports need a lan model, this one is {}", model.config.arch);
    }
    let sentences = tokenize_lines(&read_input(args.input.as_deref())?);
    let top_k = args.with_probs.then_some(args.top_k);
    let mut text = String::new();
    for tokens in &sentences {
        tag_sentence(&model, tokens, top_k, &mut text)?;
    }
    write_output(args.output.as_deref(), &text)?;
    if let Some(p) = &args.export_attention {
        fs::write(p, export_attention(&model, &sentences)?).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &args.export_labels {
        export_label_embeddings(&model, p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let archs = match args.arch.as_str() {
        "both" => vec![Arch::Crf, Arch::Lan],
        "crf" => vec![Arch::Crf],
        "lan" => vec![Arch::Lan],
        other => return Err(UsageError(format!("bench arch must be crf, lan or both, got {other:?}")).into()),
    };
    if args.labels.is_empty() || args.labels.contains(&0) || args.n == 0 || args.reps == 0 || args.hidden == 0 {
        return Err(UsageError("label counts, --n, --hidden and --reps must be positive".into()).into());
    }
    let mut results = Vec::new();
    for arch in archs {
        results.extend(bench_decode(arch, &args.labels, args.n, args.hidden, args.reps, args.seed)?);
    }
    for r in &results {
        if r.ops != r.expected_ops {
            bail!("{} |L|={}: counted {} operations, closed form gives {}", r.arch, r.labels, r.ops, r.expected_ops);
        }
    }
    write_output(args.output.as_deref(), &report_tsv(&results))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        min_len: args.min_len,
        max_len: args.max_len,
        max_ambiguous: args.max_ambiguous,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    write_output(args.output.as_deref(), &write_conll(&generate_synthetic(&spec, args.sentences)?))
}
