//! `key=value` configuration files layered under command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use seqlab_core::spans::Scheme;
use seqlab_core::train::Metric;
use seqlab_core::{Arch, ModelConfig, TrainConfig};

use crate::cli::TrainArgs;
use crate::UsageError;

/// Every key a config file may set. Underscores and dashes are equivalent.
pub const KEYS: &[&str] = &[
    "arch",
    "train",
    "dev",
    "test",
    "model",
    "report",
    "embeddings",
    "seed",
    "metric",
    "scheme",
    "layers",
    "hidden",
    "heads",
    "dropout",
    "word-dim",
    "char-dim",
    "char-hidden",
    "min-count",
    "lr",
    "momentum",
    "l2",
    "decay",
    "clip",
    "batch",
    "epochs",
    "target",
    "export-labels",
];

/// Parses `key=value` lines; `#` starts a comment, blank lines are ignored.
/// Unknown and repeated keys are errors.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value, found {line:?}", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(UsageError(format!("config line {}: unknown key {key:?}", i + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(UsageError(format!("config line {}: key {key:?} set twice", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    Ok(parse_config(&text)?)
}

pub fn parse_metric(s: &str, scheme: Scheme) -> Result<Metric, UsageError> {
    match s {
        "acc" | "accuracy" => Ok(Metric::Accuracy),
        "span-f1" | "f1" => Ok(Metric::SpanF1(scheme)),
        _ => Err(UsageError(format!("unknown metric {s:?} (expected acc or span-f1)"))),
    }
}

/// Fully resolved training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: Option<PathBuf>,
    pub model_path: PathBuf,
    pub report: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub export_labels: Option<PathBuf>,
    pub min_count: usize,
    pub model: ModelConfig,
    pub train_cfg: TrainConfig,
}

/// Values from the file, overridden by flags, over the built-in defaults.
struct Layer<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layer<'_> {
    fn get<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| UsageError(format!("config key {key}: bad value {v:?}: {e}"))),
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn resolve_train(args: &TrainArgs) -> Result<TrainSettings> {
    let file = match &args.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let l = Layer { file: &file };
    let required = |key: &str, flag: Option<PathBuf>| -> Result<PathBuf> {
        l.get(key, flag)?
            .ok_or_else(|| anyhow!(UsageError(format!("--{key} is required (flag or config key)"))))
    };
    let train = required("train", args.train.clone())?;
    let dev = required("dev", args.dev.clone())?;
    let model_path = required("model", args.model.clone())?;
    let report = l
        .get("report", args.report.clone())?
        .unwrap_or_else(|| with_suffix(&model_path, ".report.tsv"));

    let mut model = ModelConfig::default();
    let arch: Option<String> = l.get("arch", args.arch.clone())?;
    if let Some(a) = arch {
        model.arch = Arch::from_str(&a).map_err(|e| UsageError(e.to_string()))?;
    }
    set(&mut model.num_layers, l.get("layers", args.layers)?);
    set(&mut model.hidden, l.get("hidden", args.hidden)?);
    set(&mut model.heads, l.get("heads", args.heads)?);
    set(&mut model.dropout, l.get("dropout", args.dropout)?);
    set(&mut model.word_emb_dim, l.get("word-dim", args.word_dim)?);
    set(&mut model.char_emb_dim, l.get("char-dim", args.char_dim)?);
    set(&mut model.char_hidden, l.get("char-hidden", args.char_hidden)?);

    let mut t = TrainConfig::default();
    let seed: Option<u64> = l.get("seed", args.seed)?;
    if let Some(s) = seed {
        model.seed = s;
        t.seed = s;
    }
    set(&mut t.lr, l.get("lr", args.lr)?);
    set(&mut t.momentum, l.get("momentum", args.momentum)?);
    set(&mut t.l2, l.get("l2", args.l2)?);
    set(&mut t.decay, l.get("decay", args.decay)?);
    set(&mut t.clip, l.get("clip", args.clip)?);
    set(&mut t.batch_size, l.get("batch", args.batch)?);
    set(&mut t.epochs, l.get("epochs", args.epochs)?);
    t.target = l.get("target", args.target)?;
    let scheme: Scheme = l
        .get::<String>("scheme", args.scheme.clone())?
        .map(|s| Scheme::from_str(&s).map_err(|e| UsageError(e.to_string())))
        .transpose()?
        .unwrap_or(Scheme::Bio);
    if let Some(m) = l.get::<String>("metric", args.metric.clone())? {
        t.metric = parse_metric(&m, scheme)?;
    }

    model.validate().map_err(|e| UsageError(e.to_string()))?;
    t.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(TrainSettings {
        train,
        dev,
        test: l.get("test", args.test.clone())?,
        model_path,
        report,
        embeddings: l.get("embeddings", args.embeddings.clone())?,
        export_labels: l.get("export-labels", args.export_labels.clone())?,
        min_count: l.get("min-count", args.min_count)?.unwrap_or(1),
        model,
        train_cfg: t,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
