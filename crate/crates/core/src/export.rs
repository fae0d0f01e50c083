//! Attention export: one JSON object per sentence and line,
//! `{"tokens": [...], "labels": [...], "layers": [n×L matrices]}`, with
//! floats written at 17 significant digits.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Arch, AttentionTrace, Model};
use crate::serialize::fmt_f64;
use crate::tensor::Tensor;

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_matrix(out: &mut String, t: &Tensor) {
    out.push('[');
    for i in 0..t.rows() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        for (j, &x) in t.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(x));
        }
        out.push(']');
    }
    out.push(']');
}

pub fn attention_record<S: AsRef<str>>(tokens: &[S], labels: &[String], trace: &AttentionTrace) -> String {
    let mut s = String::from("{\"tokens\":[");
    let toks: Vec<String> = tokens.iter().map(|t| json_str(t.as_ref())).collect();
    s.push_str(&toks.join(","));
    s.push_str("],\"labels\":[");
    let labs: Vec<String> = labels.iter().map(|l| json_str(l)).collect();
    s.push_str(&labs.join(","));
    s.push_str("],\"layers\":[");
    for (i, layer) in trace.layers.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        json_matrix(&mut s, layer);
    }
    s.push_str("]}");
    s
}

/// JSON lines for every sentence; empty sentences are skipped.
pub fn export_attention<S: AsRef<str>>(model: &Model, sentences: &[Vec<S>]) -> Result<String> {
    if model.config.arch != Arch::Lan {
        return Err(Error::UnsupportedArch(model.config.arch.to_string()));
    }
    let mut out = String::new();
    for tokens in sentences.iter().filter(|s| !s.is_empty()) {
        let f = model.forward(&model.vocabs.encode_tokens(tokens))?;
        let _ = writeln!(out, "{}", attention_record(tokens, model.vocabs.labels.names(), &f.trace));
    }
    Ok(out)
}
