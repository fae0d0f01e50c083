//! Token accuracy and exact-match span precision/recall/F1.

use crate::corpus::EncodedSentence;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::spans::{spans_from_labels, Scheme};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Precision is 0 with no predicted spans, recall 0 with no gold spans,
    /// and F1 is 0 when both are 0.
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Prf {
        let precision = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
        // 2PR/(P+R) reduces to 2c/(p+g), which rounds once.
        let f1 = if correct == 0 { 0.0 } else { 2.0 * correct as f64 / (predicted + gold) as f64 };
        Prf { precision, recall, f1 }
    }
}

/// Fraction of positions where `pred` equals `gold`, over all sentences.
pub fn accuracy<P: AsRef<[usize]>, G: AsRef<[usize]>>(pred: &[P], gold: &[G]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::Contract(format!("{} predictions for {} sentences", pred.len(), gold.len())));
    }
    let (mut correct, mut total) = (0usize, 0usize);
    for (p, g) in pred.iter().zip(gold) {
        let (p, g) = (p.as_ref(), g.as_ref());
        if p.len() != g.len() {
            return Err(Error::Contract(format!("{} predicted labels for {} tokens", p.len(), g.len())));
        }
        correct += p.iter().zip(g).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    if total == 0 {
        return Err(Error::Contract("accuracy over empty data".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Exact-match span scores, counting spans over all sentences.
pub fn span_prf<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>], scheme: Scheme) -> Result<Prf> {
    if pred.len() != gold.len() {
        return Err(Error::Contract(format!("{} predictions for {} sentences", pred.len(), gold.len())));
    }
    if gold.is_empty() {
        return Err(Error::Contract("span F1 over empty data".into()));
    }
    let (mut correct, mut n_pred, mut n_gold) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let ps = spans_from_labels(p, scheme)?;
        let gs = spans_from_labels(g, scheme)?;
        correct += ps.intersection(&gs).count();
        n_pred += ps.len();
        n_gold += gs.len();
    }
    Ok(Prf::from_counts(correct, n_pred, n_gold))
}

pub fn predict_all(model: &Model, data: &[EncodedSentence]) -> Result<Vec<Vec<usize>>> {
    data.iter().map(|s| model.predict(s)).collect()
}

pub fn evaluate_accuracy(model: &Model, data: &[EncodedSentence]) -> Result<f64> {
    let pred = predict_all(model, data)?;
    let gold: Vec<&[usize]> = data.iter().map(|s| s.labels.as_slice()).collect();
    accuracy(&pred, &gold)
}

pub fn evaluate_span_f1(model: &Model, data: &[EncodedSentence], scheme: Scheme) -> Result<Prf> {
    let names = |ids: &[usize]| -> Vec<String> {
        ids.iter().map(|&i| model.vocabs.labels.name(i).to_string()).collect()
    };
    let pred: Vec<Vec<String>> = predict_all(model, data)?.iter().map(|p| names(p)).collect();
    let gold: Vec<Vec<String>> = data.iter().map(|s| names(&s.labels)).collect();
    span_prf(&pred, &gold, scheme)
}
