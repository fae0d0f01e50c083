//! SGD with momentum, global-norm clipping and `lr0 / (1 + decay·epoch)`
//! decay, plus the best-on-dev training loop.

use std::fmt;
use std::time::Instant;

use log::info;

use crate::corpus::EncodedSentence;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_accuracy, evaluate_span_f1};
use crate::model::Model;
use crate::rng::Rng;
use crate::spans::Scheme;
use crate::tape::Tape;
use crate::tensor::ParamStore;

/// Zeroes gradients on fixed coordinates, then rescales all gradients so
/// their global L2 norm is at most `max_norm`. Returns the applied scale.
pub fn clip_gradients(store: &mut ParamStore, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for p in store.iter_mut() {
        let fixed = p.fixed.clone();
        let g = p.tensor.grad_mut();
        for k in fixed {
            g[k] = 0.0;
        }
        sq += g.iter().map(|x| x * x).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm <= max_norm || norm == 0.0 {
        return 1.0;
    }
    let scale = max_norm / norm;
    for p in store.iter_mut() {
        p.tensor.grad_mut().iter_mut().for_each(|g| *g *= scale);
    }
    scale
}

pub fn global_grad_norm(store: &ParamStore) -> f64 {
    store
        .iter()
        .filter_map(|p| p.tensor.grad())
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

pub fn lr_for_epoch(lr0: f64, decay: f64, epoch: usize) -> f64 {
    lr0 / (1.0 + decay * epoch as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub lr: f64,
    pub momentum: f64,
    pub l2: f64,
    velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(store: &ParamStore, lr: f64, momentum: f64, l2: f64) -> Self {
        OptimizerState {
            lr,
            momentum,
            l2,
            velocity: store.iter().map(|p| vec![0.0; p.tensor.len()]).collect(),
        }
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// `v ← μv − lr(g + l2·θ); θ ← θ + v` on every non-fixed coordinate,
    /// then zeroes all gradients.
    pub fn step(&mut self, store: &mut ParamStore) {
        for (p, v) in store.iter_mut().zip(&mut self.velocity) {
            let grad = p.tensor.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; v.len()]);
            let pinned: Vec<f64> = p.fixed.iter().map(|&k| p.tensor.values()[k]).collect();
            let vals = p.tensor.values_mut();
            for k in 0..vals.len() {
                v[k] = self.momentum * v[k] - self.lr * (grad[k] + self.l2 * vals[k]);
                vals[k] += v[k];
            }
            for (&k, &x) in p.fixed.iter().zip(&pinned) {
                vals[k] = x;
                v[k] = 0.0;
            }
        }
        store.zero_grad();
    }
}

pub fn sgd_step(state: &mut OptimizerState, store: &mut ParamStore) {
    state.step(store);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    SpanF1(Scheme),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Accuracy => f.write_str("acc"),
            Metric::SpanF1(_) => f.write_str("span-f1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub l2: f64,
    pub clip: f64,
    pub decay: f64,
    pub seed: u64,
    pub metric: Metric,
    /// Stop after the first epoch whose dev metric reaches this value.
    pub target: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 10,
            lr: 0.01,
            momentum: 0.9,
            l2: 1e-8,
            clip: 5.0,
            decay: 0.035,
            seed: 1,
            metric: Metric::Accuracy,
            target: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.batch_size == 0 {
            errs.push("batch size must be positive".to_string());
        }
        if !(self.lr > 0.0) {
            errs.push(format!("learning rate {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            errs.push(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if !(self.l2 >= 0.0) {
            errs.push(format!("l2 {} must be non-negative", self.l2));
        }
        if !(self.clip > 0.0) {
            errs.push(format!("clip norm {} must be positive", self.clip));
        }
        if !(self.decay >= 0.0) {
            errs.push(format!("decay {} must be non-negative", self.decay));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    /// Mean sentence loss over the epoch.
    pub train_loss: f64,
    pub dev_metric: f64,
    /// Best dev metric so far, this epoch included.
    pub best_metric: f64,
    pub seconds: f64,
}

impl EpochRecord {
    /// `epoch, lr, train_loss, dev_metric, seconds`, tab-separated.
    pub fn log_line(&self) -> String {
        format!(
            "{}\t{:.8}\t{:.6}\t{:.6}\t{:.3}",
            self.epoch, self.lr, self.train_loss, self.dev_metric, self.seconds
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the returned model, `None` if no epoch ran.
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
}

impl TrainReport {
    pub const HEADER: &'static str = "epoch\tlr\ttrain_loss\tdev_metric\tseconds";

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for e in &self.epochs {
            s.push_str(&e.log_line());
            s.push('\n');
        }
        s
    }
}

pub fn dev_metric(model: &Model, data: &[EncodedSentence], metric: Metric) -> Result<f64> {
    match metric {
        Metric::Accuracy => evaluate_accuracy(model, data),
        Metric::SpanF1(scheme) => Ok(evaluate_span_f1(model, data, scheme)?.f1),
    }
}

/// Trains a copy of `model` and returns the parameters that scored best on
/// `dev`. Every epoch shuffles the training order, runs mini-batches of
/// `batch_size` sentences (sentence losses averaged within a batch), clips
/// and steps. The result is a deterministic function of the inputs.
pub fn train(
    model: &Model,
    train_set: &[EncodedSentence],
    dev_set: &[EncodedSentence],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Contract("training and development sets must be non-empty".into()));
    }
    let mut report = TrainReport::default();
    let mut best = model.clone();
    if cfg.epochs == 0 {
        return Ok((best, report));
    }
    let mut current = model.clone();
    current.store.zero_grad();
    let root = Rng::new(cfg.seed);
    let mut shuffle_rng = root.substream("shuffle");
    let mut dropout_rng = root.substream("dropout");
    let mut opt = OptimizerState::new(&current.store, cfg.lr, cfg.momentum, cfg.l2);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best_metric = f64::NEG_INFINITY;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        opt.lr = lr_for_epoch(cfg.lr, cfg.decay, epoch);
        shuffle_rng.shuffle(&mut order);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let mut tape = Tape::new();
                let loss = current.loss(&mut tape, &train_set[i], Some(&mut dropout_rng))?;
                let value = tape.scalar(loss);
                if !value.is_finite() {
                    return Err(Error::NonFinite {
                        epoch: epoch + 1,
                        batch: b + 1,
                        loss: value,
                    });
                }
                total += value;
                let scaled = tape.scale(loss, weight);
                tape.backward(scaled, &mut current.store)?;
            }
            clip_gradients(&mut current.store, cfg.clip);
            sgd_step(&mut opt, &mut current.store);
        }
        let metric = dev_metric(&current, dev_set, cfg.metric)?;
        if metric > best_metric {
            best_metric = metric;
            best = current.clone();
            report.best_epoch = Some(epoch + 1);
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            lr: opt.lr,
            train_loss: total / train_set.len() as f64,
            dev_metric: metric,
            best_metric,
            seconds: started.elapsed().as_secs_f64(),
        };
        info!("{}", record.log_line());
        on_epoch(&record);
        report.epochs.push(record);
        if cfg.target.is_some_and(|t| metric >= t) {
            break;
        }
    }
    report.best_metric = Some(best_metric);
    best.store.zero_grad();
    Ok((best, report))
}
