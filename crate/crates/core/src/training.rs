//! Losses, optimizers and the training loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{predicted_classes, HeadKind, Network};
use crate::numerics::{Matrix, RngStream};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Mean binary cross-entropy and its gradient with respect to `probs`.
pub fn bce_loss(probs: &[f64], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::shape(
            "bce_loss",
            format!("{} probabilities", probs.len()),
            format!("{} labels", labels.len()),
        ));
    }
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        if y > 1 {
            return Err(Error::Data(format!("binary label must be 0 or 1, got {y}")));
        }
        let p = clamp_prob(p);
        let y = y as f64;
        loss -= y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p);
        grad.push((p - y) / (p * (1.0 - p)) / n);
    }
    Ok((loss / n, grad))
}

/// Mean categorical cross-entropy and its gradient with respect to `probs`.
pub fn cce_loss(probs: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if probs.rows() != labels.len() || labels.is_empty() {
        return Err(Error::shape(
            "cce_loss",
            format!("{} probability rows", probs.rows()),
            format!("{} labels", labels.len()),
        ));
    }
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for (r, &y) in labels.iter().enumerate() {
        if y >= probs.cols() {
            return Err(Error::Data(format!(
                "label {y} at row {r} is outside 0..{}",
                probs.cols()
            )));
        }
        let p = clamp_prob(probs[(r, y)]);
        loss -= libm::log(p);
        grad[(r, y)] = -1.0 / (p * n);
    }
    Ok((loss / n, grad))
}

/// Loss matching the head: BCE for sigmoid, CCE for softmax.
pub fn head_loss(head: HeadKind, probs: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    match head {
        HeadKind::Sigmoid => {
            let (loss, grad) = bce_loss(probs.as_slice(), labels)?;
            Ok((loss, Matrix::from_vec(probs.rows(), 1, grad)?))
        }
        HeadKind::Softmax { .. } => cce_loss(probs, labels),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Gd,
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
    Gd,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        match kind {
            OptimizerKind::Adam { beta1, beta2, eps } => Optimizer::Adam {
                beta1,
                beta2,
                eps,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
                t: 0,
            },
            OptimizerKind::Gd => Optimizer::Gd,
        }
    }

    /// In-place parameter update.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Gd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                eps,
                m,
                v,
                t,
            } => {
                *t += 1;
                let c1 = 1.0 - libm::pow(*beta1, f64::from(*t));
                let c2 = 1.0 - libm::pow(*beta2, f64::from(*t));
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= lr * m_hat / (libm::sqrt(v_hat) + *eps);
                }
            }
        }
    }
}

/// Training protocol. Defaults: 20 epochs, learning rate 0.05, Adam,
/// mini-batches of 32 reshuffled every epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
}

pub const DEFAULT_EPOCHS: usize = 20;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 32;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            optimizer: OptimizerKind::adam(),
            batch_size: Some(DEFAULT_BATCH_SIZE),
        }
    }
}

impl TrainConfig {
    pub fn full_batch() -> Self {
        TrainConfig {
            batch_size: None,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean training loss per epoch (sample-weighted average over the epoch's steps).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

/// Result of [`fit`]: the network as trained so far, even when training diverged.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub net: Network,
    pub history: TrainHistory,
    /// `(epoch, loss)` of the first non-finite loss, if any; training stops there.
    pub diverged: Option<(usize, f64)>,
}

/// Runs the configured number of epochs. Never fails on divergence; the
/// outcome records it instead.
pub fn fit(net: &Network, data: &Dataset, cfg: &TrainConfig, rng: &mut RngStream) -> Result<FitOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    if data.dim() != net.input_dim() {
        return Err(Error::shape(
            "train",
            format!("network expecting {} features", net.input_dim()),
            format!("dataset with {}", data.dim()),
        ));
    }
    if data.class_count() > net.head().classes() {
        return Err(Error::shape(
            "train",
            format!("{} head classes", net.head().classes()),
            format!("{} dataset classes", data.class_count()),
        ));
    }
    let mut net = net.clone();
    let mut params = net.flatten_params();
    let mut opt = Optimizer::new(cfg.optimizer, params.len());
    let n = data.len();
    let batch = cfg.batch_size.unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let full = Dataset::clone(data);
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        if batch < n {
            rng.shuffle(&mut order);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(batch) {
            let owned;
            let (x, y) = if chunk.len() == n {
                (full.features(), full.labels())
            } else {
                owned = full.subset(chunk)?;
                (owned.features(), owned.labels())
            };
            let (probs, cache) = net.forward(x)?;
            let (loss, d_probs) = head_loss(net.head(), &probs, y)?;
            if !loss.is_finite() {
                return Ok(FitOutcome {
                    net,
                    history,
                    diverged: Some((epoch, loss)),
                });
            }
            weighted += loss * chunk.len() as f64;
            let grads = net.backward(&cache, &d_probs)?;
            opt.step(&mut params, &grads.params, cfg.learning_rate);
            if params.iter().any(|p| !p.is_finite()) {
                return Ok(FitOutcome {
                    net,
                    history,
                    diverged: Some((epoch, f64::NAN)),
                });
            }
            net.set_params(&params)?;
        }
        history.epoch_loss.push(weighted / n as f64);
    }
    Ok(FitOutcome {
        net,
        history,
        diverged: None,
    })
}

/// Like [`fit`], but a non-finite loss is an error.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainConfig, rng: &mut RngStream) -> Result<(Network, TrainHistory)> {
    let out = fit(net, data, cfg, rng)?;
    if let Some((epoch, loss)) = out.diverged {
        return Err(Error::Divergence { epoch, loss });
    }
    Ok((out.net, out.history))
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate_accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let probs = net.predict_proba(data.features())?;
    let pred = predicted_classes(net.head(), &probs);
    let correct = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}
