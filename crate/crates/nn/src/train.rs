//! Two-step SGD training: a quick fit on a stratified subset, then the full
//! set at a lower learning rate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use carryscan_core::classes::Labels;
use carryscan_core::preprocess::RaeCube;

use crate::error::NnError;
use crate::loss::FocalParams;
use crate::network::{Network, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub step1_lr: f64,
    pub step2_lr: f64,
    /// Learning rate is halved after this many epochs.
    pub lr_halving_epochs: usize,
    pub momentum: f64,
    pub step1_max_epochs: usize,
    pub step2_max_epochs: usize,
    pub subset_fraction: f64,
    /// Step 1 ends once mean per-class training accuracy reaches this.
    pub target_accuracy: f64,
    /// Step 2 also ends early at this training accuracy, when set.
    pub step2_stop_accuracy: Option<f64>,
    pub focal: FocalParams,
    pub reduction: Reduction,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            step1_lr: 4e-4,
            step2_lr: 1e-4,
            lr_halving_epochs: 10,
            momentum: 0.9,
            step1_max_epochs: 30,
            step2_max_epochs: 60,
            subset_fraction: 0.1,
            target_accuracy: 0.9,
            step2_stop_accuracy: None,
            focal: FocalParams::default(),
            reduction: Reduction::Sum,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub sample: Sample,
    pub labels: [bool; 3],
}

impl TrainingSample {
    pub fn from_cube(cube: &RaeCube, labels: Labels) -> Self {
        Self {
            sample: sample_from_cube(cube),
            labels: labels.0,
        }
    }
}

pub fn sample_from_cube(cube: &RaeCube) -> Sample {
    Sample {
        cube: cube.values.iter().map(|&v| v as f64).collect(),
        range_m: cube.center_range_m,
        azimuth_deg: cube.center_azimuth_deg,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub step: u8,
    pub epoch: usize,
    pub lr: f64,
    /// Mean loss per sample.
    pub loss: f64,
    /// Mean per-class binary accuracy at threshold 0.5.
    pub accuracy: f64,
}

impl std::fmt::Display for EpochLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step={} epoch={} lr={:.3e} loss={:.6} acc={:.4}",
            self.step, self.epoch, self.lr, self.loss, self.accuracy
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
}

impl TrainReport {
    pub fn last(&self, step: u8) -> Option<&EpochLog> {
        self.epochs.iter().rev().find(|e| e.step == step)
    }
}

/// Indices of a subset that keeps each label combination's share.
pub fn stratified_subset(data: &[TrainingSample], fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); 8];
    for (i, s) in data.iter().enumerate() {
        let key = s.labels.iter().enumerate().map(|(k, &b)| (b as usize) << k).sum::<usize>();
        strata[key].push(i);
    }
    let mut out = Vec::new();
    for mut s in strata.into_iter().filter(|s| !s.is_empty()) {
        s.shuffle(rng);
        let take = ((s.len() as f64 * fraction).round() as usize).clamp(1, s.len());
        out.extend_from_slice(&s[..take]);
    }
    out.sort_unstable();
    out
}

fn sgd_step(net: &mut Network, lr: f64, momentum: f64) {
    for p in net.params_mut() {
        for ((w, g), v) in p.value.iter_mut().zip(&p.grad).zip(p.velocity.iter_mut()) {
            *v = momentum * *v + g;
            *w -= lr * *v;
        }
    }
}

fn run_epoch(
    net: &mut Network,
    data: &[TrainingSample],
    order: &mut [usize],
    cfg: &TrainConfig,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), NnError> {
    order.shuffle(rng);
    let (mut loss, mut correct) = (0.0, 0usize);
    for batch in order.chunks(cfg.batch_size.max(1)) {
        net.zero_grad();
        let scale = match cfg.reduction {
            Reduction::Mean => 1.0 / batch.len() as f64,
            Reduction::Sum => 1.0,
        };
        for &i in batch {
            let s = &data[i];
            let trace = net.forward(&s.sample)?;
            correct += trace.probabilities.iter().zip(&s.labels).filter(|(p, &y)| (**p > 0.5) == y).count();
            loss += net.backward(&trace, s.labels, &cfg.focal, scale);
        }
        sgd_step(net, lr, cfg.momentum);
    }
    let n = order.len() as f64;
    Ok((loss / n, correct as f64 / (3.0 * n)))
}

/// Per-class accuracy at threshold 0.5, averaged over the classes.
pub fn accuracy(net: &Network, data: &[TrainingSample]) -> Result<f64, NnError> {
    let mut correct = 0usize;
    for s in data {
        let p = net.predict(&s.sample)?;
        correct += p.iter().zip(&s.labels).filter(|(p, &y)| (**p > 0.5) == y).count();
    }
    Ok(correct as f64 / (3.0 * data.len().max(1) as f64))
}

/// Runs both training steps, calling `log` after every epoch.
pub fn train(net: &mut Network, data: &[TrainingSample], cfg: &TrainConfig, mut log: impl FnMut(&EpochLog)) -> Result<TrainReport, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport::default();
    let steps = [
        (1u8, stratified_subset(data, cfg.subset_fraction, &mut rng), cfg.step1_lr, cfg.step1_max_epochs, Some(cfg.target_accuracy)),
        (2u8, (0..data.len()).collect(), cfg.step2_lr, cfg.step2_max_epochs, cfg.step2_stop_accuracy),
    ];
    for (step, mut order, base_lr, max_epochs, stop_at) in steps {
        for v in net.params_mut().into_iter().flat_map(|p| p.velocity.iter_mut()) {
            *v = 0.0;
        }
        for epoch in 0..max_epochs {
            let halvings = epoch / cfg.lr_halving_epochs.max(1);
            let lr = base_lr * 0.5f64.powi(halvings as i32);
            let (loss, accuracy) = run_epoch(net, data, &mut order, cfg, lr, &mut rng)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { step, epoch, loss });
            }
            let entry = EpochLog {
                step,
                epoch,
                lr,
                loss,
                accuracy,
            };
            log(&entry);
            report.epochs.push(entry);
            if stop_at.is_some_and(|t| accuracy >= t) {
                break;
            }
        }
    }
    Ok(report)
}
