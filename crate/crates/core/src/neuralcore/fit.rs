//! Minibatch training loop with seeded shuffling and best-validation
//! checkpointing.

use rand::seq::SliceRandom;

use crate::neuralcore::adam::Adam;
use crate::neuralcore::loss::{cross_entropy_loss, mse_loss};
use crate::neuralcore::network::Network;
use crate::neuralcore::tensor::Tensor;
use crate::neuralcore::NetError;
use crate::scalar::Real;
use crate::seed::Prng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
        }
    }
}

/// A dataset ready for training: batched inputs plus whichever targets the
/// objective needs.
#[derive(Debug, Clone)]
pub struct TrainData<T: Real> {
    pub x: Tensor<T>,
    pub concepts: Option<Tensor<T>>,
    pub labels: Option<Vec<usize>>,
}

impl<T: Real> TrainData<T> {
    pub fn len(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, idx: &[usize]) -> TrainData<T> {
        TrainData {
            x: self.x.gather_rows(idx),
            concepts: self.concepts.as_ref().map(|c| c.gather_rows(idx)),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FitReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Index of the smallest value, earliest wins ties. This is the checkpoint
/// selection rule.
pub fn best_epoch(val_losses: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in val_losses.iter().enumerate() {
        if v < val_losses[best] {
            best = i;
        }
    }
    best
}

fn batch_loss_grad<T: Real>(
    net: &Network<T>,
    loss: LossKind,
    batch: &TrainData<T>,
    rng: &mut Prng,
) -> Result<(f64, Vec<Tensor<T>>), NetError> {
    let (out, cache) = net.forward_train(&batch.x, rng)?;
    let (loss_value, out_grad) = match loss {
        LossKind::Mse => {
            let target = batch
                .concepts
                .as_ref()
                .ok_or(NetError::MissingTargets("concepts"))?;
            mse_loss(&out, target)?
        }
        LossKind::CrossEntropy => {
            let labels = batch
                .labels
                .as_ref()
                .ok_or(NetError::MissingTargets("labels"))?;
            cross_entropy_loss(&out, labels)?
        }
    };
    let (grads, _) = net.backward(&cache, &out_grad);
    Ok((loss_value, grads))
}

/// Mean loss over `data` in eval mode (no rng, dropout off).
pub fn eval_loss<T: Real>(
    net: &Network<T>,
    loss: LossKind,
    data: &TrainData<T>,
    batch_size: usize,
) -> Result<f64, NetError> {
    let n = data.len();
    let indices: Vec<usize> = (0..n).collect();
    let mut total = 0.0f64;
    for chunk in indices.chunks(batch_size) {
        let batch = data.gather(chunk);
        let out = net.forward_eval(&batch.x)?;
        let (l, _) = match loss {
            LossKind::Mse => mse_loss(
                &out,
                batch
                    .concepts
                    .as_ref()
                    .ok_or(NetError::MissingTargets("concepts"))?,
            )?,
            LossKind::CrossEntropy => cross_entropy_loss(
                &out,
                batch
                    .labels
                    .as_ref()
                    .ok_or(NetError::MissingTargets("labels"))?,
            )?,
        };
        total += l * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

/// Epoch loop: shuffle, minibatch Adam steps, validation in eval mode, and
/// restoration of the parameters from the epoch with the lowest validation
/// loss (earliest on ties). Aborts with a diagnostic on non-finite loss.
pub fn fit<T: Real>(
    net: &mut Network<T>,
    loss: LossKind,
    train: &TrainData<T>,
    val: &TrainData<T>,
    cfg: &FitConfig,
    rng: &mut Prng,
) -> Result<FitReport, NetError> {
    if cfg.epochs == 0 {
        return Err(NetError::InvalidSpec("epochs must be >= 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(NetError::InvalidSpec("batch_size must be >= 1".into()));
    }
    if train.is_empty() || val.is_empty() {
        return Err(NetError::EmptyDataset);
    }

    let mut opt = Adam::new(cfg.lr, &net.params);
    let mut indices: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<Tensor<T>>)> = None;

    for epoch in 0..cfg.epochs {
        indices.shuffle(rng);
        let mut epoch_loss = 0.0f64;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch = train.gather(chunk);
            let (l, grads) = batch_loss_grad(net, loss, &batch, rng)?;
            if !l.is_finite() {
                return Err(NetError::Divergence { epoch });
            }
            epoch_loss += l * chunk.len() as f64;
            opt.step(&mut net.params, &grads)?;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = eval_loss(net, loss, val, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(NetError::Divergence { epoch });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        let improved = match &best {
            None => true,
            Some((b, _, _)) => val_loss < *b,
        };
        if improved {
            best = Some((val_loss, epoch, net.params.clone()));
        }
    }

    let (best_val_loss, best_at, best_params) = best.unwrap();
    net.params = best_params;
    Ok(FitReport {
        history,
        best_epoch: best_at,
        best_val_loss,
    })
}
