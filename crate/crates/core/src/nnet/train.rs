//! Minibatch SGD over labeled image samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::softmax_cross_entropy_batch;
use super::model::{Gradients, OrientationModel};
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Exec};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub minibatches_per_step: usize,
    pub steps: usize,
    pub seed: u64,
    /// Samples per gradient work item. The reduction always runs over chunks
    /// in order, so results do not depend on the thread count.
    pub chunk_size: usize,
    /// Stop after the first step whose validation accuracy reaches this value.
    pub stop_at_val_accuracy: Option<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            minibatch_size: 100,
            minibatches_per_step: 100,
            steps: 30,
            seed: 0,
            chunk_size: 16,
            stop_at_val_accuracy: None,
            exec: Exec::Parallel,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.minibatch_size == 0 || self.minibatches_per_step == 0 || self.chunk_size == 0 {
            return Err(Error::InvalidArgument(
                "minibatch size, minibatches per step and chunk size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub step: usize,
    pub mean_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn final_val_accuracy(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.val_accuracy)
    }
}

/// Shuffles without replacement and reshuffles at every epoch boundary.
struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    fn new(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        EpochSampler { order, pos: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

/// Stacks sample images into an `(N, 32, 32, 3)` batch.
pub fn batch_tensor(samples: &[LabeledSample], indices: &[usize]) -> Result<Tensor> {
    let first = samples
        .get(*indices.first().ok_or(Error::Empty { what: "batch" })?)
        .ok_or_else(|| Error::InvalidArgument("batch index out of range".into()))?;
    let shape = first.image.shape();
    let mut data = Vec::with_capacity(indices.len() * first.image.len());
    for &i in indices {
        data.extend(samples[i].image.data().iter().map(|&v| f64::from(v)));
    }
    let mut full = vec![indices.len()];
    full.extend_from_slice(&shape);
    Tensor::from_vec(&full, data)
}

/// Summed loss and summed gradients for one chunk of samples.
fn chunk_gradient(model: &OrientationModel, samples: &[LabeledSample], indices: &[usize]) -> Result<(f64, Gradients)> {
    let x = batch_tensor(samples, indices)?;
    let labels: Vec<usize> = indices.iter().map(|&i| samples[i].label.index()).collect();
    let (logits, caches) = model.forward_train(&x)?;
    let (loss, grad) = softmax_cross_entropy_batch(&logits, &labels)?;
    let (_, grads) = model.backward(&caches, grad)?;
    Ok((loss, grads))
}

/// Mean loss and mean gradient over a minibatch.
pub fn minibatch_gradient(
    model: &OrientationModel,
    samples: &[LabeledSample],
    indices: &[usize],
    chunk_size: usize,
    exec: Exec,
) -> Result<(f64, Gradients)> {
    if indices.is_empty() {
        return Err(Error::Empty { what: "minibatch" });
    }
    let chunks: Vec<&[usize]> = indices.chunks(chunk_size.max(1)).collect();
    let parts = map_indexed(exec, chunks.len(), |c| chunk_gradient(model, samples, chunks[c]));
    let mut total_loss = 0.0;
    let mut total = Gradients::zeros_like(model);
    for part in parts {
        let (loss, grads) = part?;
        total_loss += loss;
        total.accumulate(&grads);
    }
    let scale = 1.0 / indices.len() as f64;
    total.scale(scale);
    Ok((total_loss * scale, total))
}

/// Predicted class index for every sample, batched in groups of `chunk_size`.
pub fn predict_samples(model: &OrientationModel, samples: &[LabeledSample], chunk_size: usize, exec: Exec) -> Result<Vec<usize>> {
    let chunk_size = chunk_size.max(1);
    let n_chunks = samples.len().div_ceil(chunk_size);
    let parts = map_indexed(exec, n_chunks, |c| {
        let idx: Vec<usize> = (c * chunk_size..((c + 1) * chunk_size).min(samples.len())).collect();
        model.classify_batch(&batch_tensor(samples, &idx)?)
    });
    let mut out = Vec::with_capacity(samples.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn accuracy_on(model: &OrientationModel, samples: &[LabeledSample], exec: Exec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty { what: "evaluation set" });
    }
    let preds = predict_samples(model, samples, 64, exec)?;
    let correct = preds.iter().zip(samples).filter(|(p, s)| **p == s.label.index()).count();
    Ok(correct as f64 / samples.len() as f64)
}

/// Trains `model` in place with plain SGD and marks it trained.
///
/// One step is `minibatches_per_step` updates. Validation accuracy is
/// recorded after every step when `val` is non-empty.
pub fn train(model: &mut OrientationModel, train_set: &[LabeledSample], cfg: &TrainConfig, val: &[LabeledSample]) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty { what: "training set" });
    }
    let mut sampler = EpochSampler::new(train_set.len(), cfg.seed);
    let mut report = TrainReport::default();
    for step in 1..=cfg.steps {
        let mut loss_sum = 0.0;
        for _ in 0..cfg.minibatches_per_step {
            let batch = sampler.next_batch(cfg.minibatch_size);
            let (loss, grads) = minibatch_gradient(model, train_set, &batch, cfg.chunk_size, cfg.exec)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Divergence { step });
            }
            model.apply_sgd(&grads, cfg.learning_rate);
            loss_sum += loss;
        }
        let val_accuracy = if val.is_empty() { None } else { Some(accuracy_on(model, val, cfg.exec)?) };
        log::debug!("step {step}: loss {:.4} val {:?}", loss_sum / cfg.minibatches_per_step as f64, val_accuracy);
        report.steps.push(StepRecord {
            step,
            mean_loss: loss_sum / cfg.minibatches_per_step as f64,
            val_accuracy,
        });
        if let (Some(target), Some(acc)) = (cfg.stop_at_val_accuracy, val_accuracy) {
            if acc >= target && step < cfg.steps {
                report.stopped_early = true;
                break;
            }
        }
    }
    model.trained = true;
    Ok(report)
}

/// Continues training an already trained model on new data.
pub fn fine_tune(model: &mut OrientationModel, train_set: &[LabeledSample], cfg: &TrainConfig, val: &[LabeledSample]) -> Result<TrainReport> {
    if !model.trained {
        return Err(Error::InvalidArgument("fine-tuning requires a trained model".into()));
    }
    train(model, train_set, cfg, val)
}
