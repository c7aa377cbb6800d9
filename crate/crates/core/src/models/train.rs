use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::network::Network;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Drives the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 5, lr: 0.05, batch: 16, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// Minibatch SGD on mean cross-entropy.
///
/// Per-example gradients are computed in parallel and then summed in example
/// order, so results do not depend on the thread count.
pub fn train<T: Scalar>(net: &mut Network<T>, data: &Dataset<T>, cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    if cfg.batch == 0 || cfg.lr <= 0.0 || cfg.lr.is_nan() {
        return Err(Error::Config { line: 0, message: format!("batch {} and lr {} must be positive", cfg.batch, cfg.lr) });
    }
    if data.is_empty() {
        return Err(Error::Shape("cannot train on an empty dataset".into()));
    }
    if data.classes() > net.config().classes {
        return Err(Error::Label { label: data.classes() - 1, classes: net.config().classes });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch) {
            let per_example: Vec<(T, bool, Vec<Vec<T>>)> = chunk
                .par_iter()
                .map(|&i| -> Result<_> {
                    let x = &data.images()[i];
                    let label = data.labels()[i];
                    let trace = net.forward(x)?;
                    let hit = argmax(trace.logits().as_slice()) == label;
                    let (loss, g) = crate::nn::softmax_cross_entropy(trace.logits(), &[label])?;
                    Ok((loss, hit, net.backward(&trace, &g)?.params))
                })
                .collect::<Result<_>>()?;
            let mut total = per_example[0].2.clone();
            for (_, _, g) in &per_example[1..] {
                for (acc, part) in total.iter_mut().zip(g) {
                    for (a, &p) in acc.iter_mut().zip(part) {
                        *a = *a + p;
                    }
                }
            }
            for (loss, hit, _) in &per_example {
                loss_sum += loss.as_f64();
                correct += *hit as usize;
            }
            let lr = T::of(cfg.lr / chunk.len() as f64);
            net.sgd_step(&total, lr)?;
        }
        stats.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: loss_sum / data.len() as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        });
    }
    Ok(stats)
}

/// Index of the largest value, first on ties.
pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Predicted class of every sample in a batch.
pub fn predict<T: Scalar>(net: &Network<T>, x: &Tensor<T>) -> Result<Vec<usize>> {
    let logits = net.logits(x)?;
    Ok(logits.as_slice().chunks(logits.per_sample()).map(argmax).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub correct: usize,
    pub total: usize,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Predictions for a whole dataset, one image per task.
pub fn evaluate<T: Scalar>(net: &Network<T>, data: &Dataset<T>) -> Result<Evaluation> {
    let predictions: Vec<usize> =
        data.images().par_iter().map(|x| predict(net, x).map(|p| p[0])).collect::<Result<_>>()?;
    let correct = predictions.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
    Ok(Evaluation { predictions, correct, total: data.len() })
}
