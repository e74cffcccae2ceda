use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{to_f64, Network};
use crate::error::{Error, Result};
use crate::image::ImageStack;

/// Mixed into the config seed for the shuffling stream.
const SHUFFLE_STREAM: u64 = 0x5eed_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean binary cross-entropy over the epoch's training samples.
    pub loss: f64,
    pub val_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_accuracy)
    }
}

/// Numerically stable `BCE(σ(z), y)`.
pub fn bce_with_logit(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn accuracy_on(net: &mut Network, stacks: &[ImageStack]) -> Result<f64> {
    let mut correct = 0usize;
    for s in stacks {
        correct += (net.predict(s)? == s.label) as usize;
    }
    Ok(correct as f64 / stacks.len() as f64)
}

/// Mini-batch training with binary cross-entropy on the single logit.
/// Shuffling and dropout draw from streams seeded by the config seed.
pub fn train(net: &mut Network, train_set: &[ImageStack], val_set: &[ImageStack], opts: TrainOptions) -> Result<TrainReport> {
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    for s in train_set.iter().chain(val_set) {
        net.check_stack(s)?;
        if s.label > 1 {
            return Err(Error::invalid(format!("label {} of {} is not binary", s.label, s.sentence_id)));
        }
    }
    let mut shuffle = ChaCha8Rng::seed_from_u64(net.config().seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = vec![0.0f64; net.parameters().len()];
    let mut report = TrainReport::default();
    for epoch in 0..opts.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(opts.batch_size).enumerate() {
            grads.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                let y = train_set[i].label as f64;
                let logit = net.accumulate(to_f64(train_set[i].data()), &mut grads, |z| sigmoid(z) - y);
                batch_loss += bce_with_logit(logit, y);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            loss_sum += batch_loss;
            let scale = 1.0 / chunk.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            net.apply_gradients(&grads);
        }
        let val_accuracy = if val_set.is_empty() { None } else { Some(accuracy_on(net, val_set)?) };
        report.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            val_accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}
