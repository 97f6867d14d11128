use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::window::WindowDataset;
use super::{ModelError, Trainable};
use crate::par::Exec;

/// Windows per gradient work unit. Fixed so the floating-point reduction
/// order is independent of the executor.
const GRAD_CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub clip_norm: f64,
    /// Rollout length used in the loss; the dataset horizon when unset.
    pub horizon: Option<usize>,
    /// Random subset of windows visited per epoch; all when unset.
    pub windows_per_epoch: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            clip_norm: 1.0,
            horizon: None,
            windows_per_epoch: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, data: &WindowDataset) -> Result<usize, ModelError> {
        let h = self.horizon.unwrap_or(data.horizon);
        if h == 0 || h > data.horizon {
            return Err(ModelError::Config(format!("loss horizon {h} outside 1..={}", data.horizon)));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(ModelError::Config("batch size, learning rate and clip norm must be positive".into()));
        }
        if data.is_empty() {
            return Err(ModelError::Config("no training windows".into()));
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1, beta2, eps }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
    pub step_loss: Vec<f64>,
    pub steps: usize,
}

/// Mean loss and summed gradient over `batch`, reduced in chunk order.
pub(crate) fn batch_loss_grad<M: Trainable>(
    model: &M,
    data: &WindowDataset,
    batch: &[usize],
    horizon: usize,
    exec: Exec,
) -> (f64, Vec<f64>) {
    let n = model.params().len();
    let parts = exec.map_chunks(batch, GRAD_CHUNK, |chunk| {
        let mut g = vec![0.0; n];
        let mut l = 0.0;
        for &i in chunk {
            l += model.loss_grad(&data.window(i), horizon, &mut g);
        }
        (l, g)
    });
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let k = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|v| *v *= k);
    (loss * k, grad)
}

/// Mean rollout loss over all windows.
pub fn mean_loss<M: Trainable>(model: &M, data: &WindowDataset, horizon: usize, exec: Exec) -> f64 {
    let idx: Vec<usize> = (0..data.len()).collect();
    let parts = exec.map_chunks(&idx, 64, |c| c.iter().map(|&i| model.loss(&data.window(i), horizon)).sum::<f64>());
    parts.iter().sum::<f64>() / data.len() as f64
}

/// Mini-batch Adam on the rollout loss with gradient-norm clipping. The
/// result depends only on the model, data, config and seed.
pub fn train<M: Trainable>(model: &mut M, data: &WindowDataset, cfg: &TrainConfig, exec: Exec) -> Result<TrainHistory, ModelError> {
    let horizon = cfg.validate(data)?;
    let mut adam = Adam::new(model.params().len(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut hist = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let take = cfg.windows_per_epoch.unwrap_or(order.len()).min(order.len());
        let (mut sum, mut count) = (0.0, 0usize);
        for batch in order[..take].chunks(cfg.batch_size) {
            let (loss, mut grad) = batch_loss_grad(model, data, batch, horizon, exec);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !loss.is_finite() || !norm.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, step: hist.steps, loss, grad_norm: norm });
            }
            if norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(model.params_mut(), &grad, cfg.learning_rate);
            hist.step_loss.push(loss);
            hist.steps += 1;
            sum += loss * batch.len() as f64;
            count += batch.len();
        }
        hist.epoch_loss.push(sum / count.max(1) as f64);
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut a = Adam::new(2, 0.9, 0.999, 1e-8);
        let mut p = [1.0, -1.0];
        a.step(&mut p, &[0.5, -2.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-7);
        assert!((p[1] + 0.9).abs() < 1e-7);
    }
}
