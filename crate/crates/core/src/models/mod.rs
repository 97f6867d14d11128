//! Baseline predictors, their training by backpropagation through the
//! rollout, and parameter/FLOP accounting.

mod checkpoint;
mod flops;
mod lstm;
mod mlp;
mod norm;
mod residual;
mod train;
mod window;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use flops::{count_params_flops, physics_step_flops, Cost, FlopConvention};
pub use lstm::{LstmModel, DEFAULT_LSTM_HIDDEN};
pub use mlp::{Mlp, MlpTape};
pub use norm::Normalizer;
pub use residual::{ResidualBase, ResidualModel, DEFAULT_FF_HIDDEN};
pub use train::{mean_loss, train, Adam, TrainConfig, TrainHistory};
pub use window::{make_windows, Sequence, Window, WindowDataset};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{physics_predict, MotorSpeeds, PhysicsConfig};
use crate::math::{LearnState, LEARN_DIM};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sequence `{name}` has {len} samples, horizon {horizon} needs at least {}", horizon + 1)]
    TooShort { name: String, len: usize, horizon: usize },
    #[error("non-finite loss {loss} at epoch {epoch}, step {step} (gradient norm {grad_norm:.3e})")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64, grad_norm: f64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Open-loop multi-step predictor: `ŷ_{t+h|t}` for `h = 1..inputs.len()`.
pub trait Predictor: Sync {
    fn name(&self) -> String;
    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState>;
}

/// A predictor with a flat trainable parameter vector and an analytic
/// gradient of the rollout loss.
pub trait Trainable: Predictor {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn normalizer(&self) -> &Normalizer;

    /// Rollout loss over the first `horizon` steps of `w`; adds its gradient
    /// into `grad`.
    fn loss_grad(&self, w: &Window<'_>, horizon: usize, grad: &mut [f64]) -> f64;

    fn loss(&self, w: &Window<'_>, horizon: usize) -> f64 {
        let pred = self.predict(w.y0, &w.inputs[..horizon]);
        let p: Vec<[f64; LEARN_DIM]> = pred.iter().map(|y| y.to_array()).collect();
        rollout_loss(&p, &w.targets[..horizon], &self.normalizer().state_std)
    }
}

/// `(1 / 12H) Σ_h Σ_c ((ŷ − y) / σ_c)²`.
pub fn rollout_loss(pred: &[[f64; LEARN_DIM]], targets: &[LearnState], std: &[f64; LEARN_DIM]) -> f64 {
    let mut s = 0.0;
    for (p, t) in pred.iter().zip(targets) {
        let t = t.to_array();
        for c in 0..LEARN_DIM {
            let e = (p[c] - t[c]) / std[c];
            s += e * e;
        }
    }
    s / (pred.len() * LEARN_DIM) as f64
}

/// `∂L/∂ŷ_h` of [`rollout_loss`] for one step.
pub(crate) fn loss_slope(p: &[f64; LEARN_DIM], t: &LearnState, std: &[f64; LEARN_DIM], horizon: usize) -> [f64; LEARN_DIM] {
    let t = t.to_array();
    let k = 2.0 / (horizon * LEARN_DIM) as f64;
    std::array::from_fn(|c| k * (p[c] - t[c]) / (std[c] * std[c]))
}

/// Constant hold `ŷ_{t+h|t} = ỹ_t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Naive;

impl Predictor for Naive {
    fn name(&self) -> String {
        "naive".into()
    }

    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState> {
        vec![*y0; inputs.len()]
    }
}

/// The physics rollout as a predictor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Physics(pub PhysicsConfig);

impl Predictor for Physics {
    fn name(&self) -> String {
        match self.0.mode {
            crate::dynamics::PhysicsMode::Full => "physics-full".into(),
            crate::dynamics::PhysicsMode::FrozenOmega => "physics".into(),
        }
    }

    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState> {
        physics_predict(y0, inputs, &self.0)
    }
}

/// Any of the five baselines, as stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Naive,
    Physics { config: PhysicsConfig },
    Residual(ResidualModel),
    Lstm(LstmModel),
}

impl Predictor for Model {
    fn name(&self) -> String {
        match self {
            Model::Naive => Naive.name(),
            Model::Physics { config } => Physics(*config).name(),
            Model::Residual(m) => m.name(),
            Model::Lstm(m) => m.name(),
        }
    }

    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState> {
        match self {
            Model::Naive => Naive.predict(y0, inputs),
            Model::Physics { config } => physics_predict(y0, inputs, config),
            Model::Residual(m) => m.predict(y0, inputs),
            Model::Lstm(m) => m.predict(y0, inputs),
        }
    }
}
