use serde::{Deserialize, Serialize};

use super::window::Sequence;
use crate::dynamics::{phys_step, MotorSpeeds, PhysicsConfig};
use crate::math::{LearnState, LEARN_DIM};

const STD_EPS: f64 = 1e-12;

/// Relative floor on the output scale.
pub const DELTA_FLOOR: f64 = 1e-3;

fn rms<const N: usize>(rows: impl Iterator<Item = [f64; N]>) -> [f64; N] {
    let mut n = 0usize;
    let mut acc = [0.0; N];
    for r in rows {
        n += 1;
        for c in 0..N {
            acc[c] += r[c] * r[c];
        }
    }
    acc.map(|a| if n > 0 { (a / n as f64).sqrt() } else { 0.0 })
}

fn mean_std<const N: usize>(rows: impl Iterator<Item = [f64; N]>) -> ([f64; N], [f64; N]) {
    let mut n = 0usize;
    let mut mean = [0.0; N];
    let mut m2 = [0.0; N];
    for r in rows {
        n += 1;
        for c in 0..N {
            let d = r[c] - mean[c];
            mean[c] += d / n as f64;
            m2[c] += d * (r[c] - mean[c]);
        }
    }
    let mut std = [1.0; N];
    if n > 1 {
        for c in 0..N {
            let s = (m2[c] / n as f64).sqrt();
            std[c] = if s > STD_EPS && s.is_finite() { s } else { 1.0 };
        }
    }
    (mean, std)
}

/// Channel statistics from the training split. `state_*` scale network inputs
/// and the loss, `delta_scale` scales network outputs into state increments.
///
/// `delta_scale` is the RMS of the one-step residual left by the base
/// predictor, floored at [`DELTA_FLOOR`] times the RMS of the raw increment so
/// channels the base already predicts exactly keep a small output range.
/// Channels that never change in the training split get a zero scale, so the
/// network cannot move them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub state_mean: [f64; LEARN_DIM],
    pub state_std: [f64; LEARN_DIM],
    pub input_mean: [f64; 4],
    pub input_std: [f64; 4],
    pub delta_scale: [f64; LEARN_DIM],
}

impl Normalizer {
    /// Identity scaling, useful for tests.
    pub fn unit() -> Self {
        Self {
            state_mean: [0.0; LEARN_DIM],
            state_std: [1.0; LEARN_DIM],
            input_mean: [0.0; 4],
            input_std: [1.0; 4],
            delta_scale: [1.0; LEARN_DIM],
        }
    }

    /// Increments `ỹ_{k+1} − ỹ_k` set the output scale.
    pub fn from_increments(seqs: &[Sequence]) -> Self {
        Self::fit(seqs, |y, _| *y)
    }

    /// One-step residuals of the physics model set the output scale.
    pub fn from_physics_residuals(seqs: &[Sequence], phys: &PhysicsConfig) -> Self {
        Self::fit(seqs, |y, u| phys_step(y, u, phys))
    }

    fn fit(seqs: &[Sequence], base: impl Fn(&LearnState, &MotorSpeeds) -> LearnState) -> Self {
        let (state_mean, state_std) = mean_std(seqs.iter().flat_map(|s| s.states.iter().map(|y| y.to_array())));
        let (input_mean, input_std) = mean_std(seqs.iter().flat_map(|s| s.inputs.iter().map(|u| u.0)));
        let steps = |f: &dyn Fn(&LearnState, &MotorSpeeds) -> LearnState| {
            rms::<LEARN_DIM>(seqs.iter().flat_map(|s| {
                (0..s.len().saturating_sub(1)).map(move |k| {
                    let b = f(&s.states[k], &s.inputs[k]).to_array();
                    let n = s.states[k + 1].to_array();
                    std::array::from_fn(|c| n[c] - b[c])
                })
            }))
        };
        let residual: [f64; LEARN_DIM] = steps(&base);
        let increment: [f64; LEARN_DIM] = steps(&|y, _| *y);
        let delta_scale = std::array::from_fn(|c| {
            let s = residual[c].max(DELTA_FLOOR * increment[c]);
            if s > STD_EPS && s.is_finite() { s } else { 0.0 }
        });
        Self { state_mean, state_std, input_mean, input_std, delta_scale }
    }

    /// Network input `[(ỹ − μ)/σ, (u − μ_u)/σ_u]` for any scalar type.
    pub fn input(&self, y: &[f64; LEARN_DIM], u: &MotorSpeeds, out: &mut [f64]) {
        for c in 0..LEARN_DIM {
            out[c] = (y[c] - self.state_mean[c]) / self.state_std[c];
        }
        for c in 0..4 {
            out[LEARN_DIM + c] = (u.0[c] - self.input_mean[c]) / self.input_std[c];
        }
    }
}
