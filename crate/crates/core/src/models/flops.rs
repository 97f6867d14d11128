use serde::{Deserialize, Serialize};

use super::Model;
use crate::dynamics::{hover_speed, phys_step, MotorSpeeds, PhysicsConfig};
use crate::math::{Counted, LearnState, LEARN_DIM};

/// How a multiply–accumulate is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopConvention {
    /// One FLOP per fused multiply–accumulate.
    #[default]
    FusedMac,
    /// A multiply and an add, two FLOPs per multiply–accumulate.
    TwoPerMac,
}

impl FlopConvention {
    fn per_mac(self) -> u64 {
        match self {
            FlopConvention::FusedMac => 1,
            FlopConvention::TwoPerMac => 2,
        }
    }
}

/// Parameter count and cost of one prediction step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cost {
    pub params: usize,
    pub macs: u64,
    /// Everything outside dense multiply–accumulates: bias adds, activations
    /// (one FLOP each), normalisation and the physics step.
    pub other_flops: u64,
    pub flops: u64,
    pub convention: FlopConvention,
}

impl Cost {
    fn new(params: usize, macs: u64, other: u64, conv: FlopConvention) -> Self {
        Self { params, macs, other_flops: other, flops: macs * conv.per_mac() + other, convention: conv }
    }
}

/// Rotor map: four squares, then the thrust and three torque rows.
const ROTOR_WRENCH_FLOPS: u64 = 22;
/// Input normalisation (subtract, divide) on 16 channels.
const NORMALISE_FLOPS: u64 = 2 * (LEARN_DIM as u64 + 4);
/// Output scaling and the residual addition on 12 channels.
const RESIDUAL_FLOPS: u64 = 2 * LEARN_DIM as u64;

/// Operations in one discrete physics step, counted by running it on an
/// instrumented scalar: every add, subtract, multiply, divide, negation,
/// square root and trigonometric call is one FLOP.
pub fn physics_step_flops(cfg: &PhysicsConfig) -> u64 {
    let y = LearnState::from_array(&[0.1, 0.2, 1.0, 0.3, -0.2, 0.1, 0.05, -0.04, 0.3, 0.5, -0.4, 0.2].map(Counted));
    let u = MotorSpeeds::splat(hover_speed(&cfg.body, &cfg.rotor));
    Counted::reset();
    let _ = phys_step(&y, &u, cfg);
    Counted::count() + ROTOR_WRENCH_FLOPS
}

pub fn count_params_flops(model: &Model, conv: FlopConvention) -> Cost {
    match model {
        Model::Naive => Cost::new(0, 0, 0, conv),
        Model::Physics { config } => Cost::new(0, 0, physics_step_flops(config), conv),
        Model::Residual(m) => {
            let mlp = &m.mlp;
            let bias = (mlp.sizes[1..].iter().sum::<usize>()) as u64;
            let act = mlp.hidden_units() as u64;
            let phys = match &m.base {
                super::ResidualBase::Identity => 0,
                super::ResidualBase::Physics { config } => physics_step_flops(config),
            };
            Cost::new(mlp.param_count(), mlp.mac_count() as u64, bias + act + NORMALISE_FLOPS + RESIDUAL_FLOPS + phys, conv)
        }
        Model::Lstm(m) => {
            let n = m.hidden as u64;
            let i = (LEARN_DIM + 4) as u64;
            let macs = 4 * n * (i + n) + LEARN_DIM as u64 * n;
            let bias = 4 * n + LEARN_DIM as u64;
            // three sigmoids and two tanh per unit; c = f c + i g and h = o tanh(c)
            let act = 5 * n;
            let elementwise = 4 * n;
            Cost::new(m.params.len(), macs, bias + act + elementwise + NORMALISE_FLOPS + RESIDUAL_FLOPS, conv)
        }
    }
}
