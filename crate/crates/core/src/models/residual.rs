use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpTape};
use super::norm::Normalizer;
use super::window::Window;
use super::{loss_slope, rollout_loss, Predictor, Trainable};
use crate::dynamics::{phys_step, MotorSpeeds, PhysicsConfig};
use crate::math::{wrap_rotvec, Jet, LearnState, RotationVector, Vec3, LEARN_DIM};

/// Hidden layout of the default residual network (≈18.5k parameters).
pub const DEFAULT_FF_HIDDEN: [usize; 2] = [122, 122];

const NET_IN: usize = LEARN_DIM + 4;

type Jac = [[f64; LEARN_DIM]; LEARN_DIM];

/// What the network output is added to at every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "snake_case")]
pub enum ResidualBase {
    /// `ŷ_{k+1} = ŷ_k + f_res(ŷ_k, u_k)`
    Identity,
    /// `ŷ_{k+1} = f_phys(ŷ_k, u_k) + f_res(ŷ_k, u_k)`
    Physics { config: PhysicsConfig },
}

/// Residual rollout model, covering the plain feed-forward residual and the
/// physics-plus-residual hybrid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualModel {
    pub base: ResidualBase,
    pub mlp: Mlp,
    pub params: Vec<f64>,
    pub norm: Normalizer,
}

fn phys_with_jacobian(y: &[f64; LEARN_DIM], u: &MotorSpeeds, cfg: &PhysicsConfig) -> ([f64; LEARN_DIM], Jac) {
    let yj: [Jet<LEARN_DIM>; LEARN_DIM] = std::array::from_fn(|i| Jet::variable(y[i], i));
    let out = phys_step(&LearnState::from_array(&yj), u, cfg).to_array();
    (std::array::from_fn(|i| out[i].v), std::array::from_fn(|i| out[i].d))
}

/// Wraps the attitude block in place; returns its 3×3 Jacobian when the
/// wrap was not the identity.
pub(crate) fn wrap_with_jacobian(y: &mut [f64; LEARN_DIM]) -> Option<[[f64; 3]; 3]> {
    let r = Vec3::new(y[6], y[7], y[8]);
    if r.norm_squared() <= std::f64::consts::PI * std::f64::consts::PI {
        return None;
    }
    let rj = RotationVector(Vec3::new(Jet::<3>::variable(r.x, 0), Jet::variable(r.y, 1), Jet::variable(r.z, 2)));
    let w = wrap_rotvec(&rj).0.to_array();
    for k in 0..3 {
        y[6 + k] = w[k].v;
    }
    Some(std::array::from_fn(|i| w[i].d))
}

impl ResidualModel {
    /// Untrained model whose output layer is zero, so it starts out as its
    /// base predictor.
    pub fn new(base: ResidualBase, hidden: &[usize], norm: Normalizer, seed: u64) -> Self {
        let mlp = Mlp::new(NET_IN, hidden, LEARN_DIM);
        let params = mlp.init(&mut ChaCha8Rng::seed_from_u64(seed), true);
        Self { base, mlp, params, norm }
    }

    pub fn is_hybrid(&self) -> bool {
        matches!(self.base, ResidualBase::Physics { .. })
    }

    /// The denormalised correction `f_res(ŷ, u)`.
    pub fn residual(&self, y: &[f64; LEARN_DIM], u: &MotorSpeeds) -> [f64; LEARN_DIM] {
        let mut x = [0.0; NET_IN];
        self.norm.input(y, u, &mut x);
        let o = self.mlp.eval(&self.params, &x);
        std::array::from_fn(|c| o[c] * self.norm.delta_scale[c])
    }

    fn step(&self, y: &[f64; LEARN_DIM], u: &MotorSpeeds) -> [f64; LEARN_DIM] {
        let base = match &self.base {
            ResidualBase::Identity => *y,
            ResidualBase::Physics { config } => phys_step(&LearnState::from_array(y), u, config).to_array(),
        };
        let d = self.residual(y, u);
        let mut next: [f64; LEARN_DIM] = std::array::from_fn(|c| base[c] + d[c]);
        wrap_with_jacobian(&mut next);
        next
    }
}

impl Predictor for ResidualModel {
    fn name(&self) -> String {
        if self.is_hybrid() { "hybrid".into() } else { "residual".into() }
    }

    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState> {
        let mut y = y0.to_array();
        inputs
            .iter()
            .map(|u| {
                y = self.step(&y, u);
                LearnState::from_array(&y)
            })
            .collect()
    }
}

impl Trainable for ResidualModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    fn loss_grad(&self, w: &Window<'_>, horizon: usize, grad: &mut [f64]) -> f64 {
        let h = horizon;
        let n = &self.norm;
        let mut ys = Vec::with_capacity(h + 1);
        ys.push(w.y0.to_array());
        let mut tapes = vec![MlpTape::default(); h];
        let mut jacs: Vec<Option<Jac>> = Vec::with_capacity(h);
        let mut wraps = Vec::with_capacity(h);
        let mut x = [0.0; NET_IN];
        for k in 0..h {
            let y = ys[k];
            let u = &w.inputs[k];
            n.input(&y, u, &mut x);
            let o = self.mlp.forward(&self.params, &x, &mut tapes[k]);
            let (base, jac) = match &self.base {
                ResidualBase::Identity => (y, None),
                ResidualBase::Physics { config } => {
                    let (v, j) = phys_with_jacobian(&y, u, config);
                    (v, Some(j))
                }
            };
            let mut next: [f64; LEARN_DIM] = std::array::from_fn(|c| base[c] + o[c] * n.delta_scale[c]);
            wraps.push(wrap_with_jacobian(&mut next));
            jacs.push(jac);
            ys.push(next);
        }
        let loss = rollout_loss(&ys[1..], &w.targets[..h], &n.state_std);

        let mut g_next = [0.0; LEARN_DIM];
        let mut d_o = [0.0; LEARN_DIM];
        let mut d_x = [0.0; NET_IN];
        for k in (0..h).rev() {
            let slope = loss_slope(&ys[k + 1], &w.targets[k], &n.state_std, h);
            let mut gy: [f64; LEARN_DIM] = std::array::from_fn(|c| g_next[c] + slope[c]);
            if let Some(jw) = &wraps[k] {
                let gr = [gy[6], gy[7], gy[8]];
                for j in 0..3 {
                    gy[6 + j] = (0..3).map(|i| jw[i][j] * gr[i]).sum();
                }
            }
            for c in 0..LEARN_DIM {
                d_o[c] = gy[c] * n.delta_scale[c];
            }
            self.mlp.backward(&self.params, &tapes[k], &d_o, grad, &mut d_x);
            let mut gk: [f64; LEARN_DIM] = std::array::from_fn(|c| d_x[c] / n.state_std[c]);
            match &jacs[k] {
                None => gk.iter_mut().zip(&gy).for_each(|(a, b)| *a += b),
                Some(j) => {
                    for (i, row) in j.iter().enumerate() {
                        for (c, jic) in row.iter().enumerate() {
                            gk[c] += jic * gy[i];
                        }
                    }
                }
            }
            g_next = gk;
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{hover_speed, physics_predict, PhysicsMode, RigidBodyParams, RotorParams};

    fn sample_window() -> (LearnState, Vec<MotorSpeeds>) {
        let y0 = LearnState::from_array(&[0.1, -0.2, 1.0, 0.5, -0.3, 0.2, 0.2, -0.1, 0.4, 1.0, -2.0, 0.5]);
        let om = hover_speed(&RigidBodyParams::default(), &RotorParams::default());
        let u: Vec<MotorSpeeds> =
            (0..20).map(|k| MotorSpeeds([om + 10.0 * k as f64, om - 5.0, om + 3.0, om - 20.0])).collect();
        (y0, u)
    }

    #[test]
    fn zero_output_residual_is_naive() {
        let m = ResidualModel::new(ResidualBase::Identity, &[8, 8], Normalizer::unit(), 1);
        let (y0, u) = sample_window();
        assert!(m.predict(&y0, &u).iter().all(|y| *y == y0));
    }

    #[test]
    fn zero_output_hybrid_is_physics() {
        let cfg = PhysicsConfig::default().with_mode(PhysicsMode::FrozenOmega);
        let m = ResidualModel::new(ResidualBase::Physics { config: cfg }, &[8, 8], Normalizer::unit(), 1);
        let (y0, u) = sample_window();
        assert_eq!(m.predict(&y0, &u), physics_predict(&y0, &u, &cfg));
    }

    #[test]
    fn jet_physics_value_matches_plain_physics() {
        let cfg = PhysicsConfig::default();
        let (y0, u) = sample_window();
        let (v, _) = phys_with_jacobian(&y0.to_array(), &u[0], &cfg);
        assert_eq!(v, phys_step(&y0, &u[0], &cfg).to_array());
    }

    #[test]
    fn wrap_jacobian_matches_finite_differences() {
        let mut y = [0.0; LEARN_DIM];
        y[6..9].copy_from_slice(&[2.5, -1.9, 1.2]);
        let mut yw = y;
        let j = wrap_with_jacobian(&mut yw).expect("outside the ball");
        for c in 0..3 {
            let (mut a, mut b) = (y, y);
            a[6 + c] += 1e-6;
            b[6 + c] -= 1e-6;
            wrap_with_jacobian(&mut a);
            wrap_with_jacobian(&mut b);
            for r in 0..3 {
                assert!(((a[6 + r] - b[6 + r]) / 2e-6 - j[r][c]).abs() < 1e-7);
            }
        }
    }
}
