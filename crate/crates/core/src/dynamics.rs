//! Continuous-time quadrotor dynamics, the quadratic rotor model, RK4
//! discretization and the physics baseline predictor.

use serde::{Deserialize, Serialize};

use crate::math::{hamilton, LearnState, Scalar, State, UnitQuaternion, Vec3};

/// Mass [kg], diagonal inertia [kg·m²], gravity magnitude [m/s²].
///
/// `linear_drag` [1/s] adds `−c·v` to the translational dynamics. It is zero
/// for the nominal model and only used to generate perturbed synthetic data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigidBodyParams {
    pub mass: f64,
    pub inertia: Vec3,
    pub gravity: f64,
    pub linear_drag: f64,
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        Self {
            mass: 0.045,
            inertia: Vec3::new(2.3951e-5, 2.3951e-5, 3.2347e-5),
            gravity: 9.81,
            linear_drag: 0.0,
        }
    }
}

impl RigidBodyParams {
    pub fn gravity_vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity)
    }
}

/// Thrust coefficient [N·s²/rad²], moment coefficient [N·m·s²/rad²] and
/// effective arm length [m].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotorParams {
    pub kf: f64,
    pub km: f64,
    pub arm_length: f64,
}

impl Default for RotorParams {
    /// `arm_length` is a configuration value (46 mm motor radius projected
    /// on the body axes of an "×" frame), not an identified quantity.
    fn default() -> Self {
        Self { kf: 3.72e-8, km: 7.73e-11, arm_length: 0.0325 }
    }
}

/// Propeller angular speeds `Ω1..Ω4` [rad/s].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorSpeeds(pub [f64; 4]);

impl MotorSpeeds {
    pub fn splat(w: f64) -> Self {
        Self([w; 4])
    }

    pub fn squared(&self) -> [f64; 4] {
        self.0.map(|w| w * w)
    }

    /// `ΣΩᵢ²`, the total-thrust regressor.
    pub fn sum_squared(&self) -> f64 {
        self.squared().iter().sum()
    }

    /// `−Ω1² + Ω2² − Ω3² + Ω4²`, the yaw-torque regressor.
    pub fn yaw_regressor(&self) -> f64 {
        let s = self.squared();
        -s[0] + s[1] - s[2] + s[3]
    }
}

/// Total thrust [N] along body z and body-frame torque [N·m].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyWrench {
    pub thrust: f64,
    pub torque: Vec3,
}

/// Rows of the "×" mixer sign pattern: thrust, roll, pitch, yaw.
const MIXER_SIGNS: [[f64; 4]; 4] =
    [[1.0, 1.0, 1.0, 1.0], [-1.0, -1.0, 1.0, 1.0], [-1.0, 1.0, 1.0, -1.0], [-1.0, 1.0, -1.0, 1.0]];

pub fn rotor_wrench(u: &MotorSpeeds, rp: &RotorParams) -> BodyWrench {
    let s = u.squared();
    let row = |r: usize| -> f64 { MIXER_SIGNS[r].iter().zip(s.iter()).map(|(a, b)| a * b).sum() };
    let kfl = rp.kf * rp.arm_length;
    BodyWrench { thrust: rp.kf * row(0), torque: Vec3::new(kfl * row(1), kfl * row(2), rp.km * row(3)) }
}

/// Hover speed `√(m g / 4 k_F)`.
pub fn hover_speed(bp: &RigidBodyParams, rp: &RotorParams) -> f64 {
    (bp.mass * bp.gravity / (4.0 * rp.kf)).sqrt()
}

/// Solves the mixer for squared speeds. The sign matrix has orthogonal
/// rows of squared norm 4, so its inverse is its transpose over 4.
/// Negative squared speeds are clamped to zero; the flag reports it.
pub fn mixer_inverse(w: &BodyWrench, rp: &RotorParams) -> (MotorSpeeds, bool) {
    let kfl = rp.kf * rp.arm_length;
    let a = [w.thrust / rp.kf, w.torque.x / kfl, w.torque.y / kfl, w.torque.z / rp.km];
    let mut out = [0.0; 4];
    let mut saturated = false;
    for (i, o) in out.iter_mut().enumerate() {
        let s: f64 = 0.25 * (0..4).map(|r| MIXER_SIGNS[r][i] * a[r]).sum::<f64>();
        if s < 0.0 {
            saturated = true;
            *o = 0.0;
        } else {
            *o = s.sqrt();
        }
    }
    (MotorSpeeds(out), saturated)
}

/// Time derivative of [`State`]; `q_dot` is the raw (non-unit) quaternion rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub q_dot: [f64; 4],
    pub w_dot: Vec3,
}

/// How the rotational dynamics are propagated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicsMode {
    /// Full rigid-body model with rotor torques.
    Full,
    /// Angular acceleration held at zero; attitude integrates the initial rate.
    #[default]
    FrozenOmega,
}

type Flat<T> = [T; 13];

fn flatten<T: Scalar>(x: &State<T>) -> Flat<T> {
    [x.p.x, x.p.y, x.p.z, x.v.x, x.v.y, x.v.z, x.q.x, x.q.y, x.q.z, x.q.w, x.w.x, x.w.y, x.w.z]
}

fn unflatten<T: Scalar>(f: &Flat<T>) -> State<T> {
    State {
        p: Vec3::new(f[0], f[1], f[2]),
        v: Vec3::new(f[3], f[4], f[5]),
        q: UnitQuaternion::from_xyzw(f[6], f[7], f[8], f[9]),
        w: Vec3::new(f[10], f[11], f[12]),
    }
}

/// Vector field on the flat 13-vector. `q` is used as given (stage values of
/// RK4 are slightly off the unit sphere; the field is smooth there).
fn vector_field<T: Scalar>(
    f: &Flat<T>,
    wrench: &BodyWrench,
    bp: &RigidBodyParams,
    mode: PhysicsMode,
) -> Flat<T> {
    let v = Vec3::new(f[3], f[4], f[5]);
    let q = UnitQuaternion { x: f[6], y: f[7], z: f[8], w: f[9] };
    let w = Vec3::new(f[10], f[11], f[12]);

    let thrust_acc = T::cst(wrench.thrust / bp.mass);
    let mut v_dot = q.rotate(&Vec3::new(T::zero(), T::zero(), thrust_acc)) + Vec3::from_f64(bp.gravity_vector());
    if bp.linear_drag != 0.0 {
        v_dot -= v.scale(T::cst(bp.linear_drag));
    }

    let half = T::cst(0.5);
    let qd = hamilton(q.to_array(), [w.x, w.y, w.z, T::zero()]).map(|c| c * half);

    let w_dot = match mode {
        PhysicsMode::FrozenOmega => Vec3::zero(),
        PhysicsMode::Full => {
            let j = Vec3::<T>::from_f64(bp.inertia);
            let jw = w.component_mul(&j);
            let net = Vec3::from_f64(wrench.torque) - w.cross(&jw);
            Vec3::new(net.x / j.x, net.y / j.y, net.z / j.z)
        }
    };

    [v.x, v.y, v.z, v_dot.x, v_dot.y, v_dot.z, qd[0], qd[1], qd[2], qd[3], w_dot.x, w_dot.y, w_dot.z]
}

pub fn continuous_dynamics(
    x: &State,
    u: &MotorSpeeds,
    bp: &RigidBodyParams,
    rp: &RotorParams,
) -> StateDerivative {
    let d = vector_field(&flatten(x), &rotor_wrench(u, rp), bp, PhysicsMode::Full);
    StateDerivative {
        p_dot: Vec3::new(d[0], d[1], d[2]),
        v_dot: Vec3::new(d[3], d[4], d[5]),
        q_dot: [d[6], d[7], d[8], d[9]],
        w_dot: Vec3::new(d[10], d[11], d[12]),
    }
}

#[inline]
fn axpy<T: Scalar>(x: &Flat<T>, a: T, k: &Flat<T>) -> Flat<T> {
    let mut out = *x;
    for (o, ki) in out.iter_mut().zip(k.iter()) {
        *o = *o + a * *ki;
    }
    out
}

fn rk4_flat<T: Scalar>(
    x: &Flat<T>,
    wrench_at: impl Fn(f64) -> BodyWrench,
    t: f64,
    dt: f64,
    bp: &RigidBodyParams,
    mode: PhysicsMode,
) -> Flat<T> {
    let h = T::cst(dt);
    let h2 = T::cst(0.5 * dt);
    let mid = wrench_at(t + 0.5 * dt);
    let k1 = vector_field(x, &wrench_at(t), bp, mode);
    let k2 = vector_field(&axpy(x, h2, &k1), &mid, bp, mode);
    let k3 = vector_field(&axpy(x, h2, &k2), &mid, bp, mode);
    let k4 = vector_field(&axpy(x, h, &k3), &wrench_at(t + dt), bp, mode);
    let sixth = T::cst(dt / 6.0);
    let two = T::cst(2.0);
    let mut out = *x;
    for i in 0..13 {
        out[i] = out[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
    }
    // renormalize the attitude
    let n = (out[6] * out[6] + out[7] * out[7] + out[8] * out[8] + out[9] * out[9]).sqrt();
    for c in &mut out[6..10] {
        *c = *c / n;
    }
    out
}

/// One classical RK4 step with the input held over the interval.
pub fn rk4_step(x: &State, u: &MotorSpeeds, dt: f64, bp: &RigidBodyParams, rp: &RotorParams) -> State {
    let w = rotor_wrench(u, rp);
    unflatten(&rk4_flat(&flatten(x), |_| w, 0.0, dt, bp, PhysicsMode::Full))
}

/// RK4 step with a time-varying input `u(t)` sampled at the stage times.
pub fn rk4_step_with(
    x: &State,
    t: f64,
    dt: f64,
    u: impl Fn(f64) -> MotorSpeeds,
    bp: &RigidBodyParams,
    rp: &RotorParams,
) -> State {
    unflatten(&rk4_flat(&flatten(x), |s| rotor_wrench(&u(s), rp), t, dt, bp, PhysicsMode::Full))
}

/// Everything the discrete physics transition needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub body: RigidBodyParams,
    pub rotor: RotorParams,
    pub mode: PhysicsMode,
    /// Sample interval [s].
    pub dt: f64,
    /// RK4 steps per sample.
    pub substeps: usize,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            body: RigidBodyParams::default(),
            rotor: RotorParams::default(),
            mode: PhysicsMode::FrozenOmega,
            dt: 0.01,
            substeps: 1,
        }
    }
}

impl PhysicsConfig {
    pub fn with_mode(mut self, mode: PhysicsMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Discrete transition `f_phys` on the learning representation, including
/// the exp/log conversions at its boundary.
pub fn phys_step<T: Scalar>(y: &LearnState<T>, u: &MotorSpeeds, cfg: &PhysicsConfig) -> LearnState<T> {
    let wrench = rotor_wrench(u, &cfg.rotor);
    let h = cfg.dt / cfg.substeps as f64;
    let mut x = flatten(&y.unpack());
    for _ in 0..cfg.substeps {
        x = rk4_flat(&x, |_| wrench, 0.0, h, &cfg.body, cfg.mode);
    }
    unflatten(&x).pack()
}

/// Open-loop rollout `ŷ_{t+h|t}`, `h = 1..H` with `H = u_seq.len()`.
pub fn physics_predict(y0: &LearnState, u_seq: &[MotorSpeeds], cfg: &PhysicsConfig) -> Vec<LearnState> {
    let mut y = *y0;
    u_seq
        .iter()
        .map(|u| {
            y = phys_step(&y, u, cfg);
            y
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{geodesic_error, Jet, RotationVector};
    use std::f64::consts::PI;

    fn params() -> (RigidBodyParams, RotorParams) {
        (RigidBodyParams::default(), RotorParams::default())
    }

    #[test]
    fn wrench_examples() {
        let (bp, rp) = params();
        let w = rotor_wrench(&MotorSpeeds::default(), &rp);
        assert_eq!(w, BodyWrench::default());

        let oh = hover_speed(&bp, &rp);
        assert!((oh - 1722.4).abs() < 0.05, "{oh}");
        let w = rotor_wrench(&MotorSpeeds::splat(oh), &rp);
        assert!((w.thrust - bp.mass * bp.gravity).abs() < 1e-12);
        assert_eq!(w.torque, Vec3::ZERO);

        let w = rotor_wrench(&MotorSpeeds([0.0, 1000.0, 0.0, 1000.0]), &rp);
        assert!((w.torque.z - 2.0 * rp.km * 1e6).abs() < 1e-18);
        assert_eq!(w.torque.x, 0.0);
    }

    #[test]
    fn mixer_examples() {
        let (bp, rp) = params();
        let (u, sat) = mixer_inverse(&BodyWrench { thrust: bp.mass * bp.gravity, torque: Vec3::ZERO }, &rp);
        assert!(!sat);
        let oh = hover_speed(&bp, &rp);
        for w in u.0 {
            assert!((w - oh).abs() < 1e-9);
        }
        let (u, sat) = mixer_inverse(&BodyWrench::default(), &rp);
        assert_eq!(u.0, [0.0; 4]);
        assert!(!sat);

        let (u, sat) = mixer_inverse(&BodyWrench { thrust: 0.0, torque: Vec3::new(1e-3, 0.0, 0.0) }, &rp);
        assert!(sat);
        assert!(u.0.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn free_fall_and_hover_derivatives() {
        let (bp, rp) = params();
        let rest = State::at_rest(Vec3::ZERO);
        let d = continuous_dynamics(&rest, &MotorSpeeds::default(), &bp, &rp);
        assert_eq!(d.v_dot, Vec3::new(0.0, 0.0, -9.81));
        assert_eq!(d.p_dot, Vec3::ZERO);
        assert_eq!(d.w_dot, Vec3::ZERO);

        let d = continuous_dynamics(&rest, &MotorSpeeds::splat(hover_speed(&bp, &rp)), &bp, &rp);
        assert!(d.v_dot.norm() < 1e-12);
        assert_eq!(d.w_dot, Vec3::ZERO);

        let mut spin = rest;
        spin.w = Vec3::new(1.0, 0.0, 0.0);
        let d = continuous_dynamics(&spin, &MotorSpeeds::default(), &bp, &rp);
        assert_eq!(d.q_dot, [0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rk4_free_fall_is_exact() {
        let (bp, rp) = params();
        let x = rk4_step(&State::at_rest(Vec3::ZERO), &MotorSpeeds::default(), 0.01, &bp, &rp);
        assert!((x.v.z + 0.0981).abs() < 1e-15);
        assert!((x.p.z + 4.905e-4).abs() < 1e-15);
    }

    #[test]
    fn rk4_hover_is_equilibrium() {
        let (bp, rp) = params();
        let x0 = State::at_rest(Vec3::new(0.3, -0.2, 1.0));
        let u = MotorSpeeds::splat(hover_speed(&bp, &rp));
        let mut x = x0;
        for _ in 0..100 {
            x = rk4_step(&x, &u, 0.01, &bp, &rp);
        }
        assert!((x.p - x0.p).norm() < 1e-12);
        assert!(x.v.norm() < 1e-12);
    }

    #[test]
    fn yaw_spin_returns_after_one_turn() {
        let (bp, rp) = params();
        let mut x = State::at_rest(Vec3::ZERO);
        x.w = Vec3::new(0.0, 0.0, 2.0 * PI);
        let u = MotorSpeeds::splat(hover_speed(&bp, &rp));
        for _ in 0..100 {
            x = rk4_step(&x, &u, 0.01, &bp, &rp);
        }
        // (ω dt)^4 / 120 per step, 100 steps
        let err = geodesic_error(&x.q, &UnitQuaternion::identity());
        assert!(err < 1e-7, "{err}");
        assert!((x.q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn physics_predict_hover_stays_put() {
        let cfg = PhysicsConfig::default();
        let y0 = State::at_rest(Vec3::new(0.0, 0.0, 1.5)).pack();
        let u = vec![MotorSpeeds::splat(hover_speed(&cfg.body, &cfg.rotor)); 50];
        for mode in [PhysicsMode::Full, PhysicsMode::FrozenOmega] {
            let out = physics_predict(&y0, &u, &cfg.with_mode(mode));
            assert_eq!(out.len(), 50);
            for y in &out {
                for (a, b) in y.to_array().iter().zip(y0.to_array().iter()) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn frozen_mode_keeps_rate() {
        let cfg = PhysicsConfig::default();
        let mut x = State::at_rest(Vec3::ZERO);
        x.w = Vec3::new(0.5, -0.3, 0.2);
        // torque-producing input must not change ω in frozen mode
        let u = vec![MotorSpeeds([1500.0, 1800.0, 1700.0, 1600.0]); 20];
        let out = physics_predict(&x.pack(), &u, &cfg);
        for y in out {
            assert_eq!(y.w, x.w);
        }
    }

    #[test]
    fn jet_jacobian_matches_finite_differences() {
        let cfg = PhysicsConfig::default().with_mode(PhysicsMode::Full);
        let y = LearnState {
            p: Vec3::new(0.1, 0.2, 1.0),
            v: Vec3::new(0.5, -0.3, 0.1),
            r: RotationVector(Vec3::new(0.2, -0.1, 0.3)),
            w: Vec3::new(1.0, -2.0, 0.5),
        };
        let u = MotorSpeeds([1600.0, 1750.0, 1700.0, 1680.0]);
        let a = y.to_array();
        let seeds: [Jet<12>; 12] = std::array::from_fn(|i| Jet::variable(a[i], i));
        let out = phys_step(&LearnState::from_array(&seeds), &u, &cfg).to_array();
        let eps = 1e-6;
        for j in 0..12 {
            let mut ap = a;
            let mut am = a;
            ap[j] += eps;
            am[j] -= eps;
            let fp = phys_step(&LearnState::from_array(&ap), &u, &cfg).to_array();
            let fm = phys_step(&LearnState::from_array(&am), &u, &cfg).to_array();
            for i in 0..12 {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                assert!((out[i].d[j] - fd).abs() < 1e-7, "d{i}/d{j}: {} vs {fd}", out[i].d[j]);
            }
        }
    }
}
