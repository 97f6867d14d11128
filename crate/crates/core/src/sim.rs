//! Closed-loop synthetic flights: reference generator, geometric controller,
//! mixer and RK4 plant, logged in the flight-log schema.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{geometric_control, ControllerGains, ControllerState};
use crate::data::{FlightLog, CORE_COLUMNS};
use crate::dynamics::{continuous_dynamics, mixer_inverse, rk4_step, RigidBodyParams, RotorParams};
use crate::math::{rotvec_to_quat, RotationVector, State, Vec3};
use crate::trajectory::{generate, TrajectorySpec};

/// Standard deviations of additive Gaussian noise on the logged channels.
/// Attitude noise is a random small rotation applied on the right.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub rates: f64,
    pub accel: f64,
    pub motors: f64,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub gains: ControllerGains,
    pub body: RigidBodyParams,
    pub rotor: RotorParams,
    pub noise: NoiseSpec,
    pub noise_seed: u64,
    /// RK4 steps per sample interval.
    pub substeps: usize,
    /// Position norm that counts as divergence [m].
    pub divergence_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gains: ControllerGains::default(),
            body: RigidBodyParams::default(),
            rotor: RotorParams::default(),
            noise: NoiseSpec::default(),
            noise_seed: 0,
            substeps: 1,
            divergence_radius: 100.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("closed loop diverged at step {step} (t = {t:.2} s): |p| = {position_norm:.3e} m")]
    Diverged { step: usize, t: f64, position_norm: f64 },
    #[error("invalid simulation setup: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub samples: usize,
    pub saturated_steps: usize,
    pub degenerate_steps: usize,
    /// Mean and max of the noise-free position tracking error [m].
    pub mean_tracking_error: f64,
    pub max_tracking_error: f64,
}

pub struct SimOutput {
    pub log: FlightLog,
    /// Noise-free states, one per row.
    pub states: Vec<State>,
    pub report: SimReport,
}

/// Flies `spec` in closed loop. Row `k` holds the state at `t_k` and the
/// motor speeds held constant over `[t_k, t_{k+1})`.
pub fn simulate_flight(spec: &TrajectorySpec, cfg: &SimConfig) -> Result<SimOutput, SimError> {
    if cfg.substeps == 0 {
        return Err(SimError::Invalid("substeps must be positive".into()));
    }
    if !(spec.sample_rate > 0.0) {
        return Err(SimError::Invalid(format!("sample rate {} Hz", spec.sample_rate)));
    }
    let reference = generate(spec);
    let dt = 1.0 / spec.sample_rate;
    let h = dt / cfg.substeps as f64;
    let n = reference.len();
    let (bp, rp) = (&cfg.body, &cfg.rotor);

    let mut x = State { v: reference[0].v, ..State::at_rest(reference[0].p) };
    let mut ctrl = ControllerState::default();
    let mut rows: Vec<[f64; 21]> = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut refs = Vec::with_capacity(n);
    let (mut saturated, mut degenerate) = (0, 0);
    let (mut err_sum, mut err_max) = (0.0, 0.0f64);

    for (k, r) in reference.iter().enumerate() {
        let pn = x.p.norm();
        if !x.is_finite() || pn > cfg.divergence_radius {
            return Err(SimError::Diverged { step: k, t: r.t, position_norm: pn });
        }
        let wrench = geometric_control(&x, r, &cfg.gains, bp, &mut ctrl, dt);
        degenerate += ctrl.degenerate as usize;
        let (u, sat) = mixer_inverse(&wrench, rp);
        saturated += sat as usize;

        let v_dot = continuous_dynamics(&x, &u, bp, rp).v_dot;
        let a_imu = x.q.inverse_rotate(&(v_dot - bp.gravity_vector()));
        let e = (r.p - x.p).norm();
        err_sum += e;
        err_max = err_max.max(e);

        let mut row = [0.0; 21];
        row[0] = r.t;
        row[1..5].copy_from_slice(&u.0);
        row[5..8].copy_from_slice(&x.p.to_array());
        row[8..11].copy_from_slice(&x.v.to_array());
        row[11..15].copy_from_slice(&x.q.to_array());
        row[15..18].copy_from_slice(&x.w.to_array());
        row[18..21].copy_from_slice(&a_imu.to_array());
        rows.push(row);
        states.push(x);
        refs.push(r.p);

        if k + 1 < n {
            for _ in 0..cfg.substeps {
                x = rk4_step(&x, &u, h, bp, rp);
            }
        }
    }

    if !cfg.noise.is_zero() {
        add_noise(&mut rows, &cfg.noise, cfg.noise_seed);
    }

    let mut cols: IndexMap<String, Vec<f64>> = IndexMap::new();
    for (j, c) in CORE_COLUMNS.iter().enumerate() {
        cols.insert(c.to_string(), rows.iter().map(|r| r[j]).collect());
    }
    for (j, c) in ["x_ref", "y_ref", "z_ref"].iter().enumerate() {
        cols.insert(c.to_string(), refs.iter().map(|p: &Vec3| p.to_array()[j]).collect());
    }
    let log = FlightLog::from_columns(cols).map_err(|e| SimError::Invalid(e.to_string()))?;
    let report = SimReport {
        samples: n,
        saturated_steps: saturated,
        degenerate_steps: degenerate,
        mean_tracking_error: err_sum / n.max(1) as f64,
        max_tracking_error: err_max,
    };
    Ok(SimOutput { log, states, report })
}

fn add_noise(rows: &mut [[f64; 21]], noise: &NoiseSpec, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let draw = |rng: &mut ChaCha8Rng, s: f64| if s > 0.0 { s * std_normal.sample(rng) } else { 0.0 };
    for row in rows.iter_mut() {
        for (range, s) in [(1..5, noise.motors), (5..8, noise.position), (8..11, noise.velocity), (15..18, noise.rates), (18..21, noise.accel)] {
            for v in &mut row[range] {
                *v += draw(&mut rng, s);
            }
        }
        if noise.attitude > 0.0 {
            let d = Vec3::new(draw(&mut rng, noise.attitude), draw(&mut rng, noise.attitude), draw(&mut rng, noise.attitude));
            let q = crate::math::UnitQuaternion::from_array([row[11], row[12], row[13], row[14]]);
            let noisy = q.mul(&rotvec_to_quat(&RotationVector(d)));
            row[11..15].copy_from_slice(&noisy.to_array());
        }
    }
}
