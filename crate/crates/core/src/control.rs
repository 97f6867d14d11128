//! Geometric SE(3) tracking controller with integral action on position
//! and attitude.

use serde::{Deserialize, Serialize};

use crate::dynamics::{BodyWrench, RigidBodyParams};
use crate::math::{Mat3, State, Vec3};
use crate::trajectory::ReferencePoint;

/// Diagonal gain matrices, stored as their diagonals.
///
/// Defaults were tuned once against the noise-free simulator at 100 Hz:
/// translational loop near 4 rad/s, roll/pitch near 30 rad/s, yaw near
/// 10 rad/s, all around 0.8 damping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub kp: Vec3,
    pub ki: Vec3,
    pub kd: Vec3,
    pub kr: Vec3,
    pub kri: Vec3,
    pub kw: Vec3,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp: Vec3::new(0.72, 0.72, 0.72),
            ki: Vec3::new(0.05, 0.05, 0.05),
            kd: Vec3::new(0.29, 0.29, 0.29),
            kr: Vec3::new(2.16e-2, 2.16e-2, 3.2e-3),
            kri: Vec3::new(1e-4, 1e-4, 1e-5),
            kw: Vec3::new(1.15e-3, 1.15e-3, 5.2e-4),
        }
    }
}

/// Integrator states and the last valid desired attitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerState {
    pub int_pos: Vec3,
    pub int_att: Vec3,
    pub last_desired: Mat3,
    /// Set when the last call could not build a desired attitude.
    pub degenerate: bool,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self { int_pos: Vec3::ZERO, int_att: Vec3::ZERO, last_desired: Mat3::IDENTITY, degenerate: false }
    }
}

/// Desired body axes with `z` along `force` and heading `psi`; `None` when
/// the force vanishes or is parallel to the heading direction.
pub fn desired_attitude(force: &Vec3, psi: f64) -> Option<Mat3> {
    let n = force.norm();
    if n < 1e-9 {
        return None;
    }
    let z = *force * (1.0 / n);
    let heading = Vec3::new(psi.cos(), psi.sin(), 0.0);
    let y = z.cross(&heading);
    let yn = y.norm();
    if yn < 1e-9 {
        return None;
    }
    let y = y * (1.0 / yn);
    let x = y.cross(&z);
    Some(Mat3::from_columns(x, y, z))
}

/// `e_R = ½ (R_dᵀ R − Rᵀ R_d)ᵛ`.
pub fn attitude_error(r: &Mat3, rd: &Mat3) -> Vec3 {
    let a = rd.transpose().mul_mat(r);
    let b = r.transpose().mul_mat(rd);
    a.sub(&b).vee() * 0.5
}

/// One controller update. Integrators advance by `dt · error` before use.
pub fn geometric_control(
    x: &State,
    reference: &ReferencePoint,
    gains: &ControllerGains,
    bp: &RigidBodyParams,
    ctrl: &mut ControllerState,
    dt: f64,
) -> BodyWrench {
    let e_p = reference.p - x.p;
    let e_v = reference.v - x.v;
    ctrl.int_pos += e_p * dt;

    let force = gains.kp.component_mul(&e_p)
        + gains.ki.component_mul(&ctrl.int_pos)
        + gains.kd.component_mul(&e_v)
        + (reference.a - bp.gravity_vector()) * bp.mass;

    let r = x.q.to_rotation_matrix();
    let thrust = force.dot(&r.column(2));

    let rd = match desired_attitude(&force, reference.psi) {
        Some(rd) => {
            ctrl.degenerate = false;
            ctrl.last_desired = rd;
            rd
        }
        None => {
            ctrl.degenerate = true;
            ctrl.last_desired
        }
    };

    let e_r = attitude_error(&r, &rd);
    // desired body rate is zero
    let e_w = x.w;
    ctrl.int_att += e_r * dt;
    let torque =
        -(gains.kr.component_mul(&e_r) + gains.kri.component_mul(&ctrl.int_att) + gains.kw.component_mul(&e_w));

    BodyWrench { thrust, torque }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::UnitQuaternion;

    fn hover_ref(p: Vec3) -> ReferencePoint {
        ReferencePoint { t: 0.0, p, v: Vec3::ZERO, a: Vec3::ZERO, psi: 0.0 }
    }

    #[test]
    fn equilibrium_gives_weight_and_no_torque() {
        let bp = RigidBodyParams::default();
        let x = State::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let mut ctrl = ControllerState::default();
        let w = geometric_control(&x, &hover_ref(x.p), &ControllerGains::default(), &bp, &mut ctrl, 0.01);
        assert!((w.thrust - bp.mass * bp.gravity).abs() < 1e-15);
        assert_eq!(w.torque, Vec3::ZERO);
        assert!(!ctrl.degenerate);
    }

    #[test]
    fn attitude_error_vanishes_on_target() {
        let q = UnitQuaternion::from_xyzw(0.1, 0.2, -0.3, 0.9);
        let r = q.to_rotation_matrix();
        assert!(attitude_error(&r, &r).norm() < 1e-15);
    }

    #[test]
    fn forward_error_tilts_thrust_forward() {
        // Pure +x position error with Kp = k I: the force gains a +x component
        // k e, the desired z axis leans toward +x, which is a positive rotation
        // about body y, so the commanded y torque is positive in the frame of
        // the dynamics model.
        let bp = RigidBodyParams::default();
        let k = 0.5;
        let gains = ControllerGains {
            kp: Vec3::new(k, k, k),
            ki: Vec3::ZERO,
            kd: Vec3::ZERO,
            kri: Vec3::ZERO,
            ..Default::default()
        };
        let x = State::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let r = hover_ref(Vec3::new(0.2, 0.0, 1.0));
        let mut ctrl = ControllerState::default();
        let w = geometric_control(&x, &r, &gains, &bp, &mut ctrl, 0.01);
        let force = Vec3::new(k * 0.2, 0.0, bp.mass * bp.gravity);
        let rd = desired_attitude(&force, 0.0).unwrap();
        assert!((rd.column(2).x - force.x / force.norm()).abs() < 1e-15);
        assert!(w.torque.y > 0.0);
        assert!(w.torque.x.abs() < 1e-15 && w.torque.z.abs() < 1e-15);
    }

    #[test]
    fn vanishing_force_holds_previous_attitude() {
        let bp = RigidBodyParams::default();
        let x = State::at_rest(Vec3::ZERO);
        // free-fall reference acceleration cancels gravity compensation
        let r = ReferencePoint { t: 0.0, p: x.p, v: Vec3::ZERO, a: bp.gravity_vector(), psi: 0.0 };
        let mut ctrl = ControllerState::default();
        let w = geometric_control(&x, &r, &ControllerGains::default(), &bp, &mut ctrl, 0.01);
        assert!(ctrl.degenerate);
        assert_eq!(w.thrust, 0.0);
        assert_eq!(ctrl.last_desired, Mat3::IDENTITY);
    }
}
