use serde::{Deserialize, Serialize};

use super::{quat_to_rotvec, rotvec_to_quat, RotationVector, Scalar, UnitQuaternion, Vec3};

/// Quadrotor output `y = [p v q ω]`: world position and velocity, body-to-world
/// attitude, body-frame angular velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State<T = f64> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub q: UnitQuaternion<T>,
    pub w: Vec3<T>,
}

/// Learning representation `ỹ = [p v r ω]` with rotation-vector attitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnState<T = f64> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub r: RotationVector<T>,
    pub w: Vec3<T>,
}

pub const LEARN_DIM: usize = 12;

impl<T: Scalar> State<T> {
    pub fn pack(&self) -> LearnState<T> {
        LearnState { p: self.p, v: self.v, r: quat_to_rotvec(&self.q), w: self.w }
    }
}

impl<T: Scalar> LearnState<T> {
    pub fn unpack(&self) -> State<T> {
        State { p: self.p, v: self.v, q: rotvec_to_quat(&self.r), w: self.w }
    }

    pub fn to_array(&self) -> [T; LEARN_DIM] {
        let r = self.r.0;
        [
            self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z, r.x, r.y, r.z, self.w.x, self.w.y,
            self.w.z,
        ]
    }

    pub fn from_array(a: &[T; LEARN_DIM]) -> Self {
        Self {
            p: Vec3::new(a[0], a[1], a[2]),
            v: Vec3::new(a[3], a[4], a[5]),
            r: RotationVector(Vec3::new(a[6], a[7], a[8])),
            w: Vec3::new(a[9], a[10], a[11]),
        }
    }
}

impl State<f64> {
    /// At rest at `p`, level attitude.
    pub fn at_rest(p: Vec3) -> Self {
        Self { p, v: Vec3::ZERO, q: UnitQuaternion::identity(), w: Vec3::ZERO }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite() && self.q.is_finite() && self.w.is_finite()
    }
}

impl LearnState<f64> {
    pub fn zero() -> Self {
        Self::from_array(&[0.0; LEARN_DIM])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hover_packs_to_zero_rotation() {
        let s = State::at_rest(Vec3::new(0.0, 0.0, 1.0));
        let l = s.pack();
        assert_eq!(l.r.0, Vec3::ZERO);
        assert_eq!(l.p, s.p);
    }

    #[test]
    fn yaw_quarter_turn_packs_analytically() {
        let mut s = State::at_rest(Vec3::ZERO);
        s.q = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        let r = s.pack().r.0;
        assert!((r - Vec3::new(0.0, 0.0, FRAC_PI_2)).norm() < 1e-12);
    }

    #[test]
    fn learn_state_roundtrip() {
        let a = [0.1, -0.2, 1.3, 0.5, 0.0, -1.0, 0.3, -0.2, 1.1, 2.0, -3.0, 0.7];
        let l = LearnState::from_array(&a);
        assert_eq!(l.to_array(), a);
        let back = l.unpack().pack().to_array();
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
