use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Mat3, Scalar, Vec3};

/// Below this vector-part norm the logarithm uses its first-order expansion.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Unit Hamilton quaternion, scalar-last `(qx, qy, qz, qw)`.
///
/// Represents the body-to-world rotation. Every constructor and every
/// arithmetic operation renormalizes, so `|‖q‖ − 1|` stays at rounding level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub w: T,
}

/// Axis scaled by angle, radians.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationVector<T = f64>(pub Vec3<T>);

/// Raw (not normalized) Hamilton product of scalar-last 4-tuples.
#[inline]
pub fn hamilton<T: Scalar>(a: [T; 4], b: [T; 4]) -> [T; 4] {
    let [ax, ay, az, aw] = a;
    let [bx, by, bz, bw] = b;
    [
        aw * bx + bw * ax + (ay * bz - az * by),
        aw * by + bw * ay + (az * bx - ax * bz),
        aw * bz + bw * az + (ax * by - ay * bx),
        aw * bw - (ax * bx + ay * by + az * bz),
    ]
}

impl<T: Scalar> UnitQuaternion<T> {
    pub fn identity() -> Self {
        Self { x: T::zero(), y: T::zero(), z: T::zero(), w: T::one() }
    }

    /// Normalizes the given components. The caller guarantees a nonzero norm.
    pub fn from_xyzw(x: T, y: T, z: T, w: T) -> Self {
        let n = (x * x + y * y + z * z + w * w).sqrt();
        Self { x: x / n, y: y / n, z: z / n, w: w / n }
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::from_xyzw(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn from_f64(q: UnitQuaternion<f64>) -> Self {
        Self { x: T::cst(q.x), y: T::cst(q.y), z: T::cst(q.z), w: T::cst(q.w) }
    }

    pub fn value(&self) -> UnitQuaternion<f64> {
        UnitQuaternion { x: self.x.value(), y: self.y.value(), z: self.z.value(), w: self.w.value() }
    }

    pub fn vector(&self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn conjugate(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z, w: self.w }
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Hamilton product `self ⊗ o`, renormalized.
    pub fn mul(&self, o: &Self) -> Self {
        Self::from_array(hamilton(self.to_array(), o.to_array()))
    }

    /// Representative with nonnegative scalar part.
    pub fn canonical(&self) -> Self {
        if self.w.value() < 0.0 {
            Self { x: -self.x, y: -self.y, z: -self.z, w: -self.w }
        } else {
            *self
        }
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w
    }

    /// `R(q) v`.
    pub fn rotate(&self, v: &Vec3<T>) -> Vec3<T> {
        let qv = self.vector();
        let two = T::cst(2.0);
        let t = qv.cross(v).scale(two);
        *v + t.scale(self.w) + qv.cross(&t)
    }

    /// `R(q)ᵀ v`.
    pub fn inverse_rotate(&self, v: &Vec3<T>) -> Vec3<T> {
        self.conjugate().rotate(v)
    }
}

impl UnitQuaternion<f64> {
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_xyzw(a.x * s, a.y * s, a.z * s, c)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn to_rotation_matrix(&self) -> Mat3 {
        let (x, y, z, w) = (self.x, self.y, self.z, self.w);
        Mat3([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    /// Shepperd's method; the input must be a proper rotation.
    pub fn from_rotation_matrix(m: &Mat3) -> Self {
        let r = &m.0;
        let tr = r[0][0] + r[1][1] + r[2][2];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Self::from_xyzw((r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s, 0.25 * s)
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
            Self::from_xyzw(0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s, (r[2][1] - r[1][2]) / s)
        } else if r[1][1] > r[2][2] {
            let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
            Self::from_xyzw((r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s, (r[0][2] - r[2][0]) / s)
        } else {
            let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
            Self::from_xyzw((r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s, (r[1][0] - r[0][1]) / s)
        }
    }
}

/// Logarithmic map onto the canonical rotation vector (`‖r‖ ≤ π`).
pub fn quat_to_rotvec<T: Scalar>(q: &UnitQuaternion<T>) -> RotationVector<T> {
    log_map(&q.canonical())
}

/// Logarithm of `q` as given, without flipping to `q_w ≥ 0`; the angle may
/// lie in `[0, 2π]`. Used where continuity along a sign-aligned sequence
/// matters more than the canonical range.
pub fn log_map<T: Scalar>(q: &UnitQuaternion<T>) -> RotationVector<T> {
    let v = q.vector();
    let n2 = v.norm_squared();
    if n2.value() < SMALL_ANGLE * SMALL_ANGLE {
        let two = T::cst(2.0);
        RotationVector(v.scale(two / q.w))
    } else {
        let n = n2.sqrt();
        let angle = T::cst(2.0) * n.atan2(q.w);
        RotationVector(v.scale(angle / n))
    }
}

/// Exponential map.
pub fn rotvec_to_quat<T: Scalar>(r: &RotationVector<T>) -> UnitQuaternion<T> {
    let v = r.0;
    let t2 = v.norm_squared();
    if t2.value() < SMALL_ANGLE * SMALL_ANGLE {
        // sin(θ/2)/θ ≈ 1/2 − θ²/48, cos(θ/2) ≈ 1 − θ²/8
        let s = T::cst(0.5) - t2 / T::cst(48.0);
        let c = T::one() - t2 / T::cst(8.0);
        UnitQuaternion::from_xyzw(v.x * s, v.y * s, v.z * s, c)
    } else {
        let t = t2.sqrt();
        let half = t * T::cst(0.5);
        let s = half.sin() / t;
        UnitQuaternion::from_xyzw(v.x * s, v.y * s, v.z * s, half.cos())
    }
}

/// Brings a rotation vector back to `‖r‖ ≤ π` via exp then log. Vectors
/// already inside the canonical ball are returned untouched.
pub fn wrap_rotvec<T: Scalar>(r: &RotationVector<T>) -> RotationVector<T> {
    if r.0.norm_squared().value() > PI * PI {
        quat_to_rotvec(&rotvec_to_quat(r))
    } else {
        *r
    }
}

/// Shortest-arc angle between two orientations, in `[0, π]`.
pub fn geodesic_error(q: &UnitQuaternion, qhat: &UnitQuaternion) -> f64 {
    let rel = q.inverse().mul(qhat).canonical();
    2.0 * rel.vector().norm().atan2(rel.w)
}

impl RotationVector<f64> {
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}
