//! Quaternion/SO(3) geometry, state representations and the attitude error
//! metric.

mod quat;
mod scalar;
mod state;
mod vec3;

pub use quat::{
    geodesic_error, hamilton, log_map, quat_to_rotvec, rotvec_to_quat, wrap_rotvec, RotationVector,
    UnitQuaternion, SMALL_ANGLE,
};
pub use scalar::{Counted, Jet, Scalar};
pub use state::{LearnState, State, LEARN_DIM};
pub use vec3::{Mat3, Vec3};
