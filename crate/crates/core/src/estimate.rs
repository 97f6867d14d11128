use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FlightLog;
use crate::dynamics::{MotorSpeeds, RigidBodyParams};
use crate::math::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("need at least {min} samples, got {len}")]
    TooFewSamples { len: usize, min: usize },
    #[error("length mismatch: {0} targets vs {1} motor samples")]
    LengthMismatch(usize, usize),
    #[error("regressor is identically zero, `{0}` is not identifiable")]
    Unidentifiable(&'static str),
    #[error("non-finite sample at row {0}")]
    NonFinite(usize),
}

/// Minimum sample count for the thrust fit.
pub const MIN_FIT_SAMPLES: usize = 100;

/// `τ̃ = J ω̇ + ω × (J ω)` with `ω̇` from second-order central differences and
/// second-order one-sided differences at both ends.
pub fn reconstruct_torque(w: &[Vec3], inertia: &Vec3, dt: f64) -> Result<Vec<Vec3>, EstimateError> {
    let n = w.len();
    if n < 3 {
        return Err(EstimateError::TooFewSamples { len: n, min: 3 });
    }
    let inv = 1.0 / (2.0 * dt);
    Ok((0..n)
        .map(|i| {
            let w_dot = if i == 0 {
                (w[1] * 4.0 - w[0] * 3.0 - w[2]) * inv
            } else if i == n - 1 {
                (w[n - 1] * 3.0 - w[n - 2] * 4.0 + w[n - 3]) * inv
            } else {
                (w[i + 1] - w[i - 1]) * inv
            };
            let jw = inertia.component_mul(&w[i]);
            inertia.component_mul(&w_dot) + w[i].cross(&jw)
        })
        .collect())
}

/// Ratio estimate `θ = Σ yᵢxᵢ / Σ xᵢ²` plus the residual RMS.
fn scalar_ls(y: &[f64], x: &[f64], name: &'static str) -> Result<(f64, f64), EstimateError> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, (a, b)) in y.iter().zip(x).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(EstimateError::NonFinite(i));
        }
        sxy += a * b;
        sxx += b * b;
    }
    if sxx == 0.0 {
        return Err(EstimateError::Unidentifiable(name));
    }
    let theta = sxy / sxx;
    let rss: f64 = y.iter().zip(x).map(|(a, b)| (a - theta * b).powi(2)).sum();
    Ok((theta, (rss / y.len() as f64).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub value: f64,
    /// RMS of the fit residual, in the units of the target.
    pub residual_rms: f64,
    pub samples: usize,
}

/// Thrust coefficient from `m·a_z = k_F Σ Ωᵢ²`.
pub fn fit_kf(az: &[f64], motors: &[MotorSpeeds], mass: f64) -> Result<Fit, EstimateError> {
    if az.len() != motors.len() {
        return Err(EstimateError::LengthMismatch(az.len(), motors.len()));
    }
    if az.len() < MIN_FIT_SAMPLES {
        return Err(EstimateError::TooFewSamples { len: az.len(), min: MIN_FIT_SAMPLES });
    }
    let y: Vec<f64> = az.iter().map(|a| mass * a).collect();
    let x: Vec<f64> = motors.iter().map(MotorSpeeds::sum_squared).collect();
    let (value, residual_rms) = scalar_ls(&y, &x, "kF")?;
    Ok(Fit { value, residual_rms, samples: y.len() })
}

/// Moment coefficient from `τ̃_z = k_M (−Ω₁² + Ω₂² − Ω₃² + Ω₄²)`.
pub fn fit_km(tau_z: &[f64], motors: &[MotorSpeeds]) -> Result<Fit, EstimateError> {
    if tau_z.len() != motors.len() {
        return Err(EstimateError::LengthMismatch(tau_z.len(), motors.len()));
    }
    if tau_z.is_empty() {
        return Err(EstimateError::TooFewSamples { len: 0, min: 1 });
    }
    let x: Vec<f64> = motors.iter().map(MotorSpeeds::yaw_regressor).collect();
    let (value, residual_rms) = scalar_ls(tau_z, &x, "kM")?;
    Ok(Fit { value, residual_rms, samples: x.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub kf: Fit,
    pub km: Fit,
    pub logs: Vec<String>,
}

impl EstimationReport {
    pub fn to_table(&self) -> String {
        format!(
            "| coefficient | value | residual RMS | samples |\n|---|---|---|---|\n| kF [N s^2/rad^2] | {:.4e} | {:.4e} N | {} |\n| kM [N m s^2/rad^2] | {:.4e} | {:.4e} N m | {} |\n",
            self.kf.value, self.kf.residual_rms, self.kf.samples, self.km.value, self.km.residual_rms, self.km.samples
        )
    }
}

/// Pools every log and fits both coefficients. Torque is reconstructed per
/// log so finite differences never straddle two flights.
pub fn estimate_coefficients(
    logs: &[(&str, &FlightLog)],
    bp: &RigidBodyParams,
) -> Result<EstimationReport, EstimateError> {
    let (mut az, mut tz, mut motors) = (Vec::new(), Vec::new(), Vec::new());
    for (_, log) in logs {
        let dt = log.dt().ok_or(EstimateError::TooFewSamples { len: log.len(), min: 3 })?;
        let w: Vec<Vec3> = (0..log.len()).map(|i| log.rates(i)).collect();
        let tau = reconstruct_torque(&w, &bp.inertia, dt)?;
        az.extend_from_slice(log.core("az_body"));
        tz.extend(tau.iter().map(|t| t.z));
        motors.extend(log.all_motors());
    }
    Ok(EstimationReport {
        kf: fit_kf(&az, &motors, bp.mass)?,
        km: fit_km(&tz, &motors)?,
        logs: logs.iter().map(|(n, _)| n.to_string()).collect(),
    })
}
