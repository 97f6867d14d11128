use serde::{Deserialize, Serialize};

use super::DataError;
use crate::math::{log_map, rotvec_to_quat, UnitQuaternion};

/// One biquad (or first-order) section in transposed direct form II.
/// `a[0]` is normalised to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Delay-line state that makes a constant input `x0` pass through with
    /// no transient.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y0 = self.dc_gain() * x0;
        let z2 = self.b[2] * x0 - self.a[2] * y0;
        let z1 = self.b[1] * x0 - self.a[1] * y0 + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let Sos { b, a } = *self;
        for v in x.iter_mut() {
            let xi = *v;
            let y = b[0] * xi + z[0];
            z[0] = b[1] * xi - a[1] * y + z[1];
            z[1] = b[2] * xi - a[2] * y;
            *v = y;
        }
    }
}

/// Digital Butterworth low-pass designed by the bilinear transform with the
/// cutoff pre-warped, stored as a cascade of second-order sections.
#[derive(Clone, Debug, PartialEq)]
pub struct Butterworth {
    pub order: usize,
    pub sections: Vec<Sos>,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff: f64, fs: f64) -> Result<Self, DataError> {
        if order == 0 {
            return Err(DataError::InvalidFilter("order must be at least 1".into()));
        }
        if !(cutoff > 0.0 && cutoff < fs / 2.0) {
            return Err(DataError::InvalidFilter(format!("cutoff {cutoff} Hz outside (0, {}) Hz", fs / 2.0)));
        }
        let c = 1.0 / (std::f64::consts::PI * cutoff / fs).tan();
        let c2 = c * c;
        let n = order as f64;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for k in 1..=order / 2 {
            // analog pole pair s² + b s + 1 with b = 2 sin((2k−1)π / 2N)
            let b = 2.0 * ((2 * k - 1) as f64 * std::f64::consts::PI / (2.0 * n)).sin();
            let a0 = c2 + b * c + 1.0;
            sections.push(Sos {
                b: [1.0 / a0, 2.0 / a0, 1.0 / a0],
                a: [1.0, (2.0 - 2.0 * c2) / a0, (c2 - b * c + 1.0) / a0],
            });
        }
        if order % 2 == 1 {
            let a0 = c + 1.0;
            sections.push(Sos { b: [1.0 / a0, 1.0 / a0, 0.0], a: [1.0, (1.0 - c) / a0, 0.0] });
        }
        Ok(Self { order, sections })
    }

    /// Single causal pass starting from the steady state of `x[0]`.
    pub fn filter(&self, x: &mut [f64]) {
        if x.is_empty() {
            return;
        }
        for s in &self.sections {
            let z = s.steady_state(x[0]);
            s.run(x, z);
        }
    }

    /// `|H(e^{jω})|` at `f` Hz for a single pass.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f / fs;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        self.sections
            .iter()
            .map(|s| {
                let re = |p: &[f64; 3]| p[0] + p[1] * c1 + p[2] * c2;
                let im = |p: &[f64; 3]| -(p[1] * s1 + p[2] * s2);
                (re(&s.b).hypot(im(&s.b))) / (re(&s.a).hypot(im(&s.a)))
            })
            .product()
    }

    pub fn pad_len(&self) -> usize {
        3 * self.order
    }

    /// Zero-phase forward-backward filtering with odd reflection padding of
    /// `3·order` samples at each end.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, DataError> {
        let pad = self.pad_len();
        let min = 2 * pad + 1;
        if x.len() < min {
            return Err(DataError::TooShort { len: x.len(), min });
        }
        let n = x.len();
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * first - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * last - x[n - 1 - k]));
        self.filter(&mut ext);
        ext.reverse();
        self.filter(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Zero-phase Butterworth low-pass of `series`.
pub fn butter_filtfilt(series: &[f64], cutoff: f64, order: usize, fs: f64) -> Result<Vec<f64>, DataError> {
    Butterworth::lowpass(order, cutoff, fs)?.filtfilt(series)
}

/// Hemisphere-aligns the sequence, filters the per-sample rotation vectors
/// and maps back through the exponential map.
pub fn filter_quaternions(
    q: &[UnitQuaternion],
    cutoff: f64,
    order: usize,
    fs: f64,
) -> Result<Vec<UnitQuaternion>, DataError> {
    let filt = Butterworth::lowpass(order, cutoff, fs)?;
    let mut aligned = Vec::with_capacity(q.len());
    for (i, qi) in q.iter().enumerate() {
        let mut a = *qi;
        if i > 0 && a.dot(&aligned[i - 1]) < 0.0 {
            a = UnitQuaternion::from_xyzw(-a.x, -a.y, -a.z, -a.w);
        }
        aligned.push(a);
    }
    let r: Vec<[f64; 3]> = aligned.iter().map(|a| log_map(a).0.to_array()).collect();
    let mut comps = [Vec::new(), Vec::new(), Vec::new()];
    for (k, c) in comps.iter_mut().enumerate() {
        *c = filt.filtfilt(&r.iter().map(|v| v[k]).collect::<Vec<_>>())?;
    }
    Ok((0..q.len())
        .map(|i| {
            let v = crate::math::Vec3::new(comps[0][i], comps[1][i], comps[2][i]);
            rotvec_to_quat(&crate::math::RotationVector(v))
        })
        .collect())
}

/// Per-group cutoffs of the zero-phase low-pass stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub position_hz: f64,
    pub velocity_hz: f64,
    pub acceleration_hz: f64,
    pub motor_hz: f64,
    pub quaternion_hz: f64,
    pub order: usize,
    pub fs: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            position_hz: 10.0,
            velocity_hz: 18.0,
            acceleration_hz: 25.0,
            motor_hz: 20.0,
            quaternion_hz: 12.0,
            order: 4,
            fs: 100.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        for f in [self.position_hz, self.velocity_hz, self.acceleration_hz, self.motor_hz, self.quaternion_hz] {
            Butterworth::lowpass(self.order, f, self.fs)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{geodesic_error, Vec3};
    use std::f64::consts::PI;

    fn sine(f: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn fourth_order_sections_match_closed_form() {
        let bw = Butterworth::lowpass(4, 10.0, 100.0).unwrap();
        let c = 1.0 / (PI / 10.0).tan();
        for (s, b) in bw.sections.iter().zip([0.765366864730180, 1.847759065022573]) {
            let a0 = c * c + b * c + 1.0;
            assert!((s.a[1] - (2.0 - 2.0 * c * c) / a0).abs() < 1e-14);
            assert!((s.a[2] - (c * c - b * c + 1.0) / a0).abs() < 1e-14);
            assert!((s.b[1] - 2.0 / a0).abs() < 1e-15);
        }
        // half-power point at the cutoff, unit DC gain
        assert!((bw.magnitude(10.0, 100.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((bw.magnitude(0.0, 100.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn odd_order_design_is_valid() {
        let bw = Butterworth::lowpass(3, 5.0, 100.0).unwrap();
        assert_eq!(bw.sections.len(), 2);
        assert!((bw.magnitude(5.0, 100.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn constant_passes_unchanged() {
        let x = vec![3.25; 300];
        let y = butter_filtfilt(&x, 10.0, 4, 100.0).unwrap();
        assert!(y.iter().all(|v| (v - 3.25).abs() <= 1e-9));
    }

    #[test]
    fn passband_sine_keeps_amplitude_and_phase() {
        let x = sine(2.0, 2000, 100.0);
        let y = butter_filtfilt(&x, 10.0, 4, 100.0).unwrap();
        let gain = bw_gain(&x[500..1500], &y[500..1500]);
        assert!((gain - 1.0).abs() < 0.01, "{gain}");
        // phase via quadrature projection
        let w = 2.0 * PI * 2.0 / 100.0;
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in y.iter().enumerate().take(1500).skip(500) {
            s += v * (w * i as f64).sin();
            c += v * (w * i as f64).cos();
        }
        assert!(c.atan2(s).abs() < 1e-3);
    }

    fn bw_gain(x: &[f64], y: &[f64]) -> f64 {
        let e = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        e(y) / e(x)
    }

    #[test]
    fn stopband_sine_attenuated_40db() {
        let x = sine(40.0, 2000, 100.0);
        let y = butter_filtfilt(&x, 10.0, 4, 100.0).unwrap();
        let g = bw_gain(&x[200..1800], &y[200..1800]);
        assert!(20.0 * g.log10() <= -40.0, "{}", 20.0 * g.log10());
    }

    #[test]
    fn too_short_and_bad_cutoff_rejected() {
        assert!(matches!(butter_filtfilt(&[1.0; 24], 10.0, 4, 100.0), Err(DataError::TooShort { .. })));
        assert!(butter_filtfilt(&[1.0; 25], 10.0, 4, 100.0).is_ok());
        assert!(matches!(butter_filtfilt(&[1.0; 100], 60.0, 4, 100.0), Err(DataError::InvalidFilter(_))));
    }

    #[test]
    fn quaternion_filter_keeps_unit_norm_and_slow_motion() {
        let q: Vec<UnitQuaternion> = (0..1000)
            .map(|i| {
                let t = i as f64 / 100.0;
                UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.4 * (2.0 * PI * 0.5 * t).sin())
            })
            .collect();
        let f = filter_quaternions(&q, 12.0, 4, 100.0).unwrap();
        for (a, b) in q.iter().zip(&f) {
            assert!((b.norm() - 1.0).abs() <= 1e-9);
            assert!(geodesic_error(a, b) <= 1e-3);
        }
    }

    #[test]
    fn quaternion_filter_ignores_sign_representation() {
        // yaw ramp through ±π, once plain and once with every third sample negated
        let plain: Vec<UnitQuaternion> = (0..400)
            .map(|i| UnitQuaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 2.0 + 0.01 * i as f64))
            .collect();
        let flipped: Vec<UnitQuaternion> = plain
            .iter()
            .enumerate()
            .map(|(i, a)| if i % 3 == 1 { UnitQuaternion::from_xyzw(-a.x, -a.y, -a.z, -a.w) } else { *a })
            .collect();
        let f1 = filter_quaternions(&plain, 12.0, 4, 100.0).unwrap();
        let f2 = filter_quaternions(&flipped, 12.0, 4, 100.0).unwrap();
        for ((a, b), q) in f1.iter().zip(&f2).zip(&plain) {
            assert!(geodesic_error(a, b) < 1e-12);
            assert!(geodesic_error(a, q) < 1e-3);
        }
        // away from the edges a ramp passes unchanged
        for (a, q) in f1.iter().zip(&plain).skip(60).take(280) {
            assert!(geodesic_error(a, q) < 1e-9);
        }
    }
}
