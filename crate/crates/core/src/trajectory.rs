//! Reference trajectory generators: Square, Random, Melon, Chirp (and a
//! constant Hover used for regulation tests).
//!
//! Every generator returns `round(duration · sample_rate) + 1` samples on a
//! uniform grid starting at `t = 0`, with analytic velocity and acceleration.
//! Reference yaw is always zero.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub psi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Square,
    Random,
    Melon,
    Chirp,
    Hover,
}

impl TrajectoryKind {
    pub const BENCHMARK: [TrajectoryKind; 4] = [Self::Square, Self::Random, Self::Melon, Self::Chirp];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Square => "square",
            Self::Random => "random",
            Self::Melon => "melon",
            Self::Chirp => "chirp",
            Self::Hover => "hover",
        }
    }

    /// Square, Random and Chirp are training trajectories; Melon is held out.
    pub fn is_training(&self) -> bool {
        matches!(self, Self::Square | Self::Random | Self::Chirp)
    }

    pub fn default_duration(&self) -> f64 {
        match self {
            Self::Square => SquareParams::default().duration(),
            Self::Random => RandomParams::default().duration,
            Self::Melon => {
                let m = MelonParams::default();
                m.main_duration + m.return_duration
            }
            Self::Chirp => ChirpParams::default().duration,
            Self::Hover => 10.0,
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown trajectory kind `{0}` (expected square, random, melon, chirp or hover)")]
pub struct UnknownTrajectory(pub String);

impl FromStr for TrajectoryKind {
    type Err = UnknownTrajectory;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Self::Square),
            "random" => Ok(Self::Random),
            "melon" => Ok(Self::Melon),
            "chirp" | "multisine" => Ok(Self::Chirp),
            "hover" => Ok(Self::Hover),
            _ => Err(UnknownTrajectory(s.to_string())),
        }
    }
}

/// Which trajectory to generate and how to sample it.
///
/// `duration` overrides the kind's nominal length for Random, Chirp and
/// Hover; Square and Melon have a fixed geometry-driven timeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub sample_rate: f64,
    pub duration: Option<f64>,
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn new(kind: TrajectoryKind) -> Self {
        Self { kind, sample_rate: 100.0, duration: None, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = Some(duration);
        self
    }

    pub fn duration(&self) -> f64 {
        match self.kind {
            TrajectoryKind::Square | TrajectoryKind::Melon => self.kind.default_duration(),
            _ => self.duration.unwrap_or_else(|| self.kind.default_duration()),
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration() * self.sample_rate).round() as usize + 1
    }

    fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = 1.0 / self.sample_rate;
        (0..self.sample_count()).map(move |k| k as f64 * dt)
    }
}

/// Dispatches to the generator for `spec.kind`.
pub fn generate(spec: &TrajectorySpec) -> Vec<ReferencePoint> {
    match spec.kind {
        TrajectoryKind::Square => gen_square(spec),
        TrajectoryKind::Random => gen_random(spec),
        TrajectoryKind::Melon => gen_melon(spec),
        TrajectoryKind::Chirp => gen_chirp(spec),
        TrajectoryKind::Hover => gen_hover(spec),
    }
}

fn point(t: f64, p: Vec3, v: Vec3, a: Vec3) -> ReferencePoint {
    ReferencePoint { t, p, v, a, psi: 0.0 }
}

// ---------------------------------------------------------------- square

#[derive(Clone, Copy, Debug)]
pub struct SquareParams {
    /// First corner of the lower square.
    pub start: Vec3,
    pub side: f64,
    pub level_gap: f64,
    pub edge_time: f64,
    pub hover_time: f64,
}

impl Default for SquareParams {
    fn default() -> Self {
        Self { start: Vec3::new(-0.5, -0.5, 0.5), side: 1.0, level_gap: 1.0, edge_time: 1.0, hover_time: 1.0 }
    }
}

impl SquareParams {
    /// Corner sequence: lower loop, climb, upper loop, descent.
    pub fn waypoints(&self) -> Vec<Vec3> {
        let s = self.side;
        let loop_offsets = [(0.0, 0.0), (s, 0.0), (s, s), (0.0, s), (0.0, 0.0)];
        let mut out = Vec::with_capacity(11);
        for dz in [0.0, self.level_gap] {
            for (dx, dy) in loop_offsets {
                out.push(self.start + Vec3::new(dx, dy, dz));
            }
        }
        out.push(self.start);
        out
    }

    pub fn duration(&self) -> f64 {
        let moves = (self.waypoints().len() - 1) as f64;
        moves * self.edge_time + (moves - 1.0) * self.hover_time
    }
}

/// Rest-to-rest minimum-snap profile on `[0, 1]` (zero velocity,
/// acceleration and jerk at both ends): value, first and second derivative.
pub fn min_snap_profile(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let s = t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3);
    let ds = t3 * (140.0 - 420.0 * t + 420.0 * t2 - 140.0 * t3);
    let dds = t2 * (420.0 - 1680.0 * t + 2100.0 * t2 - 840.0 * t3);
    (s, ds, dds)
}

pub fn gen_square(spec: &TrajectorySpec) -> Vec<ReferencePoint> {
    let sq = SquareParams::default();
    let wps = sq.waypoints();
    let period = sq.edge_time + sq.hover_time;
    let last = wps.len() - 2;
    spec.grid()
        .map(|t| {
            let i = ((t / period).floor() as usize).min(last);
            let local = t - i as f64 * period;
            let (a, b) = (wps[i], wps[i + 1]);
            let d = b - a;
            let (s, ds, dds) = min_snap_profile(local / sq.edge_time);
            let te = sq.edge_time;
            point(t, a + d * s, d * (ds / te), d * (dds / (te * te)))
        })
        .collect()
}

// ---------------------------------------------------------------- random

#[derive(Clone, Copy, Debug)]
pub struct RandomParams {
    pub waypoints: usize,
    pub center: Vec3,
    pub half_extent: Vec3,
    pub duration: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            waypoints: 52,
            center: Vec3::new(0.0, 0.0, 1.5),
            half_extent: Vec3::new(0.5, 0.5, 0.25),
            duration: 60.0,
        }
    }
}

/// Natural cubic spline on uniformly spaced knots.
#[derive(Clone, Debug)]
pub struct NaturalSpline {
    t0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl NaturalSpline {
    pub fn new(t0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 2, "spline needs at least two knots");
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let k = n - 2;
            let rhs: Vec<f64> = (1..n - 1).map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h)).collect();
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            c[0] = 1.0 / 4.0;
            d[0] = rhs[0] / 4.0;
            for i in 1..k {
                let denom = 4.0 - c[i - 1];
                c[i] = 1.0 / denom;
                d[i] = (rhs[i] - d[i - 1]) / denom;
            }
            m[k] = d[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = d[i] - c[i] * m[i + 2];
            }
        }
        Self { t0, h, y, m }
    }

    /// Value, first and second derivative at `t` (clamped to the knot span).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.y.len();
        let s = ((t - self.t0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let h = self.h;
        let a = (self.t0 + (i + 1) as f64 * h - t) / h;
        let b = 1.0 - a;
        let (yi, yj, mi, mj) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let val = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let der = (yj - yi) / h + ((1.0 - 3.0 * a * a) * mi + (3.0 * b * b - 1.0) * mj) * h / 6.0;
        let sec = a * mi + b * mj;
        (val, der, sec)
    }
}

pub fn gen_random(spec: &TrajectorySpec) -> Vec<ReferencePoint> {
    let rp = RandomParams::default();
    let duration = spec.duration();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lo = rp.center - rp.half_extent;
    let hi = rp.center + rp.half_extent;
    let pts: Vec<Vec3> = (0..rp.waypoints)
        .map(|_| {
            Vec3::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y), rng.random_range(lo.z..=hi.z))
        })
        .collect();
    let h = duration / (rp.waypoints - 1) as f64;
    let axes: Vec<NaturalSpline> = (0..3)
        .map(|k| NaturalSpline::new(0.0, h, pts.iter().map(|p| p.to_array()[k]).collect()))
        .collect();

    let raw: Vec<[(f64, f64, f64); 3]> =
        spec.grid().map(|t| [axes[0].eval(t), axes[1].eval(t), axes[2].eval(t)]).collect();

    // Spline overshoot between knots can leave the box; shrink an offending
    // axis about the box center so every sample stays inside.
    let c = rp.center.to_array();
    let half = rp.half_extent.to_array();
    let gain: [f64; 3] = std::array::from_fn(|k| {
        let worst = raw.iter().map(|s| (s[k].0 - c[k]).abs()).fold(0.0, f64::max);
        if worst > half[k] {
            half[k] / worst
        } else {
            1.0
        }
    });

    spec.grid()
        .zip(raw)
        .map(|(t, s)| {
            let p = Vec3::from_array(std::array::from_fn(|k| c[k] + gain[k] * (s[k].0 - c[k])));
            let v = Vec3::from_array(std::array::from_fn(|k| gain[k] * s[k].1));
            let a = Vec3::from_array(std::array::from_fn(|k| gain[k] * s[k].2));
            point(t, p, v, a)
        })
        .collect()
}

// ---------------------------------------------------------------- melon

#[derive(Clone, Copy, Debug)]
pub struct MelonParams {
    pub center: Vec3,
    pub radius: f64,
    pub omega_circle: f64,
    pub omega_plane: f64,
    pub main_duration: f64,
    pub return_duration: f64,
}

impl Default for MelonParams {
    fn default() -> Self {
        Self {
            center: Vec3::new(0.0, 0.0, 1.5),
            radius: 0.75,
            omega_circle: 2.5,
            omega_plane: 0.4,
            main_duration: 60.0,
            return_duration: 5.0,
        }
    }
}

impl MelonParams {
    /// Unit-radius path: circle in the local x–z plane, the plane rotating
    /// about world x. Returns the point and its first two time derivatives.
    fn unit_path(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let (wc, wp) = (self.omega_circle, self.omega_plane);
        let (sc, cc) = (wc * t).sin_cos();
        let (sp, cp) = (wp * t).sin_cos();
        let k = wc * wc + wp * wp;
        let p = Vec3::new(cc, -sc * sp, sc * cp);
        let v = Vec3::new(-wc * sc, -(wc * cc * sp + wp * sc * cp), wc * cc * cp - wp * sc * sp);
        let a = Vec3::new(-wc * wc * cc, k * sc * sp - 2.0 * wc * wp * cc * cp, -(k * sc * cp + 2.0 * wc * wp * cc * sp));
        (p, v, a)
    }
}

/// Rest-to-rest minimum-jerk profile on `[0, 1]`: value, first and second derivative.
pub fn min_jerk_profile(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let t2 = t * t;
    let t3 = t2 * t;
    let s = t3 * (10.0 - 15.0 * t + 6.0 * t2);
    let ds = t2 * (30.0 - 60.0 * t + 30.0 * t2);
    let dds = t * (60.0 - 180.0 * t + 120.0 * t2);
    (s, ds, dds)
}

/// During the return the radius shrinks to zero along a minimum-jerk
/// profile while the phase keeps advancing, so the transition is C² at the
/// junction and ends at rest in the center.
pub fn gen_melon(spec: &TrajectorySpec) -> Vec<ReferencePoint> {
    let m = MelonParams::default();
    spec.grid()
        .map(|t| {
            let (u, du, ddu) = m.unit_path(t);
            let (rho, drho, ddrho) = if t <= m.main_duration {
                (m.radius, 0.0, 0.0)
            } else {
                let tr = m.return_duration;
                let (s, ds, dds) = min_jerk_profile((t - m.main_duration) / tr);
                (m.radius * (1.0 - s), -m.radius * ds / tr, -m.radius * dds / (tr * tr))
            };
            let p = m.center + u * rho;
            let v = u * drho + du * rho;
            let a = u * ddrho + du * (2.0 * drho) + ddu * rho;
            point(t, p, v, a)
        })
        .collect()
}

// ---------------------------------------------------------------- chirp

#[derive(Clone, Copy, Debug)]
pub struct ChirpParams {
    pub center: Vec3,
    pub amplitude: f64,
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
}

impl Default for ChirpParams {
    fn default() -> Self {
        Self { center: Vec3::new(0.0, 0.0, 1.5), amplitude: 0.5, f_start: 0.1, f_end: 0.5, duration: 60.0 }
    }
}

impl ChirpParams {
    /// Phase `2π(f0 t + (f1 − f0) t² / 2T)` and its derivatives.
    pub fn phase(&self, t: f64, duration: f64) -> (f64, f64, f64) {
        let slope = (self.f_end - self.f_start) / duration;
        let phi = 2.0 * PI * (self.f_start * t + 0.5 * slope * t * t);
        let dphi = 2.0 * PI * (self.f_start + slope * t);
        (phi, dphi, 2.0 * PI * slope)
    }
}

pub fn gen_chirp(spec: &TrajectorySpec) -> Vec<ReferencePoint> {
    let cp = ChirpParams::default();
    let duration = spec.duration();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phase0: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let c = cp.center.to_array();
    let amp = cp.amplitude;
    spec.grid()
        .map(|t| {
            let (phi, dphi, ddphi) = cp.phase(t, duration);
            let mut p = [0.0; 3];
            let mut v = [0.0; 3];
            let mut a = [0.0; 3];
            for k in 0..3 {
                let (s, co) = (phi + phase0[k]).sin_cos();
                p[k] = c[k] + amp * s;
                v[k] = amp * co * dphi;
                a[k] = amp * (co * ddphi - s * dphi * dphi);
            }
            point(t, Vec3::from_array(p), Vec3::from_array(v), Vec3::from_array(a))
        })
        .collect()
}

// ---------------------------------------------------------------- hover

pub fn gen_hover(spec: &TrajectorySpec) -> Vec<ReferencePoint> {
    let p = Vec3::new(0.0, 0.0, 1.0);
    spec.grid().map(|t| point(t, p, Vec3::ZERO, Vec3::ZERO)).collect()
}
