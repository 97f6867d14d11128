use quadbench::data::{
    align_motors_to_accel, butter_filtfilt, estimate_lag_xcorr, extract_flight_segment, filter_quaternions,
    preprocess_pipeline, shift_series, Channel, FlightLog, PipelineConfig, RawLog, MOTOR_COLUMNS, POSITION_COLUMNS,
};
use quadbench::math::{geodesic_error, UnitQuaternion, Vec3};
use quadbench::sim::{simulate_flight, SimConfig};
use quadbench::trajectory::{TrajectoryKind, TrajectorySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flight(kind: TrajectoryKind, seconds: Option<f64>) -> FlightLog {
    let mut spec = TrajectorySpec::new(kind).with_seed(3);
    if let Some(s) = seconds {
        spec = spec.with_duration(s);
    }
    simulate_flight(&spec, &SimConfig::default()).unwrap().log
}

fn bare() -> PipelineConfig {
    PipelineConfig { sync_position: false, extract_segment: false, align_motors: false, filter: None, ..Default::default() }
}

#[test]
fn mocap_delay_is_recovered_and_removed() {
    let log = flight(TrajectoryKind::Random, Some(20.0));
    let mut raw = RawLog::from_flight_log(&log);
    let delay = 7;
    for c in POSITION_COLUMNS {
        let t: Vec<f64> = log.t().iter().map(|t| t + delay as f64 * 0.01).collect();
        raw.insert(format!("mocap_{c}"), Channel::new(t, log.core(c).to_vec())).unwrap();
    }
    let cfg = PipelineConfig { sync_position: true, ..bare() };
    let (out, meta) = preprocess_pipeline(&raw, &cfg).unwrap();
    assert_eq!(meta.sync_lag, Some(delay));
    assert_eq!(meta.sync_channel_lags, vec![delay; 3]);
    let t0 = log.t()[0];
    for i in 0..out.len() {
        let k = ((out.t()[i] - t0) / 0.01).round() as usize;
        assert!((out.position(i) - log.position(k)).norm() < 1e-9);
    }
}

#[test]
fn motor_lags_are_recovered_in_both_directions() {
    let log = flight(TrajectoryKind::Random, Some(20.0));
    let (same, s0, keep0) = align_motors_to_accel(&log, 200).unwrap();
    assert_eq!(s0, 0);
    assert_eq!(keep0, 0..log.len());
    assert_eq!(same, log);

    for pre in [-3i64, 3, -11] {
        let mut shifted = log.clone();
        for c in MOTOR_COLUMNS {
            *shifted.col_mut(c).unwrap() = shift_series(log.core(c), pre);
        }
        let lead = pre.unsigned_abs() as usize;
        let cut = if pre > 0 { lead..log.len() } else { 0..log.len() - lead };
        let shifted = shifted.slice(cut.clone());
        let (aligned, shift, keep) = align_motors_to_accel(&shifted, 200).unwrap();
        assert_eq!(shift, -pre);
        for i in 0..aligned.len() {
            let orig = cut.start + keep.start + i;
            assert_eq!(aligned.motors(i), log.motors(orig));
        }
    }

    let mut pre_shifted = log.clone();
    for c in MOTOR_COLUMNS {
        *pre_shifted.col_mut(c).unwrap() = shift_series(log.core(c), -3);
    }
    let pre_shifted = pre_shifted.slice(0..log.len() - 3);
    let cfg = PipelineConfig { align_motors: true, ..bare() };
    let (_, meta) = preprocess_pipeline(&RawLog::from_flight_log(&pre_shifted), &cfg).unwrap();
    assert_eq!(meta.motor_shift, Some(3));
}

#[test]
fn white_noise_lag_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = shift_series(&a, 13).iter().map(|v| if v.is_nan() { 0.0 } else { v + 0.01 * rng.random_range(-1.0..1.0) }).collect();
    // exhaustive search for the best overlap correlation
    let mut best = (f64::NEG_INFINITY, 0i64);
    for k in -100i64..=100 {
        let pairs: Vec<(f64, f64)> =
            (0..600i64).filter(|n| (0..600).contains(&(n - k))).map(|n| (b[n as usize], a[(n - k) as usize])).collect();
        let m = pairs.len() as f64;
        let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / m, pairs.iter().map(|p| p.1).sum::<f64>() / m);
        let cov: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
        let va: f64 = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum();
        let vb: f64 = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum();
        let r = cov / (va * vb).sqrt();
        if r > best.0 {
            best = (r, k);
        }
    }
    assert_eq!(best.1, 13);
    assert_eq!(estimate_lag_xcorr(&a, &b, 100).unwrap(), 13);
}

#[test]
fn segment_extraction_drops_padding() {
    let log = flight(TrajectoryKind::Square, None);
    let (cropped, range) = extract_flight_segment(&log).unwrap();
    assert_eq!(range, 0..log.len());
    assert!((cropped.t()[cropped.len() - 1] - cropped.t()[0] - 19.0).abs() < 0.011);

    let n = log.len();
    let pad = 200;
    let mut cols = indexmap::IndexMap::new();
    for name in log.column_names() {
        let src = log.col(name).unwrap();
        let mut v = Vec::with_capacity(n + 2 * pad);
        if name == "t" {
            v.extend((0..n + 2 * pad).map(|k| k as f64 * 0.01));
        } else {
            let zero_ref = name.ends_with("_ref");
            v.extend(std::iter::repeat_n(if zero_ref { 0.0 } else { src[0] }, pad));
            v.extend_from_slice(src);
            v.extend(std::iter::repeat_n(if zero_ref { 0.0 } else { src[n - 1] }, pad));
        }
        cols.insert(name.to_string(), v);
    }
    let padded = FlightLog::from_columns(cols).unwrap();
    let (_, r) = extract_flight_segment(&padded).unwrap();
    assert_eq!(r, pad..pad + n);

    let mut zero = padded.clone();
    for c in ["x_ref", "y_ref", "z_ref"] {
        zero.col_mut(c).unwrap().iter_mut().for_each(|v| *v = 0.0);
    }
    assert!(extract_flight_segment(&zero).is_err());
}

#[test]
fn clean_hover_is_left_alone() {
    let log = flight(TrajectoryKind::Hover, Some(10.0));
    let (out, meta) = preprocess_pipeline(&RawLog::from_flight_log(&log), &PipelineConfig::default()).unwrap();
    assert_eq!(meta.motor_shift, Some(0));
    // the controller settles within the first second
    for i in 0..out.len() {
        let k = meta.segment.clone().unwrap().start + i;
        if log.t()[k] < 1.0 {
            continue;
        }
        assert!((out.position(i) - log.position(k)).norm() <= 1e-6);
    }
}

#[test]
fn output_grid_is_uniform_and_unit_norm() {
    let log = flight(TrajectoryKind::Chirp, Some(15.0));
    let (out, _) = preprocess_pipeline(&RawLog::from_flight_log(&log), &PipelineConfig::default()).unwrap();
    for w in out.t().windows(2) {
        assert!((w[1] - w[0] - 0.01).abs() <= 1e-9);
    }
    for i in 0..out.len() {
        assert!((out.quaternion(i).norm() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn second_pass_is_near_identity() {
    let log = flight(TrajectoryKind::Chirp, Some(40.0));
    let cfg = PipelineConfig::default();
    let (once, _) = preprocess_pipeline(&RawLog::from_flight_log(&log), &cfg).unwrap();
    let (twice, meta) = preprocess_pipeline(&RawLog::from_flight_log(&once), &cfg).unwrap();
    assert_eq!(meta.motor_shift, Some(0));
    assert_eq!(twice.len(), once.len());
    let edge = 100;
    let mut worst = 0.0f64;
    for i in edge..once.len() - edge {
        worst = worst.max((once.position(i) - twice.position(i)).norm());
        worst = worst.max(geodesic_error(&once.quaternion(i), &twice.quaternion(i)));
    }
    assert!(worst <= 1e-6, "second pass moved signals by {worst:e}");
}

/// Power of `x` in the band `[lo, hi]` Hz by direct DFT under a
/// Blackman-Harris window, whose sidelobes sit near −92 dB.
fn band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let tau = 2.0 * std::f64::consts::PI;
    let x: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let a = tau * j as f64 / (n - 1) as f64;
            v * (0.35875 - 0.48829 * a.cos() + 0.14128 * (2.0 * a).cos() - 0.01168 * (3.0 * a).cos())
        })
        .collect();
    let mut p = 0.0;
    for k in 1..n / 2 {
        let f = k as f64 * fs / n as f64;
        if f < lo || f > hi {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * (k * j % n) as f64 / n as f64;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        p += re * re + im * im;
    }
    p
}

#[test]
fn high_frequency_noise_is_suppressed() {
    let clean = flight(TrajectoryKind::Random, Some(12.0));
    let mut noisy = clean.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise: Vec<f64> = (0..clean.len()).map(|_| 0.01 * rng.random_range(-1.0..1.0)).collect();
    for (v, e) in noisy.col_mut("x").unwrap().iter_mut().zip(&noise) {
        *v += e;
    }
    let cfg = PipelineConfig { filter: Some(Default::default()), ..bare() };
    let (out, _) = preprocess_pipeline(&RawLog::from_flight_log(&noisy), &cfg).unwrap();
    let (filtered_clean, _) = preprocess_pipeline(&RawLog::from_flight_log(&clean), &cfg).unwrap();
    let residual: Vec<f64> = out.core("x").iter().zip(filtered_clean.core("x")).map(|(a, b)| a - b).collect();
    let inner = 100..clean.len() - 100;
    let before = band_power(&noise[inner.clone()], 100.0, 20.0, 50.0);
    let after = band_power(&residual[inner], 100.0, 20.0, 50.0);
    let db = 10.0 * (before / after).log10();
    assert!(db >= 40.0, "only {db:.1} dB");
}

#[test]
fn filtering_is_zero_phase() {
    let x: Vec<f64> = (0..1000).map(|k| (2.0 * std::f64::consts::PI * 3.0 * k as f64 * 0.01).sin()).collect();
    let y = butter_filtfilt(&x, 10.0, 4, 100.0).unwrap();
    assert_eq!(estimate_lag_xcorr(&x, &y, 50).unwrap(), 0);
}

#[test]
fn quaternion_filter_commutes_with_compatible_left_factors() {
    let axis = Vec3::new(0.0, 0.0, 1.0);
    let q: Vec<UnitQuaternion> = (0..400)
        .map(|k| UnitQuaternion::from_axis_angle(axis, 0.4 * (2.0 * std::f64::consts::PI * 0.5 * k as f64 * 0.01).sin()))
        .collect();
    let r0 = UnitQuaternion::from_axis_angle(axis, 0.9);
    let rotated: Vec<UnitQuaternion> = q.iter().map(|x| r0.mul(x)).collect();
    let a = filter_quaternions(&rotated, 12.0, 4, 100.0).unwrap();
    let b = filter_quaternions(&q, 12.0, 4, 100.0).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(geodesic_error(x, &r0.mul(y)) < 1e-9);
    }

    let c = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 2.0, -0.5).normalized(), 2.0);
    let tilt = UnitQuaternion::from_axis_angle(Vec3::new(0.3, -1.0, 0.2).normalized(), 1.1);
    let constant = vec![c; 100];
    for y in filter_quaternions(&constant.iter().map(|x| tilt.mul(x)).collect::<Vec<_>>(), 12.0, 4, 100.0).unwrap() {
        assert!(geodesic_error(&y, &tilt.mul(&c)) < 1e-9);
    }
}
