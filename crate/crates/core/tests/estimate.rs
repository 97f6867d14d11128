use quadbench::dynamics::{MotorSpeeds, RigidBodyParams, RotorParams};
use quadbench::estimate::{estimate_coefficients, fit_kf, fit_km};
use quadbench::sim::{simulate_flight, SimConfig};
use quadbench::trajectory::{TrajectoryKind, TrajectorySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const KF: f64 = 3.72e-8;
const KM: f64 = 7.73e-11;

fn random_motors(rng: &mut ChaCha8Rng, n: usize) -> Vec<MotorSpeeds> {
    (0..n).map(|_| MotorSpeeds(std::array::from_fn(|_| rng.random_range(1200.0..2200.0)))).collect()
}

fn synthetic(n: usize, sigma_az: f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<MotorSpeeds>) {
    let mass = RigidBodyParams::default().mass;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let motors = random_motors(&mut rng, n);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let az = motors.iter().map(|m| KF * m.sum_squared() / mass + sigma_az * noise.sample(&mut rng)).collect();
    let tz = motors.iter().map(|m| KM * m.yaw_regressor()).collect();
    (az, tz, motors)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn noise_free_coefficients_are_exact() {
    let mass = RigidBodyParams::default().mass;
    let (az, tz, motors) = synthetic(5000, 0.0, 1);
    assert!(rel(fit_kf(&az, &motors, mass).unwrap().value, KF) <= 1e-12);
    assert!(rel(fit_km(&tz, &motors).unwrap().value, KM) <= 1e-12);
}

#[test]
fn noisy_thrust_fit_within_one_percent() {
    let mass = RigidBodyParams::default().mass;
    for seed in 0..5 {
        let (az, _, motors) = synthetic(10_000, 0.1, seed);
        let fit = fit_kf(&az, &motors, mass).unwrap();
        assert!(rel(fit.value, KF) <= 0.01, "seed {seed}: {}", fit.value);
        assert!((fit.residual_rms / mass - 0.1).abs() < 0.005);
    }
}

#[test]
fn thrust_fit_scales_with_acceleration() {
    let mass = RigidBodyParams::default().mass;
    let (az, _, motors) = synthetic(500, 0.1, 4);
    let base = fit_kf(&az, &motors, mass).unwrap().value;
    for c in [0.5, 2.0, 8.0] {
        let scaled: Vec<f64> = az.iter().map(|a| a * c).collect();
        assert_eq!(fit_kf(&scaled, &motors, mass).unwrap().value, base * c);
    }
}

#[test]
fn thrust_error_shrinks_with_sample_count() {
    let mass = RigidBodyParams::default().mass;
    let rms_error = |n: usize| -> f64 {
        let trials = 40;
        let sq: f64 = (0..trials)
            .map(|s| {
                let (az, _, motors) = synthetic(n, 0.1, 1000 + s);
                rel(fit_kf(&az, &motors, mass).unwrap().value, KF).powi(2)
            })
            .sum();
        (sq / trials as f64).sqrt()
    };
    let e: Vec<f64> = [1_000, 10_000, 100_000].into_iter().map(rms_error).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 10f64.sqrt()).abs() < 1.2, "ratio {ratio}");
    }
}

#[test]
fn closed_loop_flights_recover_coefficients() {
    let cfg = SimConfig::default();
    let logs: Vec<_> = [TrajectoryKind::Square, TrajectoryKind::Random, TrajectoryKind::Chirp]
        .into_iter()
        .map(|k| simulate_flight(&TrajectorySpec::new(k).with_duration(20.0), &cfg).unwrap().log)
        .collect();
    let named: Vec<(&str, _)> = logs.iter().map(|l| ("flight", l)).collect();
    let report = estimate_coefficients(&named, &cfg.body).unwrap();
    let rp = RotorParams::default();
    assert!(rel(report.kf.value, rp.kf) < 1e-10);
    // torque comes from finite-differenced rates, so only approximate
    assert!(rel(report.km.value, rp.km) < 0.05, "{}", report.km.value);
    assert_eq!(report.kf.samples, logs.iter().map(|l| l.len()).sum::<usize>());
}
