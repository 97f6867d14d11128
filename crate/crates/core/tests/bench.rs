use quadbench::bench::{average_runs, compare, evaluate, pool_runs, step_errors, BenchError, HorizonMetrics, RunResult};
use quadbench::data::FlightLog;
use quadbench::dynamics::MotorSpeeds;
use quadbench::math::{LearnState, State, UnitQuaternion, Vec3};
use quadbench::models::{Naive, Predictor};
use quadbench::par::Exec;
use quadbench::sim::{simulate_flight, SimConfig};
use quadbench::trajectory::{TrajectoryKind, TrajectorySpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn flight(kind: TrajectoryKind, seconds: f64) -> FlightLog {
    simulate_flight(&TrajectorySpec::new(kind).with_duration(seconds), &SimConfig::default()).unwrap().log
}

fn constant_log(len: usize) -> FlightLog {
    let s = State { q: UnitQuaternion::from_axis_angle(Vec3::new(1.0, 2.0, 0.5), 0.4), ..State::at_rest(Vec3::new(1.0, -2.0, 3.0)) };
    FlightLog::from_states(0.01, &vec![s; len], &vec![MotorSpeeds::splat(1600.0); len]).unwrap()
}

#[test]
fn step_error_examples() {
    let a = State::at_rest(Vec3::ZERO);
    assert_eq!(step_errors(&a, &a), [0.0; 4]);
    let b = State::at_rest(Vec3::new(3.0, 4.0, 0.0));
    assert_eq!(step_errors(&a, &b)[0], 5.0);
    for axis in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.3, -0.2, 0.9)] {
        let c = State { q: UnitQuaternion::from_axis_angle(axis, std::f64::consts::FRAC_PI_2), ..a };
        assert!((step_errors(&a, &c)[3] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}

#[test]
fn naive_on_constant_log_is_exact() {
    let m = evaluate(&Naive, &constant_log(80), 50, Exec::Sequential).unwrap();
    assert_eq!(m.windows, 30);
    for ch in ["p", "v", "w"] {
        assert!(m.curve(ch).iter().all(|&e| e == 0.0), "{ch}");
    }
    // attitude goes through the rotation-vector round trip
    assert!(m.mae_r.iter().all(|&e| e < 1e-15));
}

#[test]
fn naive_position_error_is_nondecreasing() {
    for kind in [TrajectoryKind::Melon, TrajectoryKind::Square, TrajectoryKind::Random] {
        let m = evaluate(&Naive, &flight(kind, 15.0), 50, Exec::default()).unwrap();
        for w in m.mae_p.windows(2) {
            assert!(w[1] >= w[0], "{kind:?}");
        }
    }
}

#[test]
fn metrics_do_not_depend_on_window_order() {
    let log = flight(TrajectoryKind::Random, 10.0);
    let h = 30;
    let seq = Exec::Sequential;
    let a = evaluate(&Naive, &log, h, seq).unwrap();
    let b = evaluate(&Naive, &log, h, Exec::Parallel).unwrap();
    assert_eq!(a, b);

    let states = log.states();
    let mut starts: Vec<usize> = (0..log.len() - h).collect();
    starts.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    for k in 1..=h {
        let shuffled: f64 = starts.iter().map(|&t| (states[t + k].p - states[t].p).norm()).sum::<f64>() / starts.len() as f64;
        assert!((shuffled - a.at("p", k)).abs() <= 1e-12 * shuffled.max(1.0));
    }
}

#[test]
fn cumulative_is_sum_of_curve() {
    let m = evaluate(&Naive, &flight(TrajectoryKind::Chirp, 8.0), 50, Exec::default()).unwrap();
    for ch in ["p", "v", "R", "w"] {
        assert_eq!(m.cumulative(ch), m.curve(ch).iter().sum::<f64>());
    }
}

#[test]
fn short_logs_are_rejected() {
    assert!(matches!(
        evaluate(&Naive, &constant_log(50), 50, Exec::Sequential),
        Err(BenchError::TooShort { len: 50, horizon: 50, .. })
    ));
    assert_eq!(evaluate(&Naive, &constant_log(51), 50, Exec::Sequential).unwrap().windows, 1);
}

struct Breaks {
    at: Vec3,
}

impl Predictor for Breaks {
    fn name(&self) -> String {
        "breaks".into()
    }

    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState> {
        let mut out = vec![*y0; inputs.len()];
        if (y0.p - self.at).norm() < 1e-9 {
            out[4].v.x = f64::NAN;
        }
        out
    }
}

#[test]
fn model_failure_reports_window() {
    let log = flight(TrajectoryKind::Square, 3.0);
    let err = evaluate(&Breaks { at: log.state(17).p }, &log, 20, Exec::Parallel).unwrap_err();
    assert_eq!(err, BenchError::ModelFailure { model: "breaks".into(), window: 17, step: 5 });
}

fn metrics(windows: usize, value: f64) -> HorizonMetrics {
    HorizonMetrics {
        horizon: 2,
        windows,
        mae_p: vec![value; 2],
        mae_v: vec![value; 2],
        mae_w: vec![value; 2],
        mae_r: vec![value; 2],
    }
}

#[test]
fn run_aggregation_weights() {
    let runs = [metrics(100, 1.0), metrics(300, 3.0)];
    assert_eq!(average_runs(&runs).unwrap().mae_p, vec![2.0; 2]);
    assert_eq!(pool_runs(&runs).unwrap().mae_p, vec![2.5; 2]);
    assert_eq!(average_runs(&runs).unwrap().windows, 400);
    assert_eq!(average_runs(&[]), Err(BenchError::Empty));
}

fn result(name: &str, m: HorizonMetrics) -> RunResult {
    RunResult { model: name.into(), trajectories: vec!["melon".into()], metrics: m, config_hash: None, seed: None, elapsed_s: 0.0 }
}

#[test]
fn report_layout() {
    let m = evaluate(&Naive, &flight(TrajectoryKind::Melon, 8.0), 50, Exec::default()).unwrap();
    let report = compare(&[result("naive", m.clone())]).unwrap();
    assert_eq!(report.table_horizons, vec![1, 10, 50]);
    let md = report.markdown();
    assert_eq!(md.lines().count(), 3);
    assert!(md.lines().nth(2).unwrap().contains(&format!("{:.4}", m.cumulative("p"))));
    assert_eq!(report.curves_csv().lines().count(), 51);

    let short = evaluate(&Naive, &flight(TrajectoryKind::Melon, 8.0), 20, Exec::default()).unwrap();
    assert_eq!(compare(&[result("a", m), result("b", short)]).unwrap_err(), BenchError::MismatchedHorizon(50, 20));
}
