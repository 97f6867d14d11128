//! Multi-horizon open-loop evaluation: per-step errors, MAE curves,
//! cumulative scores and comparison reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FlightLog;
use crate::math::{geodesic_error, State};
use crate::models::{Predictor, Sequence};
use crate::par::{pairwise_sum, Exec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("log `{name}` has {len} samples, horizon {horizon} needs at least {}", horizon + 1)]
    TooShort { name: String, len: usize, horizon: usize },
    #[error("model `{model}` produced a non-finite prediction in window {window} at step {step}")]
    ModelFailure { model: String, window: usize, step: usize },
    #[error("model `{model}` returned {got} predictions for horizon {horizon} in window {window}")]
    WrongLength { model: String, window: usize, got: usize, horizon: usize },
    #[error("results disagree on horizon: {0} vs {1}")]
    MismatchedHorizon(usize, usize),
    #[error("nothing to aggregate")]
    Empty,
}

/// Error channels in report order.
pub const CHANNELS: [&str; 4] = ["p", "v", "R", "w"];

/// `(e_p, e_v, e_ω, e_R)`: Euclidean errors and the geodesic attitude error.
pub fn step_errors(y: &State, yhat: &State) -> [f64; 4] {
    [(y.p - yhat.p).norm(), (y.v - yhat.v).norm(), (y.w - yhat.w).norm(), geodesic_error(&y.q, &yhat.q)]
}

/// MAE curves for `h = 1..=H`, index `h − 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    /// Windows behind each curve (summed over runs when aggregated).
    pub windows: usize,
    pub mae_p: Vec<f64>,
    pub mae_v: Vec<f64>,
    pub mae_w: Vec<f64>,
    pub mae_r: Vec<f64>,
}

impl HorizonMetrics {
    fn zeros(horizon: usize) -> Self {
        Self {
            horizon,
            windows: 0,
            mae_p: vec![0.0; horizon],
            mae_v: vec![0.0; horizon],
            mae_w: vec![0.0; horizon],
            mae_r: vec![0.0; horizon],
        }
    }

    /// Curve by channel name (`p`, `v`, `w`, `R`).
    pub fn curve(&self, ch: &str) -> &[f64] {
        match ch {
            "p" => &self.mae_p,
            "v" => &self.mae_v,
            "w" => &self.mae_w,
            "R" => &self.mae_r,
            other => panic!("unknown channel `{other}`"),
        }
    }

    fn curves_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.mae_p, &mut self.mae_v, &mut self.mae_w, &mut self.mae_r]
    }

    /// `MAE_h` for `1 ≤ h ≤ H`.
    pub fn at(&self, ch: &str, h: usize) -> f64 {
        self.curve(ch)[h - 1]
    }

    /// `MAE_{1:H} = Σ_h MAE_h`.
    pub fn cumulative(&self, ch: &str) -> f64 {
        self.curve(ch).iter().sum()
    }
}

/// Rolls `model` from every admissible start `t ∈ {0, …, T − H − 1}` of one
/// trajectory and averages the per-step errors over windows.
pub fn evaluate_sequence(
    model: &dyn Predictor,
    seq: &Sequence,
    truth: &[State],
    horizon: usize,
    exec: Exec,
) -> Result<HorizonMetrics, BenchError> {
    let t_len = seq.len();
    if horizon == 0 || t_len < horizon + 1 {
        return Err(BenchError::TooShort { name: seq.name.clone(), len: t_len, horizon });
    }
    let starts: Vec<usize> = (0..t_len - horizon).collect();
    let per_window = exec.map(&starts, |&t| -> Result<Vec<[f64; 4]>, BenchError> {
        let pred = model.predict(&seq.states[t], &seq.inputs[t..t + horizon]);
        if pred.len() != horizon {
            return Err(BenchError::WrongLength { model: model.name(), window: t, got: pred.len(), horizon });
        }
        pred.iter()
            .enumerate()
            .map(|(k, yh)| {
                let e = step_errors(&truth[t + k + 1], &yh.unpack());
                if e.iter().all(|v| v.is_finite()) {
                    Ok(e)
                } else {
                    Err(BenchError::ModelFailure { model: model.name(), window: t, step: k + 1 })
                }
            })
            .collect()
    });
    let per_window: Vec<Vec<[f64; 4]>> = per_window.into_iter().collect::<Result<_, _>>()?;
    let n = per_window.len();
    let mut m = HorizonMetrics::zeros(horizon);
    m.windows = n;
    let mut col = vec![0.0; n];
    for (c, curve) in m.curves_mut().into_iter().enumerate() {
        for (k, slot) in curve.iter_mut().enumerate() {
            for (dst, w) in col.iter_mut().zip(&per_window) {
                *dst = w[k][c];
            }
            *slot = pairwise_sum(&col) / n as f64;
        }
    }
    Ok(m)
}

/// [`evaluate_sequence`] on a flight log.
pub fn evaluate(model: &dyn Predictor, log: &FlightLog, horizon: usize, exec: Exec) -> Result<HorizonMetrics, BenchError> {
    let seq = Sequence::from_log("log", log);
    evaluate_sequence(model, &seq, &log.states(), horizon, exec)
}

/// Equal-weight average of per-run curves.
pub fn average_runs(runs: &[HorizonMetrics]) -> Result<HorizonMetrics, BenchError> {
    aggregate(runs, |_| 1.0)
}

/// Window-weighted average, equivalent to pooling every window.
pub fn pool_runs(runs: &[HorizonMetrics]) -> Result<HorizonMetrics, BenchError> {
    aggregate(runs, |m| m.windows as f64)
}

fn aggregate(runs: &[HorizonMetrics], weight: impl Fn(&HorizonMetrics) -> f64) -> Result<HorizonMetrics, BenchError> {
    let first = runs.first().ok_or(BenchError::Empty)?;
    let h = first.horizon;
    if let Some(bad) = runs.iter().find(|r| r.horizon != h) {
        return Err(BenchError::MismatchedHorizon(h, bad.horizon));
    }
    let total: f64 = runs.iter().map(&weight).sum();
    let mut out = HorizonMetrics::zeros(h);
    out.windows = runs.iter().map(|r| r.windows).sum();
    for (c, ch) in ["p", "v", "w", "R"].iter().enumerate() {
        let dst = &mut out.curves_mut()[c];
        for k in 0..h {
            dst[k] = runs.iter().map(|r| weight(r) * r.curve(ch)[k]).sum::<f64>() / total;
        }
    }
    Ok(out)
}

/// One evaluated model on one test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub model: String,
    pub trajectories: Vec<String>,
    pub metrics: HorizonMetrics,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub elapsed_s: f64,
}

/// Side-by-side comparison of several results on the same horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub horizon: usize,
    /// Horizons shown in the table.
    pub table_horizons: Vec<usize>,
    pub results: Vec<RunResult>,
}

pub fn compare(results: &[RunResult]) -> Result<Report, BenchError> {
    let first = results.first().ok_or(BenchError::Empty)?;
    let h = first.metrics.horizon;
    if let Some(bad) = results.iter().find(|r| r.metrics.horizon != h) {
        return Err(BenchError::MismatchedHorizon(h, bad.metrics.horizon));
    }
    let mut table_horizons: Vec<usize> = [1, 10, 50].into_iter().filter(|&k| k <= h).collect();
    if !table_horizons.contains(&h) {
        table_horizons.push(h);
    }
    Ok(Report { horizon: h, table_horizons, results: results.to_vec() })
}

impl Report {
    /// Markdown table: per channel, MAE at the table horizons and the
    /// cumulative score, four decimals.
    pub fn markdown(&self) -> String {
        let units = [("p", "m"), ("v", "m/s"), ("R", "rad"), ("w", "rad/s")];
        let mut head = String::from("| model |");
        let mut rule = String::from("|---|");
        for (ch, unit) in units {
            for h in &self.table_horizons {
                head.push_str(&format!(" {ch} h={h} [{unit}] |"));
                rule.push_str("---:|");
            }
            head.push_str(&format!(" {ch} 1:{} [{unit}] |", self.horizon));
            rule.push_str("---:|");
        }
        let mut out = format!("{head}\n{rule}\n");
        for r in &self.results {
            out.push_str(&format!("| {} |", r.model));
            for (ch, _) in units {
                for &h in &self.table_horizons {
                    out.push_str(&format!(" {:.4} |", r.metrics.at(ch, h)));
                }
                out.push_str(&format!(" {:.4} |", r.metrics.cumulative(ch)));
            }
            out.push('\n');
        }
        out
    }

    /// Long-format curves: `model,h,mae_p,mae_v,mae_R,mae_w`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("model,h,mae_p,mae_v,mae_R,mae_w\n");
        for r in &self.results {
            let m = &r.metrics;
            for k in 0..m.horizon {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.model,
                    k + 1,
                    crate::data::format_g17(m.mae_p[k]),
                    crate::data::format_g17(m.mae_v[k]),
                    crate::data::format_g17(m.mae_r[k]),
                    crate::data::format_g17(m.mae_w[k]),
                ));
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{UnitQuaternion, Vec3};

    #[test]
    fn step_error_examples() {
        let y = State::at_rest(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(step_errors(&y, &y), [0.0; 4]);
        let mut yh = y;
        yh.p = y.p + Vec3::new(3.0, 4.0, 0.0);
        assert_eq!(step_errors(&y, &yh)[0], 5.0);
        yh = y;
        yh.q = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 1.0, 0.0).normalized(), std::f64::consts::FRAC_PI_2);
        assert!((step_errors(&y, &yh)[3] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    fn metrics(h: usize, p: f64, windows: usize) -> HorizonMetrics {
        let mut m = HorizonMetrics::zeros(h);
        m.windows = windows;
        m.mae_p = (1..=h).map(|k| p * k as f64).collect();
        m
    }

    #[test]
    fn averaging_and_pooling() {
        let a = metrics(3, 1.0, 10);
        let b = metrics(3, 3.0, 30);
        let avg = average_runs(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(avg.mae_p, vec![2.0, 4.0, 6.0]);
        let pooled = pool_runs(&[a.clone(), b]).unwrap();
        assert_eq!(pooled.mae_p, vec![2.5, 5.0, 7.5]);
        assert!(matches!(average_runs(&[a, metrics(4, 1.0, 1)]), Err(BenchError::MismatchedHorizon(3, 4))));
    }

    #[test]
    fn report_layout() {
        let r = RunResult {
            model: "naive".into(),
            trajectories: vec!["melon".into()],
            metrics: metrics(50, 0.01, 5),
            config_hash: None,
            seed: None,
            elapsed_s: 0.0,
        };
        let rep = compare(&[r]).unwrap();
        let md = rep.markdown();
        assert_eq!(md.lines().count(), 3);
        assert!(md.contains("| naive | 0.0100 | 0.1000 | 0.5000 | 12.7500 |"));
        assert_eq!(rep.curves_csv().lines().count(), 51);
    }
}
