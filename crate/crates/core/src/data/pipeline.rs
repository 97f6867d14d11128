use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::filter::{filter_quaternions, Butterworth, FilterSpec};
use super::gaps::fill_gaps;
use super::log::{ACCEL_COLUMNS, MOTOR_COLUMNS, POSITION_COLUMNS, QUATERNION_COLUMNS, RATE_COLUMNS, VELOCITY_COLUMNS};
use super::raw::{Channel, RawLog, MOCAP_PREFIX};
use super::resample::{resample_retime, sample_channel, RetimeReport};
use super::xcorr::{estimate_lag_mean, estimate_lag_xcorr, DEFAULT_MAX_LAG};
use super::{DataError, FlightLog};
use crate::math::UnitQuaternion;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sync,
    Resample,
    Segment,
    MotorAlign,
    GapFill,
    Filter,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Sync => "timestamp sync",
            Stage::Resample => "resample",
            Stage::Segment => "segment extraction",
            Stage::MotorAlign => "motor alignment",
            Stage::GapFill => "gap fill",
            Stage::Filter => "filter",
        };
        f.write_str(s)
    }
}

fn at(stage: Stage) -> impl FnOnce(DataError) -> DataError {
    move |e| DataError::Stage { stage, source: Box::new(e) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fs: f64,
    pub max_lag: usize,
    pub max_gap: usize,
    pub sync_position: bool,
    pub extract_segment: bool,
    pub align_motors: bool,
    pub filter: Option<FilterSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fs: 100.0,
            max_lag: DEFAULT_MAX_LAG,
            max_gap: 10,
            sync_position: true,
            extract_segment: true,
            align_motors: true,
            filter: Some(FilterSpec::default()),
        }
    }
}

/// Everything the pipeline did to a log, serialised as the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessMetadata {
    /// Samples by which the motion-capture stream lagged the onboard one.
    pub sync_lag: Option<i64>,
    pub sync_channel_lags: Vec<i64>,
    pub retime: RetimeReport,
    /// Rows of the retimed grid kept by segment extraction.
    pub segment: Option<Range<usize>>,
    /// Samples the motor channels were delayed by (negative: advanced).
    pub motor_shift: Option<i64>,
    /// Rows of the segment kept after motor alignment.
    pub motor_crop: Option<Range<usize>>,
    pub gaps_filled: usize,
    pub gaps_remaining: usize,
    pub filter: Option<FilterSpec>,
    pub rows: usize,
    pub config_hash: Option<String>,
}

/// Delays `x` by `s` samples: `out[n] = x[n − s]`, `NaN` where undefined.
pub fn shift_series(x: &[f64], s: i64) -> Vec<f64> {
    let n = x.len() as i64;
    (0..n).map(|i| if (0..n).contains(&(i - s)) { x[(i - s) as usize] } else { f64::NAN }).collect()
}

/// Crops to the longest contiguous run of rows with a nonzero reference
/// position.
pub fn extract_flight_segment(log: &FlightLog) -> Result<(FlightLog, Range<usize>), DataError> {
    if !log.has_reference() {
        return Err(DataError::MissingColumn("x_ref".into()));
    }
    let mut best: Option<Range<usize>> = None;
    let mut start = None;
    for i in 0..=log.len() {
        let active = i < log.len() && log.reference(i).is_some_and(|r| r.norm() > 0.0);
        match (active, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.as_ref().is_none_or(|b| i - s > b.len()) {
                    best = Some(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    let range = best.ok_or(DataError::EmptySegment)?;
    Ok((log.slice(range.clone()), range))
}

/// Shifts the motor channels by the lag that best aligns `ΣΩᵢ²` with
/// `az_body`, then drops the rows left without motor data. Returns the
/// applied delay and the kept rows.
pub fn align_motors_to_accel(log: &FlightLog, max_lag: usize) -> Result<(FlightLog, i64, Range<usize>), DataError> {
    let s: Vec<f64> = (0..log.len()).map(|i| log.motors(i).sum_squared()).collect();
    let lag = estimate_lag_xcorr(log.core("az_body"), &s, max_lag)?;
    let shift = -lag;
    if shift == 0 {
        return Ok((log.clone(), 0, 0..log.len()));
    }
    let mut out = log.clone();
    for c in MOTOR_COLUMNS {
        let shifted = shift_series(log.core(c), shift);
        *out.col_mut(c).expect("core column") = shifted;
    }
    let n = log.len();
    let keep = if shift > 0 { (shift as usize).min(n)..n } else { 0..n.saturating_sub((-shift) as usize) };
    Ok((out.slice(keep.clone()), shift, keep))
}

fn filter_runs(x: &[f64], filt: &Butterworth) -> Result<Vec<f64>, DataError> {
    let mut out = x.to_vec();
    let min = 2 * filt.pad_len() + 1;
    for run in finite_runs(x.len(), |i| x[i].is_finite()) {
        if run.len() >= min {
            out[run.clone()].copy_from_slice(&filt.filtfilt(&x[run])?);
        }
    }
    Ok(out)
}

fn finite_runs(n: usize, ok: impl Fn(usize) -> bool) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for i in 0..=n {
        let good = i < n && ok(i);
        match (good, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    runs
}

fn apply_filters(log: &mut FlightLog, spec: &FilterSpec) -> Result<(), DataError> {
    let groups: [(&[&str], f64); 5] = [
        (&POSITION_COLUMNS, spec.position_hz),
        (&VELOCITY_COLUMNS, spec.velocity_hz),
        (&RATE_COLUMNS, spec.velocity_hz),
        (&ACCEL_COLUMNS, spec.acceleration_hz),
        (&MOTOR_COLUMNS, spec.motor_hz),
    ];
    for (cols, fc) in groups {
        let filt = Butterworth::lowpass(spec.order, fc, spec.fs)?;
        for c in cols {
            let y = filter_runs(log.core(c), &filt)?;
            *log.col_mut(c).expect("core column") = y;
        }
    }
    let n = log.len();
    let q: Vec<[f64; 4]> =
        (0..n).map(|i| std::array::from_fn(|k| log.core(QUATERNION_COLUMNS[k])[i])).collect();
    let mut out = q.clone();
    let min = 2 * 3 * spec.order + 1;
    for run in finite_runs(n, |i| q[i].iter().all(|v| v.is_finite())) {
        if run.len() < min {
            continue;
        }
        let seg: Vec<UnitQuaternion> = q[run.clone()].iter().map(|a| UnitQuaternion::from_array(*a)).collect();
        let f = filter_quaternions(&seg, spec.quaternion_hz, spec.order, spec.fs)?;
        for (dst, src) in out[run].iter_mut().zip(f) {
            *dst = src.to_array();
        }
    }
    for (k, c) in QUATERNION_COLUMNS.iter().enumerate() {
        *log.col_mut(c).expect("core column") = out.iter().map(|a| a[k]).collect();
    }
    Ok(())
}

/// Merges motion-capture channels into the onboard stream after estimating
/// their delay from the three position components.
fn sync_mocap(raw: &RawLog, cfg: &PipelineConfig) -> Result<(RawLog, Option<i64>, Vec<i64>), DataError> {
    let mocap: Vec<String> = raw.names().filter(|n| n.starts_with(MOCAP_PREFIX)).map(str::to_string).collect();
    if mocap.is_empty() {
        return Ok((raw.clone(), None, Vec::new()));
    }
    let mut lag = 0;
    let mut lags = Vec::new();
    let has_pos = POSITION_COLUMNS.iter().all(|c| raw.get(c).is_some() && raw.get(&format!("{MOCAP_PREFIX}{c}")).is_some());
    if cfg.sync_position && has_pos {
        let dt = 1.0 / cfg.fs;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for c in POSITION_COLUMNS {
            for name in [c.to_string(), format!("{MOCAP_PREFIX}{c}")] {
                let (a, b) = raw.get(&name).and_then(Channel::span).ok_or(DataError::MissingColumn(name.clone()))?;
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        if !(hi > lo) {
            return Err(DataError::Coverage { channel: "mocap".into(), start: lo, end: hi, need_start: lo, need_end: hi });
        }
        let grid: Vec<f64> = (0..=((hi - lo) / dt + 1e-9).floor() as usize).map(|k| lo + k as f64 * dt).collect();
        let mut series = Vec::new();
        for c in POSITION_COLUMNS {
            let (a, _) = sample_channel(raw.get(c).expect("checked"), &grid, c)?;
            let m = format!("{MOCAP_PREFIX}{c}");
            let (b, _) = sample_channel(raw.get(&m).expect("checked"), &grid, &m)?;
            series.push((a, b));
        }
        let pairs: Vec<(&[f64], &[f64])> = series.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
        (lag, lags) = estimate_lag_mean(&pairs, cfg.max_lag)?;
    }
    let mut out = raw.clone();
    let offset = lag as f64 / cfg.fs;
    for name in mocap {
        let mut ch = out.remove(&name).expect("listed");
        ch.t.iter_mut().for_each(|t| *t -= offset);
        out.insert(name[MOCAP_PREFIX.len()..].to_string(), ch)?;
    }
    Ok((out, Some(lag), lags))
}

/// Full chain: sync → resample → segment → motor alignment → gap fill →
/// filtering. Errors carry the stage that raised them.
pub fn preprocess_pipeline(raw: &RawLog, cfg: &PipelineConfig) -> Result<(FlightLog, PreprocessMetadata), DataError> {
    let (synced, sync_lag, sync_channel_lags) = sync_mocap(raw, cfg).map_err(at(Stage::Sync))?;
    let (mut log, retime) = resample_retime(&synced, cfg.fs, None).map_err(at(Stage::Resample))?;

    let mut segment = None;
    if cfg.extract_segment && log.has_reference() {
        let (l, r) = extract_flight_segment(&log).map_err(at(Stage::Segment))?;
        log = l;
        segment = Some(r);
    }

    let (mut motor_shift, mut motor_crop) = (None, None);
    if cfg.align_motors {
        let (l, s, r) = align_motors_to_accel(&log, cfg.max_lag).map_err(at(Stage::MotorAlign))?;
        log = l;
        motor_shift = Some(s);
        motor_crop = Some(r);
    }

    let names: Vec<String> = log.column_names().filter(|c| *c != "t").map(str::to_string).collect();
    let (mut gaps_filled, mut gaps_remaining) = (0, 0);
    for c in &names {
        let Some(col) = log.col(c) else { continue };
        let before = col.iter().filter(|v| v.is_nan()).count();
        let filled = fill_gaps(col, cfg.max_gap);
        let after = filled.iter().filter(|v| v.is_nan()).count();
        gaps_filled += before - after;
        gaps_remaining += after;
        *log.col_mut(c).expect("numeric column") = filled;
    }

    if let Some(spec) = &cfg.filter {
        spec.validate().map_err(at(Stage::Filter))?;
        apply_filters(&mut log, spec).map_err(at(Stage::Filter))?;
    }

    let rows = log.len();
    Ok((
        log,
        PreprocessMetadata {
            sync_lag,
            sync_channel_lags,
            retime,
            segment,
            motor_shift,
            motor_crop,
            gaps_filled,
            gaps_remaining,
            filter: cfg.filter.clone(),
            rows,
            config_hash: None,
        },
    ))
}
