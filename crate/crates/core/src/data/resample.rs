use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::log::{CORE_COLUMNS, REFERENCE_COLUMNS};
use super::raw::{Channel, RawLog, MOCAP_PREFIX};
use super::{DataError, FlightLog};

/// A bracket wider than this multiple of the median interval counts as a
/// dropped packet.
const GAP_FACTOR: f64 = 1.5;
const TIME_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetimeReport {
    pub t0: f64,
    pub rows: usize,
    /// Grid samples per channel filled by nearest-neighbour retiming.
    pub nearest: IndexMap<String, usize>,
    /// Raw channels outside the schema that were not carried over.
    pub dropped: Vec<String>,
}

pub(crate) fn sample_channel(ch: &Channel, grid: &[f64], name: &str) -> Result<(Vec<f64>, usize), DataError> {
    let (start, end) = ch.span().ok_or_else(|| DataError::Schema(format!("channel `{name}` is empty")))?;
    let (g0, g1) = (grid[0], grid[grid.len() - 1]);
    if start > g0 + TIME_TOL || end < g1 - TIME_TOL {
        return Err(DataError::Coverage { channel: name.into(), start, end, need_start: g0, need_end: g1 });
    }
    let limit = ch.median_dt().unwrap_or(f64::INFINITY) * GAP_FACTOR;
    let mut out = Vec::with_capacity(grid.len());
    let mut nearest = 0;
    let mut i = 0;
    for &g in grid {
        while i + 1 < ch.t.len() && ch.t[i + 1] <= g + TIME_TOL {
            i += 1;
        }
        if (ch.t[i] - g).abs() <= TIME_TOL || i + 1 == ch.t.len() {
            out.push(ch.v[i]);
            continue;
        }
        let (ta, tb) = (ch.t[i], ch.t[i + 1]);
        if tb - ta <= limit {
            let s = (g - ta) / (tb - ta);
            out.push(ch.v[i] + (ch.v[i + 1] - ch.v[i]) * s);
        } else {
            nearest += 1;
            out.push(if g - ta <= tb - g { ch.v[i] } else { ch.v[i + 1] });
        }
    }
    Ok((out, nearest))
}

/// Puts every schema channel on the grid `t0 + k/fs`, spanning the interval
/// covered by all channels (or `span` when given). Linear interpolation
/// inside regular brackets; across a dropped packet the nearest measurement
/// is taken. `mocap_*` channels are expected to have been merged already.
pub fn resample_retime(raw: &RawLog, fs: f64, span: Option<(f64, f64)>) -> Result<(FlightLog, RetimeReport), DataError> {
    let mut wanted: Vec<&str> = CORE_COLUMNS[1..].to_vec();
    if REFERENCE_COLUMNS.iter().all(|c| raw.get(c).is_some()) {
        wanted.extend(REFERENCE_COLUMNS);
    }
    let mut chans = Vec::with_capacity(wanted.len());
    for name in &wanted {
        chans.push(raw.get(name).ok_or_else(|| DataError::MissingColumn(name.to_string()))?);
    }
    let (t0, t1) = match span {
        Some(s) => s,
        None => {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for (ch, name) in chans.iter().zip(&wanted) {
                let (a, b) = ch.span().ok_or_else(|| DataError::Schema(format!("channel `{name}` is empty")))?;
                lo = lo.max(a);
                hi = hi.min(b);
            }
            (lo, hi)
        }
    };
    let dt = 1.0 / fs;
    if !(t1 >= t0) {
        return Err(DataError::Coverage { channel: "*".into(), start: t0, end: t1, need_start: t0, need_end: t0 });
    }
    let rows = ((t1 - t0) / dt + TIME_TOL).floor() as usize + 1;
    let grid: Vec<f64> = (0..rows).map(|k| t0 + k as f64 * dt).collect();

    let mut cols = IndexMap::new();
    let mut nearest = IndexMap::new();
    cols.insert("t".to_string(), grid.clone());
    for (ch, name) in chans.iter().zip(&wanted) {
        let (v, n) = sample_channel(ch, &grid, name)?;
        cols.insert(name.to_string(), v);
        nearest.insert(name.to_string(), n);
    }
    let dropped = raw
        .names()
        .filter(|n| !wanted.contains(n) && !n.starts_with(MOCAP_PREFIX))
        .map(str::to_string)
        .collect();
    let log = FlightLog::from_columns(cols)?;
    Ok((log, RetimeReport { t0, rows, nearest, dropped }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::log::CORE_COLUMNS;

    fn raw_from(f: impl Fn(&str, f64) -> f64, times: &[f64]) -> RawLog {
        let mut raw = RawLog::new();
        for c in &CORE_COLUMNS[1..] {
            raw.insert(*c, Channel::new(times.to_vec(), times.iter().map(|&t| f(c, t)).collect())).unwrap();
        }
        raw
    }

    #[test]
    fn uniform_input_unchanged() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let raw = raw_from(|c, t| (t * 3.0 + c.len() as f64).sin(), &times);
        let (log, rep) = resample_retime(&raw, 100.0, None).unwrap();
        assert_eq!(log.len(), 200);
        for c in &CORE_COLUMNS[1..] {
            assert_eq!(log.core(c), raw.get(c).unwrap().v.as_slice());
            assert_eq!(rep.nearest[*c], 0);
        }
        assert!(log.is_uniform(100.0, 1e-9));
    }

    #[test]
    fn jittered_sine_within_interpolation_bound() {
        // 97 Hz nominal with ±20% jitter
        let mut times = Vec::new();
        let mut t = 0.0;
        let mut k = 0u64;
        while t < 5.0 {
            times.push(t);
            k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let jitter = ((k >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.4;
            t += (1.0 + jitter) / 97.0;
        }
        let w = 2.0 * std::f64::consts::PI * 1.5;
        let raw = raw_from(|_, t| (w * t).sin(), &times);
        let (log, _) = resample_retime(&raw, 100.0, None).unwrap();
        let hmax = times.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
        let bound = w * w * hmax * hmax / 8.0;
        for (ti, xi) in log.t().iter().zip(log.core("x")) {
            assert!((xi - (w * ti).sin()).abs() <= bound + 1e-12);
        }
        assert!(log.is_uniform(100.0, 1e-9));
    }

    #[test]
    fn dropped_packet_takes_nearest_neighbour() {
        let mut times: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        times.remove(20);
        let raw = raw_from(|_, t| t * t, &times);
        let (log, rep) = resample_retime(&raw, 100.0, None).unwrap();
        assert_eq!(rep.nearest["x"], 1);
        let x = raw.get("x").unwrap();
        assert!(log.core("x")[20] == x.v[19] || log.core("x")[20] == x.v[20]);
        assert_eq!(log.core("x")[21], raw.get("x").unwrap().v[20]);
    }

    #[test]
    fn short_channel_is_a_coverage_error() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).collect();
        let raw = raw_from(|_, t| t, &times);
        let err = resample_retime(&raw, 100.0, Some((0.0, 1.0))).unwrap_err();
        assert!(matches!(err, DataError::Coverage { .. }));
    }
}
