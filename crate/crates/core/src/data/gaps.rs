/// Linearly interpolates interior runs of at most `max_gap` consecutive `NaN`
/// samples. Longer runs and runs touching either end stay missing.
pub fn fill_gaps(series: &[f64], max_gap: usize) -> Vec<f64> {
    let mut out = series.to_vec();
    let n = series.len();
    let mut i = 0;
    while i < n {
        if !series[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && series[i].is_nan() {
            i += 1;
        }
        let len = i - start;
        if start == 0 || i == n || len > max_gap {
            continue;
        }
        let (y0, y1) = (series[start - 1], series[i]);
        let span = (len + 1) as f64;
        for (k, v) in out[start..i].iter_mut().enumerate() {
            let s = (k + 1) as f64 / span;
            *v = y0 + (y1 - y0) * s;
        }
    }
    out
}
