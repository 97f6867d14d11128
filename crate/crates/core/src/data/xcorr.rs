use super::DataError;

/// Default search range: 2 s at 100 Hz.
pub const DEFAULT_MAX_LAG: usize = 200;

const MIN_LEN: usize = 32;

fn centered(x: &[f64], name: &str) -> Result<Vec<f64>, DataError> {
    if x.len() < MIN_LEN {
        return Err(DataError::TooShort { len: x.len(), min: MIN_LEN });
    }
    let finite = x.iter().filter(|v| v.is_finite()).count().max(1);
    let mean = x.iter().filter(|v| v.is_finite()).sum::<f64>() / finite as f64;
    // missing samples contribute nothing to the correlation
    let c: Vec<f64> = x.iter().map(|v| if v.is_finite() { v - mean } else { 0.0 }).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>();
    if !(var > 0.0) || !var.is_finite() {
        return Err(DataError::ZeroVariance(name.to_string()));
    }
    Ok(c)
}

/// Sample lag `k` that maximises the correlation of the zero-mean copies
/// `a[n−k]` and `b[n]`, so that `b[n] ≈ a[n − k]` (positive when `b` lags
/// behind `a`). Each lag is scored by the correlation coefficient over its
/// overlap, which keeps the estimate unbiased for smooth signals. Searches
/// `|k| ≤ max_lag`; among equal maxima the smallest `|k|` wins.
pub fn estimate_lag_xcorr(a: &[f64], b: &[f64], max_lag: usize) -> Result<i64, DataError> {
    let a = centered(a, "a")?;
    let b = centered(b, "b")?;
    let max_lag = max_lag.min(a.len().min(b.len()) / 2) as i64;
    let corr = |k: i64| -> f64 {
        // n ranges over indices valid for both b[n] and a[n-k]
        let lo = k.max(0);
        let hi = (b.len() as i64).min(a.len() as i64 + k);
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for n in lo..hi {
            let (x, y) = (a[(n - k) as usize], b[n as usize]);
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        let den = (aa * bb).sqrt();
        if den > 0.0 { ab / den } else { f64::NEG_INFINITY }
    };
    let mut best = (0i64, corr(0));
    for m in 1..=max_lag {
        for k in [m, -m] {
            let c = corr(k);
            if c > best.1 {
                best = (k, c);
            }
        }
    }
    Ok(best.0)
}

/// Per-pair lags averaged and rounded to the nearest sample.
pub fn estimate_lag_mean(pairs: &[(&[f64], &[f64])], max_lag: usize) -> Result<(i64, Vec<i64>), DataError> {
    let lags = pairs.iter().map(|(a, b)| estimate_lag_xcorr(a, b, max_lag)).collect::<Result<Vec<_>, _>>()?;
    let mean = lags.iter().sum::<i64>() as f64 / lags.len().max(1) as f64;
    Ok((mean.round() as i64, lags))
}
