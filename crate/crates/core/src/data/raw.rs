use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::log::format_g17;
use super::{DataError, FlightLog};

/// Samples of one signal with its own timestamps.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Channel {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Channel {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Self {
        Self { t, v }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.t.first()?, *self.t.last()?))
    }

    /// Median sampling interval.
    pub fn median_dt(&self) -> Option<f64> {
        let mut d: Vec<f64> = self.t.windows(2).map(|w| w[1] - w[0]).collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }
}

/// Asynchronous recording: named channels sampled independently. Channels
/// named `mocap_<col>` carry external motion-capture measurements of `<col>`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RawLog {
    channels: IndexMap<String, Channel>,
}

pub const MOCAP_PREFIX: &str = "mocap_";

impl RawLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, ch: Channel) -> Result<(), DataError> {
        let name = name.into();
        if ch.t.len() != ch.v.len() {
            return Err(DataError::Schema(format!("channel `{name}`: {} stamps, {} values", ch.t.len(), ch.v.len())));
        }
        for (i, w) in ch.t.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(DataError::NonMonotonicTime { row: i + 1, t: w[1] });
            }
        }
        self.channels.insert(name, ch);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Channel> {
        self.channels.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Channel> {
        self.channels.get_mut(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<Channel> {
        self.channels.shift_remove(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(|s| s.as_str())
    }

    pub fn channels(&self) -> impl Iterator<Item = (&str, &Channel)> {
        self.channels.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Every numeric column of a uniform log becomes a channel on the shared
    /// time base.
    pub fn from_flight_log(log: &FlightLog) -> Self {
        let t = log.t().to_vec();
        let channels = log
            .numeric_columns()
            .iter()
            .filter(|(k, _)| k.as_str() != "t")
            .map(|(k, v)| (k.clone(), Channel::new(t.clone(), v.clone())))
            .collect();
        Self { channels }
    }

    /// Reads either the long layout (`channel,t,value` header) or a wide
    /// flight-log table.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DataError> {
        let header = text.lines().next().unwrap_or("");
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["channel", "t", "value"] {
            return Ok(Self::from_flight_log(&FlightLog::from_csv_str(text)?));
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let mut chans: IndexMap<String, Channel> = IndexMap::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            let parse = |i: usize, col: &str| -> Result<f64, DataError> {
                let s = rec.get(i).unwrap_or("").trim();
                if s.is_empty() {
                    return Ok(f64::NAN);
                }
                s.parse().map_err(|e| DataError::Parse { row: row + 1, column: col.into(), message: format!("`{s}`: {e}") })
            };
            let name = rec.get(0).unwrap_or("").trim().to_string();
            let t = parse(1, "t")?;
            let v = parse(2, "value")?;
            let ch = chans.entry(name).or_default();
            ch.t.push(t);
            ch.v.push(v);
        }
        let mut raw = Self::new();
        for (name, ch) in chans {
            raw.insert(name, ch)?;
        }
        Ok(raw)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(["channel", "t", "value"]).expect("in-memory write");
        for (name, ch) in &self.channels {
            for (t, v) in ch.t.iter().zip(&ch.v) {
                w.write_record([name.as_str(), &format_g17(*t), &format_g17(*v)]).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        File::create(path)
            .and_then(|mut f| f.write_all(self.to_csv_string().as_bytes()))
            .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_csv_roundtrip() {
        let mut raw = RawLog::new();
        raw.insert("x", Channel::new(vec![0.0, 0.011, 0.019], vec![1.0, f64::NAN, 0.1 + 0.2])).unwrap();
        raw.insert("mocap_x", Channel::new(vec![0.005, 0.01], vec![2.0, 3.0])).unwrap();
        let back = RawLog::from_csv_str(&raw.to_csv_string()).unwrap();
        assert_eq!(back.get("mocap_x"), raw.get("mocap_x"));
        let x = back.get("x").unwrap();
        assert!(x.v[1].is_nan());
        assert_eq!(x.v[2], 0.1 + 0.2);
    }

    #[test]
    fn non_monotonic_channel_rejected() {
        let mut raw = RawLog::new();
        let err = raw.insert("x", Channel::new(vec![0.0, 0.02, 0.01], vec![0.0; 3])).unwrap_err();
        assert!(matches!(err, DataError::NonMonotonicTime { row: 2, .. }));
    }

    #[test]
    fn median_interval() {
        let ch = Channel::new(vec![0.0, 0.01, 0.02, 0.05, 0.06], vec![0.0; 5]);
        assert!((ch.median_dt().unwrap() - 0.01).abs() < 1e-15);
    }
}
