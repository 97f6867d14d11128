//! Flight log in the benchmark CSV schema.

use std::fs::File;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use indexmap::IndexMap;

use super::DataError;
use crate::dynamics::MotorSpeeds;
use crate::math::{LearnState, State, UnitQuaternion, Vec3};

/// Mandatory columns, in canonical output order.
pub const CORE_COLUMNS: [&str; 21] = [
    "t", "m1_rads", "m2_rads", "m3_rads", "m4_rads", "x", "y", "z", "vx", "vy", "vz", "qx", "qy", "qz", "qw", "wx",
    "wy", "wz", "ax_body", "ay_body", "az_body",
];

/// Optional reference-position columns used for flight-segment extraction.
pub const REFERENCE_COLUMNS: [&str; 3] = ["x_ref", "y_ref", "z_ref"];

pub const MOTOR_COLUMNS: [&str; 4] = ["m1_rads", "m2_rads", "m3_rads", "m4_rads"];
pub const POSITION_COLUMNS: [&str; 3] = ["x", "y", "z"];
pub const VELOCITY_COLUMNS: [&str; 3] = ["vx", "vy", "vz"];
pub const QUATERNION_COLUMNS: [&str; 4] = ["qx", "qy", "qz", "qw"];
pub const RATE_COLUMNS: [&str; 3] = ["wx", "wy", "wz"];
pub const ACCEL_COLUMNS: [&str; 3] = ["ax_body", "ay_body", "az_body"];

fn is_numeric_column(name: &str) -> bool {
    CORE_COLUMNS.contains(&name) || REFERENCE_COLUMNS.contains(&name)
}

/// Time-indexed table. Core and reference columns are numeric (`NaN` marks a
/// missing sample); any other column is carried along as raw text.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightLog {
    numeric: IndexMap<String, Vec<f64>>,
    opaque: IndexMap<String, Vec<String>>,
}

impl FlightLog {
    /// Builds a log from numeric columns; validates presence, lengths and time.
    pub fn from_columns(columns: IndexMap<String, Vec<f64>>) -> Result<Self, DataError> {
        Self::with_opaque(columns, IndexMap::new())
    }

    /// Uniformly sampled log from states and the inputs held after each of
    /// them. The accelerometer columns are zero.
    pub fn from_states(dt: f64, states: &[State], motors: &[MotorSpeeds]) -> Result<Self, DataError> {
        if states.len() != motors.len() {
            return Err(DataError::Schema(format!("{} states vs {} motor rows", states.len(), motors.len())));
        }
        let mut cols: IndexMap<String, Vec<f64>> =
            CORE_COLUMNS.iter().map(|c| (c.to_string(), Vec::with_capacity(states.len()))).collect();
        for (k, (s, u)) in states.iter().zip(motors).enumerate() {
            let mut row = [0.0; 21];
            row[0] = k as f64 * dt;
            row[1..5].copy_from_slice(&u.0);
            row[5..8].copy_from_slice(&s.p.to_array());
            row[8..11].copy_from_slice(&s.v.to_array());
            row[11..15].copy_from_slice(&s.q.to_array());
            row[15..18].copy_from_slice(&s.w.to_array());
            for (col, v) in cols.values_mut().zip(row) {
                col.push(v);
            }
        }
        Self::from_columns(cols)
    }

    pub fn with_opaque(
        columns: IndexMap<String, Vec<f64>>,
        opaque: IndexMap<String, Vec<String>>,
    ) -> Result<Self, DataError> {
        for c in CORE_COLUMNS {
            if !columns.contains_key(c) {
                return Err(DataError::MissingColumn(c.to_string()));
            }
        }
        let n = columns["t"].len();
        for (name, v) in columns.iter() {
            if v.len() != n {
                return Err(DataError::Schema(format!("column `{name}` has {} rows, expected {n}", v.len())));
            }
        }
        for (name, v) in opaque.iter() {
            if v.len() != n {
                return Err(DataError::Schema(format!("column `{name}` has {} rows, expected {n}", v.len())));
            }
        }
        let mut numeric = IndexMap::new();
        for c in CORE_COLUMNS.iter().chain(REFERENCE_COLUMNS.iter()) {
            if let Some(v) = columns.get(*c) {
                numeric.insert(c.to_string(), v.clone());
            }
        }
        for (name, v) in columns {
            if !numeric.contains_key(&name) {
                return Err(DataError::Schema(format!("unexpected numeric column `{name}`")));
            }
            let _ = v;
        }
        let log = Self { numeric, opaque };
        log.check_time()?;
        Ok(log)
    }

    fn check_time(&self) -> Result<(), DataError> {
        let t = self.t();
        for (i, w) in t.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(DataError::NonMonotonicTime { row: i + 1, t: w[1] });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.numeric["t"].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn t(&self) -> &[f64] {
        &self.numeric["t"]
    }

    pub fn col(&self, name: &str) -> Option<&[f64]> {
        self.numeric.get(name).map(|v| v.as_slice())
    }

    /// Panics on an unknown name; use for core columns only.
    pub fn core(&self, name: &str) -> &[f64] {
        &self.numeric[name]
    }

    pub fn col_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.numeric.get_mut(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.numeric.keys().map(|s| s.as_str()).chain(self.opaque.keys().map(|s| s.as_str()))
    }

    pub fn opaque(&self, name: &str) -> Option<&[String]> {
        self.opaque.get(name).map(|v| v.as_slice())
    }

    pub fn has_reference(&self) -> bool {
        REFERENCE_COLUMNS.iter().all(|c| self.numeric.contains_key(*c))
    }

    pub fn reference(&self, i: usize) -> Option<Vec3> {
        if !self.has_reference() {
            return None;
        }
        Some(Vec3::new(self.numeric["x_ref"][i], self.numeric["y_ref"][i], self.numeric["z_ref"][i]))
    }

    fn vec3(&self, names: [&str; 3], i: usize) -> Vec3 {
        Vec3::new(self.numeric[names[0]][i], self.numeric[names[1]][i], self.numeric[names[2]][i])
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.vec3(POSITION_COLUMNS, i)
    }

    pub fn accel(&self, i: usize) -> Vec3 {
        self.vec3(ACCEL_COLUMNS, i)
    }

    pub fn rates(&self, i: usize) -> Vec3 {
        self.vec3(RATE_COLUMNS, i)
    }

    pub fn quaternion(&self, i: usize) -> UnitQuaternion {
        let c = |n: &str| self.numeric[n][i];
        UnitQuaternion::from_xyzw(c("qx"), c("qy"), c("qz"), c("qw"))
    }

    pub fn state(&self, i: usize) -> State {
        State { p: self.position(i), v: self.vec3(VELOCITY_COLUMNS, i), q: self.quaternion(i), w: self.rates(i) }
    }

    pub fn learn_state(&self, i: usize) -> LearnState {
        self.state(i).pack()
    }

    pub fn motors(&self, i: usize) -> MotorSpeeds {
        MotorSpeeds(std::array::from_fn(|k| self.numeric[MOTOR_COLUMNS[k]][i]))
    }

    pub fn states(&self) -> Vec<State> {
        (0..self.len()).map(|i| self.state(i)).collect()
    }

    pub fn all_motors(&self) -> Vec<MotorSpeeds> {
        (0..self.len()).map(|i| self.motors(i)).collect()
    }

    /// Sample interval estimated from the first two timestamps.
    pub fn dt(&self) -> Option<f64> {
        let t = self.t();
        (t.len() >= 2).then(|| t[1] - t[0])
    }

    /// Checks a constant sampling interval `1/fs` within `tol` seconds.
    pub fn is_uniform(&self, fs: f64, tol: f64) -> bool {
        self.t().windows(2).all(|w| ((w[1] - w[0]) - 1.0 / fs).abs() <= tol)
    }

    /// Rows `range`, all columns.
    pub fn slice(&self, range: Range<usize>) -> FlightLog {
        Self {
            numeric: self.numeric.iter().map(|(k, v)| (k.clone(), v[range.clone()].to_vec())).collect(),
            opaque: self.opaque.iter().map(|(k, v)| (k.clone(), v[range.clone()].to_vec())).collect(),
        }
    }

    pub(crate) fn numeric_columns(&self) -> &IndexMap<String, Vec<f64>> {
        &self.numeric
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> =
            rdr.headers().map_err(|e| DataError::Csv(e.to_string()))?.iter().map(|h| h.trim().to_string()).collect();
        let mut numeric: IndexMap<String, Vec<f64>> = IndexMap::new();
        let mut opaque: IndexMap<String, Vec<String>> = IndexMap::new();
        for h in &headers {
            if is_numeric_column(h) {
                numeric.insert(h.clone(), Vec::new());
            } else {
                opaque.insert(h.clone(), Vec::new());
            }
        }
        for c in CORE_COLUMNS {
            if !numeric.contains_key(c) {
                return Err(DataError::MissingColumn(c.to_string()));
            }
        }
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
            if rec.len() != headers.len() {
                return Err(DataError::Parse {
                    row: row + 1,
                    column: String::new(),
                    message: format!("expected {} fields, found {}", headers.len(), rec.len()),
                });
            }
            for (field, name) in rec.iter().zip(headers.iter()) {
                if let Some(col) = numeric.get_mut(name) {
                    col.push(parse_field(field).map_err(|message| DataError::Parse {
                        row: row + 1,
                        column: name.clone(),
                        message,
                    })?);
                } else {
                    opaque[name].push(field.to_string());
                }
            }
        }
        Self::with_opaque(numeric, opaque)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(self.to_csv_string().as_bytes()).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let header: Vec<&str> = self.column_names().collect();
        w.write_record(&header).expect("in-memory write");
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            row.clear();
            row.extend(self.numeric.values().map(|c| format_g17(c[i])));
            row.extend(self.opaque.values().map(|c| c[i].clone()));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

fn parse_field(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
}

/// `printf("%.17g")`: 17 significant digits, trailing zeros trimmed; `NaN`
/// becomes the empty field.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if neg { "-" } else { "" };
    if !(-4..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        let es = if exp < 0 { '-' } else { '+' };
        if frac.is_empty() {
            format!("{sign}{}e{es}{:02}", &digits[..1], exp.abs())
        } else {
            format!("{sign}{}.{frac}e{es}{:02}", &digits[..1], exp.abs())
        }
    } else if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        let frac = format!("{zeros}{digits}");
        format!("{sign}0.{}", frac.trim_end_matches('0'))
    } else {
        let split = (exp + 1) as usize;
        let (int, frac) = digits.split_at(split);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }
}
