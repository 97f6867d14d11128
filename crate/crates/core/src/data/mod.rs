//! Flight-log I/O and the preprocessing chain that turns asynchronous raw
//! recordings into a uniform 100 Hz table.

mod filter;
mod gaps;
mod log;
mod pipeline;
mod raw;
mod resample;
mod xcorr;

pub use filter::{butter_filtfilt, filter_quaternions, Butterworth, FilterSpec, Sos};
pub use gaps::fill_gaps;
pub use log::{
    format_g17, FlightLog, ACCEL_COLUMNS, CORE_COLUMNS, MOTOR_COLUMNS, POSITION_COLUMNS, QUATERNION_COLUMNS,
    RATE_COLUMNS, REFERENCE_COLUMNS, VELOCITY_COLUMNS,
};
pub use pipeline::{
    align_motors_to_accel, extract_flight_segment, preprocess_pipeline, shift_series, PipelineConfig,
    PreprocessMetadata, Stage,
};
pub use raw::{Channel, RawLog};
pub use resample::{resample_retime, RetimeReport};
pub use xcorr::{estimate_lag_mean, estimate_lag_xcorr, DEFAULT_MAX_LAG};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("time is not strictly increasing at row {row} (t = {t})")]
    NonMonotonicTime { row: usize, t: f64 },
    #[error("series too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("lag undefined: series `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("channel `{channel}` covers [{start}, {end}] s, grid needs [{need_start}, {need_end}] s")]
    Coverage { channel: String, start: f64, end: f64, need_start: f64, need_end: f64 },
    #[error("reference position is zero everywhere, no flight segment")]
    EmptySegment,
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("{stage} stage failed: {source}")]
    Stage { stage: Stage, source: Box<DataError> },
}
