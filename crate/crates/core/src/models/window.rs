use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::data::FlightLog;
use crate::dynamics::MotorSpeeds;
use crate::math::LearnState;

/// One trajectory in learning representation: `states[k]` is `ỹ_k`, `inputs[k]`
/// is the input held over `[t_k, t_{k+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub name: String,
    pub states: Vec<LearnState>,
    pub inputs: Vec<MotorSpeeds>,
}

impl Sequence {
    pub fn from_log(name: impl Into<String>, log: &FlightLog) -> Self {
        Self { name: name.into(), states: (0..log.len()).map(|i| log.learn_state(i)).collect(), inputs: log.all_motors() }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Borrowed view of one window.
#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    pub y0: &'a LearnState,
    /// `u_t … u_{t+H−1}`
    pub inputs: &'a [MotorSpeeds],
    /// `ỹ_{t+1} … ỹ_{t+H}`
    pub targets: &'a [LearnState],
}

/// All stride-1 windows of horizon `H` over one or more sequences. Windows
/// reference the sequences rather than copying them.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowDataset {
    pub horizon: usize,
    pub sequences: Vec<Sequence>,
    /// `(sequence, start)` pairs.
    pub index: Vec<(usize, usize)>,
}

impl WindowDataset {
    pub fn new(sequences: Vec<Sequence>, horizon: usize) -> Result<Self, ModelError> {
        if horizon == 0 {
            return Err(ModelError::Config("horizon must be positive".into()));
        }
        let mut index = Vec::new();
        for (s, seq) in sequences.iter().enumerate() {
            if seq.len() < horizon + 1 {
                return Err(ModelError::TooShort { name: seq.name.clone(), len: seq.len(), horizon });
            }
            index.extend((0..seq.len() - horizon).map(|t| (s, t)));
        }
        Ok(Self { horizon, sequences, index })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn window(&self, i: usize) -> Window<'_> {
        let (s, t) = self.index[i];
        let seq = &self.sequences[s];
        let h = self.horizon;
        Window { y0: &seq.states[t], inputs: &seq.inputs[t..t + h], targets: &seq.states[t + 1..t + 1 + h] }
    }

    pub fn windows(&self) -> impl Iterator<Item = Window<'_>> {
        (0..self.len()).map(|i| self.window(i))
    }
}

/// Windows of a single log.
pub fn make_windows(log: &FlightLog, horizon: usize) -> Result<WindowDataset, ModelError> {
    WindowDataset::new(vec![Sequence::from_log("log", log)], horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_flight, SimConfig};
    use crate::trajectory::{TrajectoryKind, TrajectorySpec};

    fn hover_log(seconds: f64) -> FlightLog {
        let spec = TrajectorySpec::new(TrajectoryKind::Hover).with_duration(seconds);
        simulate_flight(&spec, &SimConfig::default()).unwrap().log
    }

    #[test]
    fn window_count_and_alignment() {
        let log = hover_log(0.99);
        assert_eq!(log.len(), 100);
        let ds = make_windows(&log, 50).unwrap();
        assert_eq!(ds.len(), 50);
        let w = ds.window(17);
        assert_eq!(*w.y0, log.learn_state(17));
        assert_eq!(w.targets[0], log.learn_state(18));
        assert_eq!(w.inputs[0], log.motors(17));
        assert_eq!(w.targets.len(), 50);
        let last = ds.window(49);
        assert_eq!(*last.targets.last().unwrap(), log.learn_state(99));
    }

    #[test]
    fn short_log_rejected() {
        let log = hover_log(0.49);
        assert!(matches!(make_windows(&log, 50), Err(ModelError::TooShort { .. })));
        assert_eq!(make_windows(&log, 49).unwrap().len(), 1);
    }
}
