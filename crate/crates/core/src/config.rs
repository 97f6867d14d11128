//! Run configuration shared by every command, with a content hash stamped
//! into each artifact.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::control::ControllerGains;
use crate::data::PipelineConfig;
use crate::dynamics::{PhysicsConfig, PhysicsMode, RigidBodyParams, RotorParams};
use crate::models::{
    train, LstmModel, Model, ModelError, Normalizer, ResidualBase, ResidualModel, Sequence, TrainConfig,
    TrainHistory, WindowDataset, DEFAULT_FF_HIDDEN, DEFAULT_LSTM_HIDDEN,
};
use crate::par::Exec;
use crate::sim::{NoiseSpec, SimConfig};
use crate::trajectory::TrajectoryKind;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "QUADBENCH_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// The five predictors of the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    Physics,
    Residual,
    Hybrid,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [Self::Naive, Self::Physics, Self::Residual, Self::Hybrid, Self::Lstm];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Physics => "physics",
            Self::Residual => "residual",
            Self::Hybrid => "hybrid",
            Self::Lstm => "lstm",
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, Self::Residual | Self::Hybrid | Self::Lstm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown model `{s}` (expected naive, physics, residual, hybrid or lstm)"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Per-run curves averaged with equal weight.
    #[default]
    Equal,
    /// Every window of every run weighted equally.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub ff_hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub physics_mode: PhysicsMode,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { ff_hidden: DEFAULT_FF_HIDDEN.to_vec(), lstm_hidden: DEFAULT_LSTM_HIDDEN, physics_mode: PhysicsMode::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub body: RigidBodyParams,
    pub rotor: RotorParams,
    pub gains: ControllerGains,
    pub noise: NoiseSpec,
    /// Linear drag [1/s] injected into synthetic flights only.
    pub synthetic_drag: f64,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub models: ModelSpec,
    pub seed: u64,
    pub horizon: usize,
    pub fs: f64,
    pub train_trajectories: Vec<TrajectoryKind>,
    pub test_trajectories: Vec<TrajectoryKind>,
    pub aggregation: Aggregation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: "data".into(),
            out_dir: "out".into(),
            checkpoint_dir: "checkpoints".into(),
            body: RigidBodyParams::default(),
            rotor: RotorParams::default(),
            gains: ControllerGains::default(),
            noise: NoiseSpec::default(),
            synthetic_drag: 0.0,
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
            models: ModelSpec::default(),
            seed: 0,
            horizon: 50,
            fs: 100.0,
            train_trajectories: vec![TrajectoryKind::Square, TrajectoryKind::Random, TrajectoryKind::Chirp],
            test_trajectories: vec![TrajectoryKind::Melon],
            aggregation: Aggregation::Equal,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    /// The file named by [`CONFIG_ENV`] when set, defaults otherwise.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(PathBuf::from(p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if !(self.fs > 0.0) {
            return bad("fs must be positive");
        }
        if !(self.body.mass > 0.0) || !(self.rotor.kf > 0.0) || !(self.rotor.km > 0.0) || !(self.rotor.arm_length > 0.0) {
            return bad("mass, kf, km and arm must be positive");
        }
        if self.models.ff_hidden.is_empty() || self.models.ff_hidden.contains(&0) || self.models.lstm_hidden == 0 {
            return bad("hidden layer sizes must be positive");
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 || !(self.train.learning_rate > 0.0) {
            return bad("epochs, batch size and learning rate must be positive");
        }
        if let Some(f) = &self.pipeline.filter {
            f.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// SHA-256 over the compact JSON of everything except the paths.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.data_dir = PathBuf::new();
        c.out_dir = PathBuf::new();
        c.checkpoint_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn physics(&self) -> PhysicsConfig {
        PhysicsConfig { body: self.body, rotor: self.rotor, mode: self.models.physics_mode, dt: 1.0 / self.fs, substeps: 1 }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = self.pipeline.clone();
        p.fs = self.fs;
        if let Some(f) = &mut p.filter {
            f.fs = self.fs;
        }
        p
    }

    pub fn sim(&self, noise_seed: u64) -> SimConfig {
        let mut body = self.body;
        body.linear_drag = self.synthetic_drag;
        SimConfig { gains: self.gains, body, rotor: self.rotor, noise: self.noise, noise_seed, ..SimConfig::default() }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    /// An untrained model of `kind`; learned models take their scaling from
    /// `train_seqs` and start at their base predictor.
    pub fn build_model(&self, kind: ModelKind, train_seqs: &[Sequence]) -> Model {
        let phys = self.physics();
        match kind {
            ModelKind::Naive => Model::Naive,
            ModelKind::Physics => Model::Physics { config: phys },
            ModelKind::Residual => Model::Residual(ResidualModel::new(
                ResidualBase::Identity,
                &self.models.ff_hidden,
                Normalizer::from_increments(train_seqs),
                self.seed,
            )),
            ModelKind::Hybrid => Model::Residual(ResidualModel::new(
                ResidualBase::Physics { config: phys },
                &self.models.ff_hidden,
                Normalizer::from_physics_residuals(train_seqs, &phys),
                self.seed,
            )),
            ModelKind::Lstm => {
                Model::Lstm(LstmModel::new(self.models.lstm_hidden, Normalizer::from_increments(train_seqs), self.seed))
            }
        }
    }

    /// Builds and, for learned kinds, trains a model on `train_seqs`.
    pub fn fit_model(
        &self,
        kind: ModelKind,
        train_seqs: Vec<Sequence>,
        exec: Exec,
    ) -> Result<(Model, Option<TrainHistory>), ModelError> {
        let mut model = self.build_model(kind, &train_seqs);
        if !kind.is_trainable() {
            return Ok((model, None));
        }
        let data = WindowDataset::new(train_seqs, self.horizon)?;
        let tc = self.train_config();
        let history = match &mut model {
            Model::Residual(m) => train(m, &data, &tc, exec)?,
            Model::Lstm(m) => train(m, &data, &tc, exec)?,
            Model::Naive | Model::Physics { .. } => unreachable!("not trainable"),
        };
        Ok((model, Some(history)))
    }
}
