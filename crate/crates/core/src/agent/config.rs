//! Training configuration, read from a TOML file. Every key is optional;
//! missing keys take the defaults below.
//!
//! ```toml
//! mode = "lane"              # lane | vehicle
//! training_set = "specialist" # specialist | generalist
//! network = "net.txt"        # target network; generated when absent
//! network_seed = 0
//! intersections = 0          # size of generated networks (0 = random 2..6)
//! generalist_networks = 10
//! seed = 0
//! sims = 10
//! total_steps = 100000       # environment steps summed over simulations
//! episode_steps = 500
//! trip_rate = 1.0
//! gamma = 0.99
//! lr = 0.001
//! batch = 16
//! capacity = 200000
//! warmup = 2000
//! target_sync = 100
//! correction = true
//! reward_scale = 0.01
//! log_every = 100
//! checkpoint_every = 0       # updates between checkpoints; 0 disables
//! jobs = 0                   # collector threads; 0 = available cores
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::{AgentError, DEFAULT_BATCH, DEFAULT_CAPACITY, DEFAULT_EPISODE_STEPS, DEFAULT_GAMMA, DEFAULT_TARGET_SYNC, DEFAULT_WARMUP};
use crate::graphenc::GraphMode;
use crate::nn::DEFAULT_LEARNING_RATE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingSet {
    /// Every simulation runs the target network.
    Specialist,
    /// Simulations run distinct random networks, never the target.
    Generalist,
}

impl FromStr for TrainingSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "specialist" | "s" => Ok(TrainingSet::Specialist),
            "generalist" | "g" => Ok(TrainingSet::Generalist),
            o => Err(format!("unknown training set `{o}` (expected specialist or generalist)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(deserialize_with = "de_mode")]
    pub mode: GraphMode,
    pub training_set: TrainingSet,
    pub network: Option<PathBuf>,
    pub network_seed: u64,
    pub intersections: usize,
    pub generalist_networks: usize,
    pub seed: u64,
    pub sims: usize,
    pub total_steps: u64,
    pub episode_steps: usize,
    pub trip_rate: f64,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub capacity: usize,
    pub warmup: usize,
    pub target_sync: u64,
    pub correction: bool,
    pub reward_scale: f64,
    pub log_every: u64,
    pub checkpoint_every: u64,
    pub jobs: usize,
}

fn de_mode<'de, D: serde::Deserializer<'de>>(d: D) -> Result<GraphMode, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: GraphMode::Lane,
            training_set: TrainingSet::Specialist,
            network: None,
            network_seed: 0,
            intersections: 0,
            generalist_networks: 10,
            seed: 0,
            sims: 10,
            total_steps: 100_000,
            episode_steps: DEFAULT_EPISODE_STEPS,
            trip_rate: 1.0,
            gamma: DEFAULT_GAMMA,
            lr: DEFAULT_LEARNING_RATE,
            batch: DEFAULT_BATCH,
            capacity: DEFAULT_CAPACITY,
            warmup: DEFAULT_WARMUP,
            target_sync: DEFAULT_TARGET_SYNC,
            correction: true,
            reward_scale: 0.01,
            log_every: 100,
            checkpoint_every: 0,
            jobs: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, AgentError> {
        let cfg: TrainConfig = toml::from_str(s).map_err(|e| AgentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path.as_ref())?)?;
        // relative network paths are relative to the config file
        if let (Some(n), Some(dir)) = (&cfg.network, path.as_ref().parent()) {
            if n.is_relative() {
                cfg.network = Some(dir.join(n));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if self.sims == 0 {
            return bad("sims must be at least 1");
        }
        if self.episode_steps == 0 {
            return bad("episode_steps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch == 0 {
            return bad("batch must be at least 1");
        }
        if self.capacity == 0 {
            return bad("capacity must be at least 1");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be at least 1");
        }
        if !(self.trip_rate > 0.0 && self.trip_rate.is_finite()) {
            return bad("trip_rate must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        if self.intersections > 6 {
            return bad("intersections must be at most 6");
        }
        if self.training_set == TrainingSet::Generalist && self.generalist_networks == 0 {
            return bad("generalist training needs at least one network");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        Ok(())
    }
}
