//! Decentralized deep Q-learning with one shared model for every
//! controller: noisy exploration, replay with action correction, and
//! double-Q targets restricted to feasible next actions.

mod config;
mod learner;
mod trainer;

pub use config::{TrainConfig, TrainingSet};
pub use learner::{GraphLearner, Learner};
pub(crate) use trainer::mix;
pub use trainer::{target_network, train, training_networks, write_log, LogRow, TrainOutcome, Trainer};

use std::sync::{Arc, Mutex};

use rand::Rng;
use thiserror::Error;

use crate::nn::{Matrix, NnError};
use crate::scenario::ScenarioError;
use crate::sim::{SimError, TscAction};

pub const DEFAULT_GAMMA: f64 = 0.99;
pub const DEFAULT_CAPACITY: usize = 200_000;
pub const DEFAULT_WARMUP: usize = 2_000;
pub const DEFAULT_BATCH: usize = 16;
pub const DEFAULT_EPISODE_STEPS: usize = 500;
pub const DEFAULT_TARGET_SYNC: u64 = 100;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("every next action is masked")]
    NoFeasibleAction,
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One simulation step seen by every controller of a network.
#[derive(Debug)]
pub struct Transition<O> {
    pub obs: Arc<O>,
    /// Per-controller stored action: the realized phase effect, or the
    /// requested action when correction is disabled.
    pub actions: Vec<TscAction>,
    pub rewards: Vec<f64>,
    pub next_obs: Arc<O>,
    /// Per-controller feasibility of `[PROLONG, SWITCH]` in the next state.
    pub next_masks: Vec<[bool; 2]>,
}

/// Replay item: a transition and the controller it is about.
pub type Entry<O> = (Arc<Transition<O>>, usize);

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
    pushed: u64,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: Vec::new(), capacity, next: 0, pushed: 0 }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes, including overwritten items.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Vec<T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect()
    }
}

/// Replay buffer shared between collectors and the learner. Every append
/// completes before the call returns and is visible to every later sample.
#[derive(Debug)]
pub struct SharedReplay<T>(Mutex<ReplayBuffer<T>>);

impl<T: Clone> SharedReplay<T> {
    pub fn new(capacity: usize) -> Self {
        Self(Mutex::new(ReplayBuffer::new(capacity)))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ReplayBuffer<T>> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn extend(&self, items: impl IntoIterator<Item = T>) {
        let mut b = self.lock();
        for i in items {
            b.push(i);
        }
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.lock().is_empty()
    }

    pub fn pushed(&self) -> u64 {
        self.lock().pushed()
    }

    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Vec<T> {
        self.lock().sample(rng, n)
    }
}

/// Per-row argmax of a Q matrix; ties go to PROLONG.
pub fn select_actions(q: &Matrix) -> Vec<TscAction> {
    (0..q.rows())
        .map(|r| if q.get(r, 1) > q.get(r, 0) { TscAction::Switch } else { TscAction::Prolong })
        .collect()
}

/// Best feasible action under `q`; ties go to the lower index.
pub fn select_next_action(q: &[f64], mask: [bool; 2]) -> Result<usize, AgentError> {
    let mut best: Option<usize> = None;
    for (a, &ok) in mask.iter().enumerate() {
        if ok && best.is_none_or(|b| q[a] > q[b]) {
            best = Some(a);
        }
    }
    best.ok_or(AgentError::NoFeasibleAction)
}

/// Double-Q targets `r + γ · Q_target(s', argmax_{feasible a} Q_online(s', a))`.
pub fn td_targets(
    rewards: &[f64],
    q_online_next: &Matrix,
    q_target_next: &Matrix,
    masks: &[[bool; 2]],
    gamma: f64,
) -> Result<Vec<f64>, AgentError> {
    if rewards.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let a = select_next_action(q_online_next.row(i), masks[i])?;
            Ok(r + gamma * q_target_next.get(i, a))
        })
        .collect()
}

#[cfg(test)]
mod tests;
