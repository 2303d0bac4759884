//! Inductive graph reinforcement learning for adaptive traffic signal
//! control.
//!
//! The crate bundles a deterministic 1 Hz traffic microsimulator
//! ([`sim`]), seeded network and demand generation ([`scenario`]), the
//! typed observation graph ([`graphenc`]), a small reverse-mode
//! differentiation core with a relational graph-convolutional Q-network
//! ([`nn`]), decentralized double Q-learning with action correction
//! ([`agent`]), baseline controllers ([`baselines`]) and the evaluation
//! harness ([`eval`]).

pub mod scenario;
pub mod sim;
pub mod graphenc;
pub mod nn;
pub mod agent;
pub mod baselines;
pub mod eval;
pub mod cli;
