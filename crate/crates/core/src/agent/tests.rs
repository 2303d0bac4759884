use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trainer::{target_network, training_networks};
use super::*;
use crate::graphenc::GraphMode;
use crate::nn::{Matrix, ModelConfig};
use crate::scenario::{generate_network, GenerationParams};

fn q(rows: &[[f64; 2]]) -> Matrix {
    Matrix::new(rows.len(), 2, rows.iter().flatten().copied().collect())
}

#[test]
fn argmax_with_prolong_ties() {
    let a = select_actions(&q(&[[4.0, 2.0], [2.0, 2.0], [1.0, 3.0]]));
    assert_eq!(a, vec![TscAction::Prolong, TscAction::Prolong, TscAction::Switch]);
}

#[test]
fn double_q_targets() {
    let on = q(&[[1.0, 2.0]]);
    let tg = q(&[[0.5, 1.5]]);
    let y = td_targets(&[-3.0], &on, &tg, &[[true, true]], 0.99).unwrap();
    assert!((y[0] - -1.515).abs() < 1e-12);
    let y = td_targets(&[-3.0], &on, &tg, &[[true, false]], 0.99).unwrap();
    assert!((y[0] - -2.505).abs() < 1e-12);
    let y = td_targets(&[-3.0], &on, &tg, &[[true, true]], 0.0).unwrap();
    assert_eq!(y[0], -3.0);
    assert!(matches!(td_targets(&[-3.0], &on, &tg, &[[false, false]], 0.99), Err(AgentError::NoFeasibleAction)));
    assert!(matches!(td_targets(&[], &on, &tg, &[], 0.99), Err(AgentError::EmptyBatch)));
}

#[test]
fn replay_ring_keeps_latest() {
    let mut b = ReplayBuffer::new(3);
    for i in 0..5 {
        b.push(i);
    }
    assert_eq!((b.len(), b.pushed()), (3, 5));
    let mut got = b.sample(&mut ChaCha8Rng::seed_from_u64(1), 200);
    got.sort();
    got.dedup();
    assert_eq!(got, vec![2, 3, 4]);
}

#[test]
fn config_parsing() {
    let c = TrainConfig::from_toml_str("mode = \"vehicle\"\ntraining_set = \"generalist\"\nsims = 3\n").unwrap();
    assert_eq!((c.mode, c.training_set, c.sims), (GraphMode::Vehicle, TrainingSet::Generalist, 3));
    assert_eq!(c.batch, 16);
    assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
    assert!(TrainConfig::from_toml_str("gamma = 1.5").is_err());
}

fn small_config(sims: usize) -> TrainConfig {
    TrainConfig { sims, warmup: usize::MAX, capacity: 10_000, ..TrainConfig::default() }
}

#[test]
fn one_entry_per_controller_and_step() {
    let net = Arc::new(generate_network(3, &GenerationParams::with_intersections(3)).unwrap());
    assert_eq!(net.tsc_count(), 3);
    let nets = vec![net.clone(), net];
    let learner = GraphLearner::new(ModelConfig::for_mode(GraphMode::Lane), &nets);
    let mut t = Trainer::new(learner, small_config(2), nets).unwrap();
    t.run_until(1000, |_| {}).unwrap();
    assert_eq!(t.env_steps(), 1000);
    assert_eq!(t.replay_len(), 3000);
    assert_eq!(t.episode_rewards().len(), 2);
    assert_eq!(t.updates(), 0);
}

#[test]
fn target_sync_and_staleness() {
    let cfg = TrainConfig { sims: 1, warmup: 16, target_sync: 5, intersections: 1, ..TrainConfig::default() };
    let net = target_network(&cfg).unwrap();
    let nets = training_networks(&cfg, &net).unwrap();
    let learner = GraphLearner::new(ModelConfig::for_mode(GraphMode::Lane), &nets);
    let mut t = Trainer::new(learner, cfg, nets).unwrap();
    while t.updates() < 5 {
        t.round().unwrap();
        if t.updates() > 0 && t.updates() < 5 {
            assert_ne!(t.online(), t.target());
        }
    }
    assert_eq!(t.online(), t.target());
    t.round().unwrap();
    assert_ne!(t.online(), t.target());
}

#[test]
fn generalist_networks_exclude_target() {
    let cfg = TrainConfig { training_set: TrainingSet::Generalist, generalist_networks: 3, sims: 5, ..TrainConfig::default() };
    let target = target_network(&cfg).unwrap();
    let nets = training_networks(&cfg, &target).unwrap();
    assert_eq!(nets.len(), 5);
    assert!(nets.iter().all(|n| **n != *target));
    assert!(nets[0] != nets[1]);
    assert!(Arc::ptr_eq(&nets[0], &nets[3]));
}

#[test]
fn seeded_training_is_deterministic() {
    let run = |jobs| {
        let cfg = TrainConfig { sims: 2, warmup: 50, total_steps: 200, intersections: 1, jobs, ..TrainConfig::default() };
        let net = target_network(&cfg).unwrap();
        let nets = training_networks(&cfg, &net).unwrap();
        let learner = GraphLearner::new(ModelConfig::for_mode(GraphMode::Lane), &nets);
        let mut t = Trainer::new(learner, cfg, nets).unwrap();
        t.run_until(200, |_| {}).unwrap();
        t.into_online()
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(2));
}
