use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{TrainConfig, TrainingSet};
use super::learner::{GraphLearner, Learner};
use super::{select_actions, td_targets, AgentError, Entry, SharedReplay, Transition};
use crate::nn::{save_params, Adam, ModelConfig, ModelParams, Noise, ParamSet, Tape};
use crate::scenario::{generate_demand, generate_network, load_network, GenerationParams, RoadNetwork, TripTable};
use crate::sim::{SimState, TscAction};

/// SplitMix64 finalizer, used to derive independent seeds.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub update: u64,
    pub loss: f64,
    /// Mean summed reward of the episodes finished since the previous row
    /// (NaN when none finished).
    pub mean_episode_reward: f64,
}

pub fn write_log<W: Write>(mut w: W, rows: &[LogRow]) -> std::io::Result<()> {
    writeln!(w, "update,loss,mean_episode_reward")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.update, r.loss, r.mean_episode_reward)?;
    }
    Ok(())
}

struct Slot<O> {
    env: usize,
    net: Arc<RoadNetwork>,
    state: SimState,
    obs: Arc<O>,
    episode: u64,
    steps: usize,
    episode_reward: f64,
    rng: ChaCha8Rng,
}

struct StepOutput<O> {
    transition: Arc<Transition<O>>,
    finished_episode: Option<f64>,
}

/// Lockstep collection over several simulations plus the learner.
pub struct Trainer<L: Learner> {
    learner: L,
    cfg: TrainConfig,
    online: ParamSet,
    target: ParamSet,
    adam: Adam,
    replay: SharedReplay<Entry<L::Obs>>,
    slots: Vec<Slot<L::Obs>>,
    rng: ChaCha8Rng,
    updates: u64,
    env_steps: u64,
    episode_rewards: Vec<f64>,
    log: Vec<LogRow>,
    loss_window: (f64, u64),
    logged_episodes: usize,
}

fn episode_trips(cfg: &TrainConfig, net: &RoadNetwork, sim: usize, episode: u64) -> Result<Arc<TripTable>, AgentError> {
    let seed = mix(mix(cfg.seed, sim as u64 + 1), episode);
    Ok(Arc::new(generate_demand(seed, net, cfg.trip_rate, cfg.episode_steps as f64)?))
}

impl<L: Learner> Trainer<L> {
    /// `networks[i]` is the network of simulation `i` and environment `i`
    /// of the learner.
    pub fn new(learner: L, cfg: TrainConfig, networks: Vec<Arc<RoadNetwork>>) -> Result<Self, AgentError> {
        cfg.validate()?;
        if networks.len() != cfg.sims {
            return Err(AgentError::Config(format!("{} networks for {} simulations", networks.len(), cfg.sims)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0xA11CE));
        let online = learner.init_params(&mut rng);
        let target = online.clone();
        let adam = Adam::new(&online, cfg.lr);
        let mut slots = Vec::with_capacity(cfg.sims);
        for (i, net) in networks.into_iter().enumerate() {
            let trips = episode_trips(&cfg, &net, i, 0)?;
            let state = SimState::reset(net.clone(), trips, mix(cfg.seed, i as u64))?;
            let obs = Arc::new(learner.observe(i, &state));
            slots.push(Slot {
                env: i,
                net,
                state,
                obs,
                episode: 0,
                steps: 0,
                episode_reward: 0.0,
                rng: ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x5EED + i as u64)),
            });
        }
        Ok(Self {
            replay: SharedReplay::new(cfg.capacity),
            learner,
            online,
            target,
            adam,
            slots,
            rng,
            updates: 0,
            env_steps: 0,
            episode_rewards: Vec::new(),
            log: Vec::new(),
            loss_window: (0.0, 0),
            logged_episodes: 0,
            cfg,
        })
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn online(&self) -> &ParamSet {
        &self.online
    }

    pub fn target(&self) -> &ParamSet {
        &self.target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn episode_rewards(&self) -> &[f64] {
        &self.episode_rewards
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    /// Network of each simulation, in order.
    pub fn networks(&self) -> Vec<Arc<RoadNetwork>> {
        self.slots.iter().map(|s| s.net.clone()).collect()
    }

    fn step_slot(
        learner: &L,
        cfg: &TrainConfig,
        online: &ParamSet,
        slot: &mut Slot<L::Obs>,
    ) -> Result<StepOutput<L::Obs>, AgentError> {
        let q = learner.q_values(online, &slot.obs, &mut Noise::Sampled(&mut slot.rng))?;
        let requested = select_actions(&q);
        let events = slot.state.step(&requested)?;
        let rewards: Vec<f64> = slot.state.rewards();
        slot.episode_reward += rewards.iter().sum::<f64>();
        let next_obs = Arc::new(learner.observe(slot.env, &slot.state));
        let (actions, next_masks) = if cfg.correction {
            (events.realized, slot.state.feasibility_masks())
        } else {
            (requested, vec![[true, true]; rewards.len()])
        };
        let transition = Arc::new(Transition {
            obs: slot.obs.clone(),
            actions,
            rewards: rewards.iter().map(|r| r * cfg.reward_scale).collect(),
            next_obs: next_obs.clone(),
            next_masks,
        });
        slot.obs = next_obs;
        slot.steps += 1;
        let mut finished_episode = None;
        if slot.steps == cfg.episode_steps {
            finished_episode = Some(slot.episode_reward);
            slot.episode += 1;
            slot.steps = 0;
            slot.episode_reward = 0.0;
            let trips = episode_trips(cfg, &slot.net, slot.env, slot.episode)?;
            slot.state = SimState::reset(slot.net.clone(), trips, mix(cfg.seed, slot.env as u64))?;
            slot.obs = Arc::new(learner.observe(slot.env, &slot.state));
        }
        Ok(StepOutput { transition, finished_episode })
    }

    /// Steps every simulation once, stores the transitions, then performs
    /// one update per collected step once the warm-up is reached.
    pub fn round(&mut self) -> Result<(), AgentError> {
        let outputs: Vec<Result<StepOutput<L::Obs>, AgentError>> = {
            let (learner, cfg, online) = (&self.learner, &self.cfg, &self.online);
            let jobs = match cfg.jobs {
                0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
                j => j,
            }
            .min(self.slots.len());
            if jobs <= 1 {
                self.slots.iter_mut().map(|s| Self::step_slot(learner, cfg, online, s)).collect()
            } else {
                let chunk = self.slots.len().div_ceil(jobs);
                std::thread::scope(|scope| {
                    let handles: Vec<_> = self
                        .slots
                        .chunks_mut(chunk)
                        .map(|part| {
                            scope.spawn(move || {
                                part.iter_mut().map(|s| Self::step_slot(learner, cfg, online, s)).collect::<Vec<_>>()
                            })
                        })
                        .collect();
                    handles.into_iter().flat_map(|h| h.join().expect("collector thread panicked")).collect()
                })
            }
        };
        let mut collected = 0;
        for out in outputs {
            let out = out?;
            let n = out.transition.actions.len();
            self.replay.extend((0..n).map(|j| (out.transition.clone(), j)));
            if let Some(r) = out.finished_episode {
                self.episode_rewards.push(r);
            }
            collected += 1;
        }
        self.env_steps += collected;
        for _ in 0..collected {
            if self.replay.len() >= self.cfg.warmup.max(1) {
                self.update()?;
            }
        }
        Ok(())
    }

    /// Double-Q targets for replay entries, evaluated without noise.
    pub fn targets(&self, entries: &[Entry<L::Obs>]) -> Result<Vec<f64>, AgentError> {
        let next: Vec<(&L::Obs, usize)> = entries.iter().map(|(t, j)| (&*t.next_obs, *j)).collect();
        let mut t1 = Tape::new();
        let q_on = self.learner.batch_forward(&mut t1, &self.online, &next, &mut Noise::Zero)?;
        let mut t2 = Tape::new();
        let q_tg = self.learner.batch_forward(&mut t2, &self.target, &next, &mut Noise::Zero)?;
        let rewards: Vec<f64> = entries.iter().map(|(t, j)| t.rewards[*j]).collect();
        let masks: Vec<[bool; 2]> = entries.iter().map(|(t, j)| t.next_masks[*j]).collect();
        td_targets(&rewards, t1.value(q_on), t2.value(q_tg), &masks, self.cfg.gamma)
    }

    /// One optimizer step on a uniformly sampled batch; returns the loss.
    pub fn update(&mut self) -> Result<f64, AgentError> {
        let batch = self.replay.sample(&mut self.rng, self.cfg.batch);
        if batch.is_empty() {
            return Err(AgentError::EmptyBatch);
        }
        let targets = self.targets(&batch)?;
        let items: Vec<(&L::Obs, usize)> = batch.iter().map(|(t, j)| (&*t.obs, *j)).collect();
        let actions: Vec<usize> = batch.iter().map(|(t, j)| t.actions[*j].index()).collect();
        let mut tape = Tape::new();
        let q = self.learner.batch_forward(&mut tape, &self.online, &items, &mut Noise::Sampled(&mut self.rng))?;
        let loss = tape.half_sq_err(q, actions, targets);
        let grads = tape.backward(loss, &self.online)?;
        self.adam.step(&mut self.online, &grads)?;
        self.updates += 1;
        if self.updates % self.cfg.target_sync == 0 {
            self.target = self.online.clone();
        }
        self.loss_window.0 += grads.loss;
        self.loss_window.1 += 1;
        if self.updates % self.cfg.log_every == 0 {
            let fresh = &self.episode_rewards[self.logged_episodes..];
            let mean = if fresh.is_empty() { f64::NAN } else { fresh.iter().sum::<f64>() / fresh.len() as f64 };
            self.logged_episodes = self.episode_rewards.len();
            self.log.push(LogRow {
                update: self.updates,
                loss: self.loss_window.0 / self.loss_window.1 as f64,
                mean_episode_reward: mean,
            });
            self.loss_window = (0.0, 0);
        }
        Ok(grads.loss)
    }

    /// TD loss of fixed entries under the current networks, without noise.
    pub fn td_loss(&self, entries: &[Entry<L::Obs>]) -> Result<f64, AgentError> {
        let targets = self.targets(entries)?;
        let items: Vec<(&L::Obs, usize)> = entries.iter().map(|(t, j)| (&*t.obs, *j)).collect();
        let actions: Vec<usize> = entries.iter().map(|(t, j)| t.actions[*j].index()).collect();
        let mut tape = Tape::new();
        let q = self.learner.batch_forward(&mut tape, &self.online, &items, &mut Noise::Zero)?;
        let loss = tape.half_sq_err(q, actions, targets);
        Ok(tape.value(loss).get(0, 0))
    }

    /// Draws replay entries with a dedicated generator, leaving training
    /// randomness untouched.
    pub fn sample_entries(&self, seed: u64, n: usize) -> Vec<Entry<L::Obs>> {
        self.replay.sample(&mut ChaCha8Rng::seed_from_u64(seed), n)
    }

    /// Runs rounds until at least `env_steps` environment steps were
    /// collected in total; `hook` runs after every round.
    pub fn run_until(&mut self, env_steps: u64, mut hook: impl FnMut(&Self)) -> Result<(), AgentError> {
        while self.env_steps < env_steps {
            self.round()?;
            hook(self);
        }
        Ok(())
    }

    /// Greedy actions of the current online parameters for an observation.
    pub fn greedy(&self, obs: &L::Obs) -> Result<Vec<TscAction>, AgentError> {
        Ok(select_actions(&self.learner.q_values(&self.online, obs, &mut Noise::Zero)?))
    }

    pub fn into_online(self) -> ParamSet {
        self.online
    }
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
    pub episode_rewards: Vec<f64>,
}

/// Target network of a configuration: loaded from file or generated.
pub fn target_network(cfg: &TrainConfig) -> Result<Arc<RoadNetwork>, AgentError> {
    Ok(Arc::new(match &cfg.network {
        Some(p) => load_network(p)?,
        None => generate_network(cfg.network_seed, &generation_params(cfg.intersections))?,
    }))
}

fn generation_params(n: usize) -> GenerationParams {
    if n == 0 {
        GenerationParams::default()
    } else {
        GenerationParams::with_intersections(n)
    }
}

/// Networks of each simulation for the configured training set.
/// Generalist networks come from seeds disjoint from the target's and are
/// checked to differ from it.
pub fn training_networks(cfg: &TrainConfig, target: &Arc<RoadNetwork>) -> Result<Vec<Arc<RoadNetwork>>, AgentError> {
    match cfg.training_set {
        TrainingSet::Specialist => Ok(vec![target.clone(); cfg.sims]),
        TrainingSet::Generalist => {
            let mut pool = Vec::with_capacity(cfg.generalist_networks);
            let mut k = 0u64;
            while pool.len() < cfg.generalist_networks {
                let seed = mix(cfg.network_seed, 0x6E7 + k);
                k += 1;
                let n = generate_network(seed, &GenerationParams::default())?;
                if n != **target {
                    pool.push(Arc::new(n));
                }
            }
            Ok((0..cfg.sims).map(|i| pool[i % pool.len()].clone()).collect())
        }
    }
}

/// Trains the shared graph model; writes periodic checkpoints to `out_dir`
/// when given.
pub fn train(cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome, AgentError> {
    let target = target_network(cfg)?;
    let nets = training_networks(cfg, &target)?;
    let learner = GraphLearner::new(ModelConfig::for_mode(cfg.mode), &nets);
    let mut trainer = Trainer::new(learner, cfg.clone(), nets)?;
    let mut saved = 0;
    while trainer.env_steps() < cfg.total_steps {
        trainer.round()?;
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && trainer.updates() / cfg.checkpoint_every > saved {
                saved = trainer.updates() / cfg.checkpoint_every;
                let p = trainer.learner().into_params(trainer.online().clone());
                save_params(&p, dir.join(format!("model_{:08}.bin", saved * cfg.checkpoint_every)))?;
            }
        }
    }
    let log = trainer.log().to_vec();
    let episode_rewards = trainer.episode_rewards().to_vec();
    let params = trainer.learner().into_params(trainer.online().clone());
    Ok(TrainOutcome { params, log, episode_rewards })
}
