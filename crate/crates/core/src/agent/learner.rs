use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::graphenc::{GraphEncoder, ObservationGraph};
use crate::nn::{q_head, rgcn_forward_with, GraphInput, Matrix, ModelConfig, ModelParams, Noise, NnError, ParamSet, Tape, Var};
use crate::scenario::RoadNetwork;
use crate::sim::SimState;

/// Function approximator plugged into the trainer: turns simulation states
/// into observations and observations into per-controller Q-values.
pub trait Learner: Sync {
    type Obs: Send + Sync;

    fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamSet;

    /// Observation of environment `env`.
    fn observe(&self, env: usize, state: &SimState) -> Self::Obs;

    /// Q-values, one row per controller.
    fn q_values(&self, params: &ParamSet, obs: &Self::Obs, noise: &mut Noise<'_>) -> Result<Matrix, NnError> {
        let mut tape = Tape::new();
        let n = self.controllers(obs);
        let items: Vec<(&Self::Obs, usize)> = (0..n).map(|j| (obs, j)).collect();
        let q = self.batch_forward(&mut tape, params, &items, noise)?;
        Ok(tape.value(q).clone())
    }

    fn controllers(&self, obs: &Self::Obs) -> usize;

    /// Q-value rows for `(observation, controller)` items, recorded on
    /// `tape`.
    fn batch_forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        items: &[(&Self::Obs, usize)],
        noise: &mut Noise<'_>,
    ) -> Result<Var, NnError>;
}

/// The shared relational graph network; one encoder per environment.
pub struct GraphLearner {
    pub config: ModelConfig,
    encoders: Vec<GraphEncoder>,
}

impl GraphLearner {
    pub fn new(config: ModelConfig, networks: &[Arc<RoadNetwork>]) -> Self {
        let mode = config.mode.expect("graph learner needs an encoder mode");
        let encoders = networks.iter().map(|n| GraphEncoder::new(n.clone(), mode, config.scaling)).collect();
        Self { config, encoders }
    }

    pub fn into_params(&self, set: ParamSet) -> ModelParams {
        ModelParams { config: self.config.clone(), set }
    }
}

impl Learner for GraphLearner {
    type Obs = ObservationGraph;

    fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamSet {
        ModelParams::init(self.config.clone(), rng).set
    }

    fn observe(&self, env: usize, state: &SimState) -> ObservationGraph {
        self.encoders[env].encode(state)
    }

    fn controllers(&self, obs: &ObservationGraph) -> usize {
        obs.tsc_ids.len()
    }

    fn q_values(&self, params: &ParamSet, obs: &ObservationGraph, noise: &mut Noise<'_>) -> Result<Matrix, NnError> {
        let mut tape = Tape::new();
        let emb = rgcn_forward_with(&mut tape, &self.config, params, &obs.input)?;
        let q = q_head(&mut tape, params, self.config.head(), emb, noise);
        Ok(tape.value(q).clone())
    }

    fn batch_forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        items: &[(&ObservationGraph, usize)],
        noise: &mut Noise<'_>,
    ) -> Result<Var, NnError> {
        // each distinct observation enters the union once
        let mut parts: Vec<&GraphInput> = Vec::new();
        let mut slot = Vec::with_capacity(items.len());
        for (obs, _) in items {
            let k = match parts.iter().position(|p| std::ptr::eq(*p, &obs.input)) {
                Some(k) => k,
                None => {
                    parts.push(&obs.input);
                    parts.len() - 1
                }
            };
            slot.push(k);
        }
        let (union, offsets) = GraphInput::union(&self.config.schema, &parts);
        let readout = self.config.schema.readout;
        let rows = items.iter().zip(&slot).map(|((_, j), &k)| offsets[k][readout] + j).collect();
        let emb = rgcn_forward_with(tape, &self.config, params, &union)?;
        let emb = tape.select_rows(emb, rows);
        Ok(q_head(tape, params, self.config.head(), emb, noise))
    }
}
