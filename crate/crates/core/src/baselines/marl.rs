//! Independent Q-learners: one MLP per intersection, trained with the same
//! machinery as the shared graph model. The input of an intersection is its
//! local lane-mode graph flattened in a fixed order (lane lengths dropped,
//! since they never change on a given network), which ties the parameters
//! to one network.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{select_actions, target_network, AgentError, Learner, LogRow, TrainConfig, Trainer, TrainingSet};
use crate::eval::{EvalError, Policy};
use crate::graphenc::{FeatureScaling, GraphEncoder, GraphMode, NodeType};
use crate::nn::checkpoint::{put_tensors, Reader};
use crate::nn::{push_dueling_head, q_head, HeadIndex, Matrix, Noise, NnError, ParamSet, Tape, Var};
use crate::scenario::{network_to_string, ConnectionId, RoadNetwork, TscId};
use crate::sim::{SimState, TscAction};

pub const MARL_HIDDEN: [usize; 3] = [256, 128, 64];
/// Three weight/bias pairs, then the eight head tensors.
const TENSORS_PER_TSC: usize = 2 * MARL_HIDDEN.len() + 8;
const MAGIC: &[u8; 8] = b"IGRLMARL";

/// FNV-1a over the network's text form.
fn fingerprint(net: &RoadNetwork) -> u64 {
    network_to_string(net).bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

pub struct MarlLearner {
    encoder: GraphEncoder,
    connections: Vec<Vec<ConnectionId>>,
    fingerprint: u64,
}

impl MarlLearner {
    pub fn new(net: Arc<RoadNetwork>) -> Self {
        let connections = (0..net.tsc_count()).map(|t| net.tsc_connections(TscId(t))).collect();
        let fingerprint = fingerprint(&net);
        Self { encoder: GraphEncoder::new(net, GraphMode::Lane, FeatureScaling::default()), connections, fingerprint }
    }

    /// Input width of each intersection's network.
    pub fn input_widths(&self) -> Vec<usize> {
        self.connections.iter().map(|c| 1 + 8 * c.len()).collect()
    }

    /// Per intersection: its own feature, then for every controlled
    /// connection its four features and the count/speed of its entry and
    /// exit lanes.
    pub fn features(&self, state: &SimState) -> Vec<Vec<f64>> {
        let g = self.encoder.encode(state);
        let f = &g.input.features;
        let (tsc, conn, lane) = (&f[NodeType::Tsc as usize], &f[NodeType::Connection as usize], &f[NodeType::Lane as usize]);
        let net = self.encoder.network();
        self.connections
            .iter()
            .enumerate()
            .map(|(t, cs)| {
                let mut v = Vec::with_capacity(1 + 8 * cs.len());
                v.extend_from_slice(tsc.row(t));
                for &c in cs {
                    let cn = &net.connections[c.index()];
                    v.extend_from_slice(conn.row(c.index()));
                    v.extend_from_slice(&lane.row(cn.from_lane.index())[1..]);
                    v.extend_from_slice(&lane.row(cn.to_lane.index())[1..]);
                }
                v
            })
            .collect()
    }

    pub fn into_params(&self, set: ParamSet) -> MarlParams {
        MarlParams { fingerprint: self.fingerprint, inputs: self.input_widths(), set }
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect())
}

impl Learner for MarlLearner {
    type Obs = Vec<Vec<f64>>;

    fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamSet {
        let mut set = ParamSet::default();
        for (t, &input) in self.input_widths().iter().enumerate() {
            let mut fan_in = input;
            for (k, &width) in MARL_HIDDEN.iter().enumerate() {
                let bound = 1.0 / (fan_in as f64).sqrt();
                set.push(format!("marl.{t}.{k}.w"), uniform(rng, width, fan_in, bound));
                set.push(format!("marl.{t}.{k}.b"), uniform(rng, 1, width, bound));
                fan_in = width;
            }
            let start = push_dueling_head(&mut set, fan_in, rng).0;
            for name in &mut set.names[start..] {
                *name = format!("marl.{t}.{name}");
            }
        }
        set
    }

    fn observe(&self, _env: usize, state: &SimState) -> Self::Obs {
        self.features(state)
    }

    fn controllers(&self, obs: &Self::Obs) -> usize {
        obs.len()
    }

    fn batch_forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        items: &[(&Self::Obs, usize)],
        noise: &mut Noise<'_>,
    ) -> Result<Var, NnError> {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &(_, t)) in items.iter().enumerate() {
            groups.entry(t).or_default().push(i);
        }
        let mut parts = Vec::with_capacity(groups.len());
        let mut order = Vec::with_capacity(items.len());
        for (&t, idx) in &groups {
            let base = t * TENSORS_PER_TSC;
            let width = params.tensors[base].cols();
            let mut data = Vec::with_capacity(idx.len() * width);
            for &i in idx {
                let row = &items[i].0[t];
                if row.len() != width {
                    return Err(NnError::Shape(format!("intersection {t}: {} inputs, expected {width}", row.len())));
                }
                data.extend_from_slice(row);
            }
            let mut h = tape.leaf(Matrix::new(idx.len(), width, data));
            for k in 0..MARL_HIDDEN.len() {
                let w = tape.param(params, base + 2 * k);
                let b = tape.param(params, base + 2 * k + 1);
                let z = tape.matmul_t(h, w);
                let z = tape.add_bias(z, b);
                h = tape.relu(z);
            }
            parts.push(q_head(tape, params, HeadIndex(base + 2 * MARL_HIDDEN.len()), h, noise));
            order.extend_from_slice(idx);
        }
        let stacked = tape.concat_rows(&parts);
        let mut position = vec![0; items.len()];
        for (p, &i) in order.iter().enumerate() {
            position[i] = p;
        }
        Ok(tape.select_rows(stacked, position))
    }
}

/// Parameters of every intersection of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct MarlParams {
    pub fingerprint: u64,
    pub inputs: Vec<usize>,
    pub set: ParamSet,
}

impl MarlParams {
    /// Number of per-intersection parameter sets.
    pub fn intersections(&self) -> usize {
        self.inputs.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&self.fingerprint.to_le_bytes());
        out.extend_from_slice(&(self.inputs.len() as u32).to_le_bytes());
        for &i in &self.inputs {
            out.extend_from_slice(&(i as u32).to_le_bytes());
        }
        put_tensors(&mut out, &self.set);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(NnError::Checkpoint("not a MARL parameter file".into()));
        }
        let fingerprint = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let n = r.u32()?;
        let inputs = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let set = r.tensors()?;
        if r.pos != buf.len() {
            return Err(NnError::Checkpoint("trailing bytes".into()));
        }
        if set.len() != n * TENSORS_PER_TSC {
            return Err(NnError::Checkpoint(format!("{} tensors for {n} intersections", set.len())));
        }
        Ok(Self { fingerprint, inputs, set })
    }
}

pub fn save_marl(p: &MarlParams, path: impl AsRef<Path>) -> Result<(), NnError> {
    std::fs::write(path, p.to_bytes())?;
    Ok(())
}

pub fn load_marl(path: impl AsRef<Path>) -> Result<MarlParams, NnError> {
    MarlParams::from_bytes(&std::fs::read(path)?)
}

/// Greedy acting with per-intersection parameters; refuses other networks.
#[derive(Clone)]
pub struct MarlPolicy {
    pub label: String,
    pub params: MarlParams,
    learner: Option<Arc<MarlLearner>>,
}

impl MarlPolicy {
    pub fn new(label: impl Into<String>, params: MarlParams) -> Self {
        Self { label: label.into(), params, learner: None }
    }
}

impl Policy for MarlPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn prepare(&mut self, net: &Arc<RoadNetwork>) -> Result<(), EvalError> {
        if fingerprint(net) != self.params.fingerprint {
            return Err(EvalError::NetworkSpecific);
        }
        if self.learner.is_none() {
            self.learner = Some(Arc::new(MarlLearner::new(net.clone())));
        }
        Ok(())
    }

    fn act(&mut self, state: &SimState) -> Result<Vec<TscAction>, EvalError> {
        let l = self.learner.as_ref().ok_or(EvalError::NetworkSpecific)?;
        let obs = l.features(state);
        Ok(select_actions(&l.q_values(&self.params.set, &obs, &mut Noise::Zero)?))
    }
}

/// Trains one MLP per intersection of the configured target network.
pub fn marl_train(cfg: &TrainConfig) -> Result<(MarlParams, Vec<LogRow>, Vec<f64>), AgentError> {
    if cfg.training_set != TrainingSet::Specialist {
        return Err(AgentError::Config("MARL parameters are network-specific; use the specialist set".into()));
    }
    let net = target_network(cfg)?;
    let learner = MarlLearner::new(net.clone());
    let mut trainer = Trainer::new(learner, cfg.clone(), vec![net; cfg.sims])?;
    trainer.run_until(cfg.total_steps, |_| {})?;
    let params = trainer.learner().into_params(trainer.online().clone());
    Ok((params, trainer.log().to_vec(), trainer.episode_rewards().to_vec()))
}
