//! Relational graph-convolutional Q-network.
//!
//! Each layer computes `n_i' = relu(Σ_e Σ_{j ∈ N_e(i)} W_{l,e} n_j)`; the
//! final embeddings of the readout node type feed a dueling head whose two
//! linear streams have noisy weights `μ + σ ⊙ ε`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::{GraphInput, GraphSchema};
use super::matrix::Matrix;
use super::params::ParamSet;
use super::tape::{Tape, Var};
use super::NnError;
use crate::graphenc::{FeatureScaling, GraphMode};

pub const HIDDEN_WIDTH: usize = 32;
pub const SIGMA_INIT: f64 = 0.017;
pub const N_ACTIONS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// `None` for hand-built schemas that do not correspond to an encoder
    /// mode.
    pub mode: Option<GraphMode>,
    pub schema: GraphSchema,
    pub layers: usize,
    pub hidden: usize,
    /// Divide messages by the per-(node, edge type) in-degree.
    pub normalize: bool,
    pub scaling: FeatureScaling,
}

impl ModelConfig {
    pub fn for_mode(mode: GraphMode) -> Self {
        Self {
            mode: Some(mode),
            schema: mode.schema(),
            layers: mode.gcn_layers(),
            hidden: HIDDEN_WIDTH,
            normalize: false,
            scaling: FeatureScaling::default(),
        }
    }

    pub fn custom(schema: GraphSchema, layers: usize, hidden: usize) -> Self {
        Self { mode: None, schema, layers, hidden, normalize: false, scaling: FeatureScaling::default() }
    }

    pub fn gcn_index(&self, layer: usize, edge_type: usize) -> usize {
        layer * self.schema.edge_types.len() + edge_type
    }

    pub fn head(&self) -> HeadIndex {
        HeadIndex(self.layers * self.schema.edge_types.len())
    }

    /// Node types whose representation is needed after each layer,
    /// `needed[l][t]` for `l` in `0..=layers`.
    pub fn needed_types(&self) -> Vec<Vec<bool>> {
        let n = self.schema.node_widths.len();
        let mut need = vec![vec![false; n]; self.layers + 1];
        need[self.layers][self.schema.readout] = true;
        for l in (1..=self.layers).rev() {
            for &(s, d) in &self.schema.edge_types {
                if need[l][d] {
                    need[l - 1][s] = true;
                }
            }
        }
        need
    }
}

/// Trainable tensors: one weight per (layer, edge type), then the head.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub set: ParamSet,
}

/// Parameter indices of a dueling noisy head, in storage order.
#[derive(Clone, Copy, Debug)]
pub struct HeadIndex(pub usize);

impl HeadIndex {
    const V_W_MU: usize = 0;
    const V_W_SIGMA: usize = 1;
    const V_B_MU: usize = 2;
    const V_B_SIGMA: usize = 3;
    const A_W_MU: usize = 4;
    const A_W_SIGMA: usize = 5;
    const A_B_MU: usize = 6;
    const A_B_SIGMA: usize = 7;
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect())
}

/// Appends a dueling head mapping `input` features to [`N_ACTIONS`]
/// Q-values; μ ~ U(±1/√input), σ = [`SIGMA_INIT`].
pub fn push_dueling_head(set: &mut ParamSet, input: usize, rng: &mut impl Rng) -> HeadIndex {
    let start = set.len();
    let bound = 1.0 / (input as f64).sqrt();
    for (stream, out) in [("v", 1), ("a", N_ACTIONS)] {
        set.push(format!("head.{stream}.w.mu"), uniform(rng, out, input, bound));
        set.push(format!("head.{stream}.w.sigma"), Matrix::filled(out, input, SIGMA_INIT));
        set.push(format!("head.{stream}.b.mu"), uniform(rng, 1, out, bound));
        set.push(format!("head.{stream}.b.sigma"), Matrix::filled(1, out, SIGMA_INIT));
    }
    HeadIndex(start)
}

impl ModelParams {
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Self {
        let mut set = ParamSet::default();
        for l in 0..config.layers {
            for (e, &(s, _)) in config.schema.edge_types.iter().enumerate() {
                let input = if l == 0 { config.schema.node_widths[s] } else { config.hidden };
                let bound = 1.0 / (input.max(1) as f64).sqrt();
                set.push(format!("gcn.{l}.{e}"), uniform(rng, config.hidden, input, bound));
            }
        }
        push_dueling_head(&mut set, config.hidden, rng);
        Self { config, set }
    }

    pub fn gcn_index(&self, layer: usize, edge_type: usize) -> usize {
        self.config.gcn_index(layer, edge_type)
    }

    pub fn head(&self) -> HeadIndex {
        self.config.head()
    }
}

/// Exploration noise for the head's weights.
pub enum Noise<'a> {
    Zero,
    Sampled(&'a mut ChaCha8Rng),
}

fn noise_matrix(noise: &mut Noise<'_>, rows: usize, cols: usize) -> Matrix {
    match noise {
        Noise::Zero => Matrix::zeros(rows, cols),
        Noise::Sampled(rng) => {
            Matrix::new(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(&mut **rng)).collect())
        }
    }
}

/// Readout-type embeddings after all layers.
pub fn rgcn_forward(tape: &mut Tape, params: &ModelParams, g: &GraphInput) -> Result<Var, NnError> {
    rgcn_forward_with(tape, &params.config, &params.set, g)
}

/// As [`rgcn_forward`] with the configuration and tensors given apart, so
/// several tensor sets (online, target) can share one configuration.
pub fn rgcn_forward_with(tape: &mut Tape, cfg: &ModelConfig, set: &ParamSet, g: &GraphInput) -> Result<Var, NnError> {
    let schema = &cfg.schema;
    g.check(schema)?;
    let need = cfg.needed_types();
    let n_types = schema.node_widths.len();
    let mut h: Vec<Option<Var>> =
        (0..n_types).map(|t| need[0][t].then(|| tape.leaf(g.features[t].clone()))).collect();
    for l in 1..=cfg.layers {
        let mut next = vec![None; n_types];
        for t in (0..n_types).filter(|&t| need[l][t]) {
            let n_out = g.count(t);
            let mut acc: Option<Var> = None;
            for (e, &(s, _)) in schema.edge_types.iter().enumerate().filter(|(_, &(_, d))| d == t) {
                let src = h[s].expect("source type computed for the previous layer");
                let scale = cfg.normalize.then(|| in_degree_scale(&g.edges[e], n_out));
                let m = tape.aggregate(src, g.edges[e].clone(), n_out, scale);
                let w = tape.param(set, cfg.gcn_index(l - 1, e));
                let y = tape.matmul_t(m, w);
                acc = Some(match acc {
                    None => y,
                    Some(a) => tape.add(a, y),
                });
            }
            let z = acc.unwrap_or_else(|| tape.leaf(Matrix::zeros(n_out, cfg.hidden)));
            next[t] = Some(tape.relu(z));
        }
        h = next;
    }
    Ok(h[schema.readout].expect("readout type computed"))
}

fn in_degree_scale(pairs: &[(u32, u32)], n_out: usize) -> Vec<f64> {
    let mut deg = vec![0usize; n_out];
    for &(_, d) in pairs {
        deg[d as usize] += 1;
    }
    pairs.iter().map(|&(_, d)| 1.0 / deg[d as usize] as f64).collect()
}

/// Dueling Q-values (one row per embedding row, columns PROLONG, SWITCH).
pub fn q_head(tape: &mut Tape, set: &ParamSet, head: HeadIndex, emb: Var, noise: &mut Noise<'_>) -> Var {
    let mut noisy = |tape: &mut Tape, mu: usize, sigma: usize| {
        let (r, c) = set.tensors[head.0 + mu].shape();
        let eps = noise_matrix(noise, r, c);
        let m = tape.param(set, head.0 + mu);
        let s = tape.param(set, head.0 + sigma);
        tape.noisy(m, s, eps)
    };
    let vw = noisy(tape, HeadIndex::V_W_MU, HeadIndex::V_W_SIGMA);
    let vb = noisy(tape, HeadIndex::V_B_MU, HeadIndex::V_B_SIGMA);
    let aw = noisy(tape, HeadIndex::A_W_MU, HeadIndex::A_W_SIGMA);
    let ab = noisy(tape, HeadIndex::A_B_MU, HeadIndex::A_B_SIGMA);
    let v = tape.matmul_t(emb, vw);
    let v = tape.add_bias(v, vb);
    let a = tape.matmul_t(emb, aw);
    let a = tape.add_bias(a, ab);
    tape.dueling(v, a)
}

/// Full forward pass: graph embeddings then Q-values per readout node.
pub fn forward(tape: &mut Tape, params: &ModelParams, g: &GraphInput, noise: &mut Noise<'_>) -> Result<Var, NnError> {
    let emb = rgcn_forward(tape, params, g)?;
    Ok(q_head(tape, &params.set, params.head(), emb, noise))
}

/// Q-values without keeping the tape.
pub fn q_values(params: &ModelParams, g: &GraphInput, noise: &mut Noise<'_>) -> Result<Matrix, NnError> {
    let mut tape = Tape::new();
    let q = forward(&mut tape, params, g, noise)?;
    Ok(tape.value(q).clone())
}
