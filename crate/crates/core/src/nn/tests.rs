use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graphenc::{encode, GraphMode};

fn pairs(v: &[(u32, u32)]) -> Arc<[(u32, u32)]> {
    Arc::from(v.to_vec())
}

fn custom(schema: GraphSchema, layers: usize, hidden: usize, seed: u64) -> ModelParams {
    ModelParams::init(ModelConfig::custom(schema, layers, hidden), &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn single_node_identity_layer() {
    let schema = GraphSchema { node_widths: vec![2], edge_types: vec![(0, 0)], readout: 0 };
    let mut p = custom(schema, 1, 2, 0);
    p.set.tensors[0] = Matrix::identity(2);
    let g = GraphInput { features: vec![Matrix::new(1, 2, vec![1.0, -2.0])], edges: vec![pairs(&[(0, 0)])] };
    let mut t = Tape::new();
    let e = rgcn_forward(&mut t, &p, &g).unwrap();
    assert_eq!(t.value(e).data(), &[1.0, 0.0]);
}

#[test]
fn two_nodes_sum_messages() {
    // node 0 = A, node 1 = B; A→B edge type plus self-loops
    let schema = GraphSchema { node_widths: vec![2], edge_types: vec![(0, 0), (0, 0)], readout: 0 };
    let mut p = custom(schema, 1, 2, 0);
    p.set.tensors[0] = Matrix::identity(2);
    p.set.tensors[1] = Matrix::identity(2);
    let g = GraphInput {
        features: vec![Matrix::from_rows(&[vec![0.5, -3.0], vec![1.0, 1.0]])],
        edges: vec![pairs(&[(0, 0), (1, 1)]), pairs(&[(0, 1)])],
    };
    let mut t = Tape::new();
    let e = rgcn_forward(&mut t, &p, &g).unwrap();
    assert_eq!(t.value(e).row(1), &[1.5, 0.0]);
}

#[test]
fn width_mismatch_is_an_error() {
    let schema = GraphSchema { node_widths: vec![2], edge_types: vec![(0, 0)], readout: 0 };
    let p = custom(schema, 1, 2, 0);
    let g = GraphInput { features: vec![Matrix::zeros(1, 3)], edges: vec![pairs(&[(0, 0)])] };
    assert!(matches!(rgcn_forward(&mut Tape::new(), &p, &g), Err(NnError::Shape(_))));
}

/// Straightforward evaluation: every layer for every node of every type,
/// one explicit message per edge.
fn reference_q(p: &ModelParams, g: &GraphInput) -> Vec<[f64; 2]> {
    let cfg = &p.config;
    let sch = &cfg.schema;
    let mut h: Vec<Vec<Vec<f64>>> =
        g.features.iter().map(|f| (0..f.rows()).map(|r| f.row(r).to_vec()).collect()).collect();
    for l in 0..cfg.layers {
        let mut next: Vec<Vec<Vec<f64>>> = h.iter().map(|rows| vec![vec![0.0; cfg.hidden]; rows.len()]).collect();
        for (e, &(s, d)) in sch.edge_types.iter().enumerate() {
            let w = &p.set.tensors[l * sch.edge_types.len() + e];
            for &(j, i) in g.edges[e].iter() {
                let x = &h[s][j as usize];
                for o in 0..cfg.hidden {
                    let mut m = 0.0;
                    for k in 0..x.len() {
                        m += w.get(o, k) * x[k];
                    }
                    next[d][i as usize][o] += m;
                }
            }
        }
        for rows in &mut next {
            for r in rows {
                r.iter_mut().for_each(|x| *x = x.max(0.0));
            }
        }
        h = next;
    }
    let head = p.head().0;
    let t = |k: usize| &p.set.tensors[head + k];
    h[sch.readout]
        .iter()
        .map(|x| {
            let lin = |w: &Matrix, b: &Matrix, o: usize| b.get(0, o) + (0..x.len()).map(|k| w.get(o, k) * x[k]).sum::<f64>();
            let v = lin(t(0), t(2), 0);
            let a = [lin(t(4), t(6), 0), lin(t(4), t(6), 1)];
            let mean = (a[0] + a[1]) / 2.0;
            [v + a[0] - mean, v + a[1] - mean]
        })
        .collect()
}

#[test]
fn matches_reference_on_single_connection_fixture() {
    let s = crate::graphenc::tests::three_vehicle_state();
    for mode in [GraphMode::Vehicle, GraphMode::Lane] {
        let g = encode(&s, mode);
        let p = ModelParams::init(ModelConfig::for_mode(mode), &mut ChaCha8Rng::seed_from_u64(0));
        let q = q_values(&p, &g.input, &mut Noise::Zero).unwrap();
        let r = reference_q(&p, &g.input);
        for (i, row) in r.iter().enumerate() {
            for k in 0..2 {
                assert!((q.get(i, k) - row[k]).abs() < 1e-10, "{mode:?}");
            }
        }
    }
}

#[test]
fn zero_sigma_sampled_equals_zero_noise() {
    let s = crate::graphenc::tests::three_vehicle_state();
    let g = encode(&s, GraphMode::Lane);
    let mut p = ModelParams::init(ModelConfig::for_mode(GraphMode::Lane), &mut ChaCha8Rng::seed_from_u64(1));
    for (name, t) in p.set.names.iter().zip(p.set.tensors.iter_mut()) {
        if name.ends_with("sigma") {
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    assert_eq!(
        q_values(&p, &g.input, &mut Noise::Sampled(&mut rng)).unwrap(),
        q_values(&p, &g.input, &mut Noise::Zero).unwrap()
    );
}

fn random_graph(rng: &mut ChaCha8Rng, schema: &GraphSchema, max_nodes: usize) -> GraphInput {
    let n_types = schema.node_widths.len();
    let mut counts = vec![1usize; n_types];
    for _ in n_types..max_nodes {
        if rng.random_bool(0.7) {
            counts[rng.random_range(0..n_types)] += 1;
        }
    }
    let features = (0..n_types)
        .map(|t| {
            let w = schema.node_widths[t];
            Matrix::new(counts[t], w, (0..counts[t] * w).map(|_| rng.random_range(-1.0..1.0)).collect())
        })
        .collect();
    let edges = schema
        .edge_types
        .iter()
        .map(|&(s, d)| {
            let mut v = Vec::new();
            for a in 0..counts[s] {
                for b in 0..counts[d] {
                    if (s == d && a == b) || (s != d && rng.random_bool(0.5)) {
                        v.push((a as u32, b as u32));
                    }
                }
            }
            Arc::from(v)
        })
        .collect();
    GraphInput { features, edges }
}

fn td_loss(p: &ModelParams, g: &GraphInput, eps_seed: u64, targets: &[f64]) -> (Tape, Var) {
    let mut t = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(eps_seed);
    let q = forward(&mut t, p, g, &mut Noise::Sampled(&mut rng)).unwrap();
    let n = t.value(q).rows();
    let actions: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let l = t.half_sq_err(q, actions, targets[..n].to_vec());
    (t, l)
}

#[test]
fn gradients_match_finite_differences() {
    let schema = GraphMode::Lane.schema();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut checked = 0;
    while checked < 3 {
        let g = random_graph(&mut rng, &schema, 10);
        let mut cfg = ModelConfig::for_mode(GraphMode::Lane);
        cfg.hidden = 4;
        cfg.normalize = checked == 1;
        let mut p = ModelParams::init(cfg, &mut rng);
        for t in p.set.tensors.iter_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= 3.0);
        }
        let targets: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (mut tape, l) = td_loss(&p, &g, 5, &targets);
        if tape.relu_margin() < 1e-3 {
            continue;
        }
        let grads = tape.backward(l, &p.set).unwrap();
        let h = 1e-5;
        for k in 0..p.set.len() {
            for i in 0..p.set.tensors[k].data().len() {
                let orig = p.set.tensors[k].data()[i];
                p.set.tensors[k].data_mut()[i] = orig + h;
                let (t1, l1) = td_loss(&p, &g, 5, &targets);
                p.set.tensors[k].data_mut()[i] = orig - h;
                let (t2, l2) = td_loss(&p, &g, 5, &targets);
                p.set.tensors[k].data_mut()[i] = orig;
                let num = (t1.value(l1).get(0, 0) - t2.value(l2).get(0, 0)) / (2.0 * h);
                let ana = grads.tensors[k].data()[i];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(rel < 1e-4, "{} [{i}]: analytic {ana} numeric {num}", p.set.names[k]);
            }
        }
        checked += 1;
    }
}

#[test]
fn node_permutation_leaves_embeddings_unchanged() {
    let schema = GraphMode::Vehicle.schema();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_graph(&mut rng, &schema, 12);
    let p = ModelParams::init(ModelConfig::for_mode(GraphMode::Vehicle), &mut rng);
    // reverse the node order within every type
    let perm: Vec<Vec<u32>> = g.features.iter().map(|f| (0..f.rows() as u32).rev().collect()).collect();
    let features = g
        .features
        .iter()
        .map(|f| {
            let rows: Vec<Vec<f64>> = (0..f.rows()).rev().map(|r| f.row(r).to_vec()).collect();
            Matrix::new(f.rows(), f.cols(), rows.concat())
        })
        .collect();
    let edges = schema
        .edge_types
        .iter()
        .zip(&g.edges)
        .map(|(&(s, d), e)| {
            let mut v: Vec<(u32, u32)> = e.iter().map(|&(a, b)| (perm[s][a as usize], perm[d][b as usize])).collect();
            v.reverse();
            Arc::from(v)
        })
        .collect();
    let pg = GraphInput { features, edges };
    let a = q_values(&p, &g, &mut Noise::Zero).unwrap();
    let b = q_values(&p, &pg, &mut Noise::Zero).unwrap();
    let n = a.rows();
    for i in 0..n {
        for k in 0..2 {
            assert!((a.get(i, k) - b.get(n - 1 - i, k)).abs() < 1e-12);
        }
    }
}

#[test]
fn checkpoint_round_trip_and_mode_check() {
    let p = ModelParams::init(ModelConfig::for_mode(GraphMode::Lane), &mut ChaCha8Rng::seed_from_u64(2));
    let bytes = params_to_bytes(&p);
    assert_eq!(params_from_bytes(&bytes, Some(GraphMode::Lane)).unwrap(), p);
    assert!(matches!(params_from_bytes(&bytes, Some(GraphMode::Vehicle)), Err(NnError::ModeMismatch { .. })));
    assert!(params_from_bytes(&bytes[..bytes.len() - 3], None).is_err());
    assert!(params_from_bytes(b"garbage!", None).is_err());
}

#[test]
fn parameter_count_is_fixed_per_mode() {
    let p = ModelParams::init(ModelConfig::for_mode(GraphMode::Lane), &mut ChaCha8Rng::seed_from_u64(2));
    // 9 edge types × (32×w) for layer 0, 9 × 32×32 for layer 1, plus head
    let l0: usize = GraphMode::Lane.schema().edge_types.iter().map(|&(s, _)| 32 * [1, 4, 3][s]).sum();
    let head = 2 * (32 + 1) + 2 * (64 + 2);
    assert_eq!(p.set.scalar_count(), l0 + 9 * 32 * 32 + head);
}
