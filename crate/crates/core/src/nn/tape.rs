//! Reverse-mode differentiation over a linear record of matrix operations.

use std::sync::Arc;

use super::matrix::{axpy, Matrix};
use super::params::{Gradients, ParamSet};
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    MatMulT(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    /// `out[d] += scale_k · x[s]` for the k-th pair `(s, d)`.
    Aggregate { src: usize, pairs: Arc<[(u32, u32)]>, scale: Option<Vec<f64>> },
    Relu(usize),
    Noisy { mu: usize, sigma: usize, eps: Matrix },
    Dueling { v: usize, a: usize },
    SelectRows { src: usize, rows: Vec<usize> },
    ConcatRows(Vec<usize>),
    /// Mean over rows of `½ (q[i, a_i] − y_i)²`.
    HalfSqErr { q: usize, actions: Vec<usize>, targets: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Forward record. A tape can be differentiated once.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest |input| over all ReLU nodes; small values mean a
    /// finite-difference probe may straddle a kink.
    pub fn relu_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(self.nodes[x].value.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn leaf(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn param(&mut self, set: &ParamSet, id: usize) -> Var {
        self.push(set.tensors[id].clone(), Op::Param(id))
    }

    pub fn matmul_t(&mut self, x: Var, w: Var) -> Var {
        let v = self.value(x).matmul_t(self.value(w));
        self.push(v, Op::MatMulT(x.0, w.0))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let mut v = self.value(x).clone();
        let bias = self.value(b);
        assert_eq!(bias.shape(), (1, v.cols()), "bias shape");
        for r in 0..v.rows() {
            axpy(v.row_mut(r), 1.0, bias.row(0));
        }
        self.push(v, Op::AddBias(x.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a.0, b.0))
    }

    /// Sums rows of `x` into `n_out` destination rows along `pairs`,
    /// optionally weighting each pair.
    pub fn aggregate(&mut self, x: Var, pairs: Arc<[(u32, u32)]>, n_out: usize, scale: Option<Vec<f64>>) -> Var {
        let src = self.value(x);
        let mut out = Matrix::zeros(n_out, src.cols());
        for (k, &(s, d)) in pairs.iter().enumerate() {
            let w = scale.as_ref().map_or(1.0, |sc| sc[k]);
            axpy(out.row_mut(d as usize), w, src.row(s as usize));
        }
        self.push(out, Op::Aggregate { src: x.0, pairs, scale })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut v = self.value(x).clone();
        v.data_mut().iter_mut().for_each(|e| *e = e.max(0.0));
        self.push(v, Op::Relu(x.0))
    }

    /// `mu + sigma ⊙ eps` with `eps` fixed.
    pub fn noisy(&mut self, mu: Var, sigma: Var, eps: Matrix) -> Var {
        let m = self.value(mu);
        let s = self.value(sigma);
        assert_eq!(m.shape(), eps.shape(), "noise shape");
        let data = m.data().iter().zip(s.data()).zip(eps.data()).map(|((m, s), e)| m + s * e).collect();
        let v = Matrix::new(m.rows(), m.cols(), data);
        self.push(v, Op::Noisy { mu: mu.0, sigma: sigma.0, eps })
    }

    /// `Q(a) = V + A(a) − mean(A)` row-wise; `v` is n×1, `a` is n×k.
    pub fn dueling(&mut self, v: Var, a: Var) -> Var {
        let vv = self.value(v);
        let av = self.value(a);
        assert_eq!(vv.shape(), (av.rows(), 1), "value stream shape");
        let mut q = Matrix::zeros(av.rows(), av.cols());
        for i in 0..av.rows() {
            let row = av.row(i);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            for (k, &x) in row.iter().enumerate() {
                q.set(i, k, vv.get(i, 0) + x - mean);
            }
        }
        self.push(q, Op::Dueling { v: v.0, a: a.0 })
    }

    pub fn select_rows(&mut self, x: Var, rows: Vec<usize>) -> Var {
        let src = self.value(x);
        let mut out = Matrix::zeros(rows.len(), src.cols());
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(src.row(r));
        }
        self.push(out, Op::SelectRows { src: x.0, rows })
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = parts.first().map_or(0, |p| self.value(*p).cols());
        let mut data = Vec::new();
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.cols(), cols, "concatenated parts need equal widths");
            data.extend_from_slice(m.data());
        }
        let rows = data.len() / cols.max(1);
        self.push(Matrix::new(rows, cols, data), Op::ConcatRows(parts.iter().map(|p| p.0).collect()))
    }

    pub fn half_sq_err(&mut self, q: Var, actions: Vec<usize>, targets: Vec<f64>) -> Var {
        let qv = self.value(q);
        assert_eq!(qv.rows(), actions.len(), "one action per row");
        assert_eq!(actions.len(), targets.len(), "one target per row");
        let n = actions.len().max(1) as f64;
        let loss: f64 = actions
            .iter()
            .zip(&targets)
            .enumerate()
            .map(|(i, (&a, &y))| 0.5 * (qv.get(i, a) - y).powi(2))
            .sum::<f64>()
            / n;
        self.push(Matrix::new(1, 1, vec![loss]), Op::HalfSqErr { q: q.0, actions, targets })
    }

    /// Gradients of the scalar `loss` w.r.t. every parameter in `params`.
    pub fn backward(&mut self, loss: Var, params: &ParamSet) -> Result<Gradients, NnError> {
        self.backward_with(loss, 1.0, params)
    }

    /// As [`Tape::backward`], seeding the output gradient with `upstream`.
    pub fn backward_with(&mut self, loss: Var, upstream: f64, params: &ParamSet) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::StaleTape);
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(NnError::Shape("loss must be a 1x1 matrix".into()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::new(1, 1, vec![upstream]));
        let mut out = params.zeros_like();

        fn acc(slot: &mut Option<Matrix>, g: Matrix) {
            match slot {
                Some(s) => s.add_assign(&g),
                None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(id) => out.tensors[*id].add_assign(&g),
                Op::MatMulT(x, w) => {
                    let dx = g.matmul(&self.nodes[*w].value);
                    let dw = g.t_matmul(&self.nodes[*x].value);
                    acc(&mut grads[*x], dx);
                    acc(&mut grads[*w], dw);
                }
                Op::AddBias(x, b) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        axpy(db.row_mut(0), 1.0, g.row(r));
                    }
                    acc(&mut grads[*b], db);
                    acc(&mut grads[*x], g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads[*a], g.clone());
                    acc(&mut grads[*b], g);
                }
                Op::Aggregate { src, pairs, scale } => {
                    let sv = &self.nodes[*src].value;
                    let mut dx = Matrix::zeros(sv.rows(), sv.cols());
                    for (k, &(s, d)) in pairs.iter().enumerate() {
                        let w = scale.as_ref().map_or(1.0, |sc| sc[k]);
                        axpy(dx.row_mut(s as usize), w, g.row(d as usize));
                    }
                    acc(&mut grads[*src], dx);
                }
                Op::Relu(x) => {
                    let y = &self.nodes[i].value;
                    let mut dx = g;
                    for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
                        if yv <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    acc(&mut grads[*x], dx);
                }
                Op::Noisy { mu, sigma, eps } => {
                    let ds = Matrix::new(
                        g.rows(),
                        g.cols(),
                        g.data().iter().zip(eps.data()).map(|(a, b)| a * b).collect(),
                    );
                    acc(&mut grads[*sigma], ds);
                    acc(&mut grads[*mu], g);
                }
                Op::Dueling { v, a } => {
                    let mut dv = Matrix::zeros(g.rows(), 1);
                    let mut da = Matrix::zeros(g.rows(), g.cols());
                    for r in 0..g.rows() {
                        let row = g.row(r);
                        let s: f64 = row.iter().sum();
                        let mean = s / row.len() as f64;
                        dv.set(r, 0, s);
                        for (k, &x) in row.iter().enumerate() {
                            da.set(r, k, x - mean);
                        }
                    }
                    acc(&mut grads[*v], dv);
                    acc(&mut grads[*a], da);
                }
                Op::SelectRows { src, rows } => {
                    let sv = &self.nodes[*src].value;
                    let mut dx = Matrix::zeros(sv.rows(), sv.cols());
                    for (k, &r) in rows.iter().enumerate() {
                        axpy(dx.row_mut(r), 1.0, g.row(k));
                    }
                    acc(&mut grads[*src], dx);
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let (r, c) = self.nodes[p].value.shape();
                        let part = Matrix::new(r, c, g.data()[start * c..(start + r) * c].to_vec());
                        start += r;
                        acc(&mut grads[p], part);
                    }
                }
                Op::HalfSqErr { q, actions, targets } => {
                    let qv = &self.nodes[*q].value;
                    let n = actions.len().max(1) as f64;
                    let up = g.get(0, 0);
                    let mut dq = Matrix::zeros(qv.rows(), qv.cols());
                    for (r, (&a, &y)) in actions.iter().zip(targets).enumerate() {
                        dq.set(r, a, up * (qv.get(r, a) - y) / n);
                    }
                    acc(&mut grads[*q], dq);
                }
            }
        }
        out.loss = self.value(loss).get(0, 0);
        Ok(out)
    }
}
