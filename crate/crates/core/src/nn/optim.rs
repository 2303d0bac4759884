use super::matrix::Matrix;
use super::params::{Gradients, ParamSet};
use super::NnError;

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_CLIP_NORM: f64 = 10.0;

/// Adam with global-norm gradient clipping.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = || params.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: Some(DEFAULT_CLIP_NORM), t: 0, m: zeros(), v: zeros() }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// Applies one update; returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<f64, NnError> {
        if grads.tensors.len() != params.tensors.len()
            || grads.tensors.iter().zip(&params.tensors).any(|(g, p)| g.shape() != p.shape())
        {
            return Err(NnError::Shape("gradients do not match parameters".into()));
        }
        if !grads.is_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        let norm = grads.global_norm();
        let scale = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params.tensors.iter_mut().zip(&grads.tensors).zip(self.m.iter_mut().zip(&mut self.v)) {
            for (((pi, &gi), mi), vi) in
                p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut()).zip(v.data_mut().iter_mut())
            {
                let gi = gi * scale;
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                *pi -= self.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + self.eps);
            }
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> ParamSet {
        let mut s = ParamSet::default();
        s.push("x", Matrix::new(1, 1, vec![x]));
        s
    }

    fn grad(g: f64) -> Gradients {
        Gradients { tensors: vec![Matrix::new(1, 1, vec![g])], loss: 0.0 }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(1.5);
        let mut opt = Adam::new(&p, 0.001);
        opt.step(&mut p, &grad(0.0)).unwrap();
        assert_eq!(p.tensors[0].data(), &[1.5]);
        assert_eq!(opt.timestep(), 1);
    }

    #[test]
    fn positive_gradient_decreases_monotonically() {
        let mut p = scalar(0.0);
        let mut opt = Adam::new(&p, 0.001);
        let mut last = 0.0;
        for _ in 0..20 {
            opt.step(&mut p, &grad(1.0)).unwrap();
            let x = p.tensors[0].get(0, 0);
            assert!(x < last);
            last = x;
        }
    }

    #[test]
    fn non_finite_gradient_fails() {
        let mut p = scalar(0.0);
        let mut opt = Adam::new(&p, 0.001);
        assert!(matches!(opt.step(&mut p, &grad(f64::NAN)), Err(NnError::NonFiniteGradient)));
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = scalar(0.3);
            let mut opt = Adam::new(&p, 0.01);
            for k in 0..10 {
                opt.step(&mut p, &grad((k as f64).sin() * 30.0)).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
