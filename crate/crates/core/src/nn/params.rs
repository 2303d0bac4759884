use super::matrix::Matrix;

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Matrix>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, m: Matrix) -> usize {
        self.names.push(name.into());
        self.tensors.push(m);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }

    pub(crate) fn zeros_like(&self) -> Gradients {
        Gradients {
            tensors: self.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect(),
            loss: 0.0,
        }
    }
}

/// Parameter gradients, shape-congruent with a [`ParamSet`], plus the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Matrix>,
    pub loss: f64,
}

impl Gradients {
    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(|t| t.sum_sq()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.is_finite())
    }
}
