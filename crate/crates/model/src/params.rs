//! Named parameter tensors with gradient buffers.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    /// Frozen parameters receive no gradient and are skipped by optimizers.
    pub frozen: bool,
    /// Excluded from weight decay (norm gains and biases).
    pub no_decay: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Array2<f64>, no_decay: bool) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param {
            name: name.into(),
            value,
            grad,
            frozen: false,
            no_decay,
        }
    }

    pub fn normal(name: &str, rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("valid std");
        let value = Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng));
        Param::new(name, value, false)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    pub params: Vec<Param>,
}

impl ParamStore {
    pub fn push(&mut self, p: Param) -> usize {
        self.params.push(p);
        self.params.len() - 1
    }

    pub fn get(&self, i: usize) -> &Param {
        &self.params[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn n_trainable(&self) -> usize {
        self.params.iter().filter(|p| !p.frozen).map(Param::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    /// Global L2 norm of the trainable gradients.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| !p.frozen)
            .map(|p| p.grad.iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}
