use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::Gradients;
use super::PolicyError;

/// Named parameter tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Array2<f64>>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Array2<f64>) -> usize {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(value);
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    /// Glorot-uniform initialized `rows x cols` weight.
    pub fn glorot(&mut self, name: &str, rows: usize, cols: usize, rng: &mut impl Rng) -> usize {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a));
        self.insert(name, w)
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.insert(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self, id: usize) -> &Array2<f64> {
        &self.tensors[id]
    }

    pub fn tensor_mut(&mut self, id: usize) -> &mut Array2<f64> {
        &mut self.tensors[id]
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Dense gradient accumulator aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    pub grads: Vec<Array2<f64>>,
}

impl GradBuffer {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradBuffer { grads: store.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect() }
    }

    pub fn add(&mut self, g: &Gradients) {
        for (acc, g) in self.grads.iter_mut().zip(&g.grads) {
            if let Some(g) = g {
                *acc += g;
            }
        }
    }

    pub fn merge(&mut self, other: &GradBuffer) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            *g *= s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Names the first parameter with a non-finite gradient entry.
    pub fn check_finite(&self, store: &ParamStore) -> Result<(), PolicyError> {
        for (id, g) in self.grads.iter().enumerate() {
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(PolicyError::NonFiniteGradient { param: store.name(id).to_string(), index: pos });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub max_grad_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, max_grad_norm: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParamStore) -> Self {
        let zeros: Vec<Array2<f64>> = store.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect();
        Adam { cfg, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One descent step on `store` with gradient `g`.
    pub fn update(&mut self, store: &mut ParamStore, g: &GradBuffer) {
        let mut scale = 1.0;
        if self.cfg.max_grad_norm > 0.0 {
            let n = g.norm();
            if n > self.cfg.max_grad_norm {
                scale = self.cfg.max_grad_norm / n;
            }
        }
        self.step += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (i, grad) in g.grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let w = &mut store.tensors[i];
            ndarray::Zip::from(w).and(m).and(v).and(grad).for_each(|w, m, v, &gr| {
                let gr = gr * scale;
                *m = c.beta1 * *m + (1.0 - c.beta1) * gr;
                *v = c.beta2 * *v + (1.0 - c.beta2) * gr * gr;
                *w -= c.lr * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
            });
        }
    }
}
