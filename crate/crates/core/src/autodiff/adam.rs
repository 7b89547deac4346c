use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, weight_decay: 0.01, clip_norm: 1.0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && self.clip_norm > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("optimizer settings out of range: {self:?}")))
        }
    }
}

/// Adam with decoupled weight decay and global-norm gradient clipping.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, (Tensor<T>, Tensor<T>)>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, moments: BTreeMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, name: &str) -> Option<(&Tensor<T>, &Tensor<T>)> {
        self.moments.get(name).map(|(m, v)| (m, v))
    }

    /// Applies one update from the gradients stored in `params`. Gradients
    /// are left untouched; call [`ParamStore::zero_grad`] afterwards.
    pub fn step(&mut self, params: &mut ParamStore<T>) -> Result<()> {
        for (name, p) in params.iter() {
            if !p.grad.all_finite() {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        let c = &self.config;
        let norm = params.grad_norm();
        let clip = T::lit(c.clip_norm);
        let factor = if norm > clip { clip / norm } else { T::one() };
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let corr1 = T::one() - b1.powi(t);
        let corr2 = T::one() - b2.powi(t);
        let (lr, wd, eps) = (T::lit(c.learning_rate), T::lit(c.weight_decay), T::lit(c.epsilon));
        for (name, p) in params.iter_mut() {
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Tensor::zeros(p.value.shape()), Tensor::zeros(p.value.shape())));
            let values = p.value.data_mut();
            for (((w, &g), mi), vi) in values.iter_mut().zip(p.grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
                let g = g * factor;
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let update = (*mi / corr1) / ((*vi / corr2).sqrt() + eps);
                *w -= lr * (wd * *w + update);
            }
        }
        Ok(())
    }
}
