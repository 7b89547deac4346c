//! Per-class decoders mapping unit-level features back to metric windows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::init::xavier_uniform;
use crate::autodiff::{Adam, AdamConfig, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{ClassSpec, LocalizerModel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    /// Full-batch optimizer steps per class.
    pub steps: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { steps: 400, optimizer: AdamConfig::default(), seed: 0 }
    }
}

/// Mean squared error over every entry of two equally shaped windows.
pub fn ae_loss(original: &[f64], reconstructed: &[f64]) -> f64 {
    let n = original.len().max(1) as f64;
    original.iter().zip(reconstructed).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

#[derive(Debug, Clone)]
pub struct Decoders<T> {
    window: usize,
    kernel: usize,
    channels: usize,
    feature_dim: usize,
    classes: Vec<ClassSpec>,
    params: ParamStore<T>,
}

fn name(class: &str, p: &str) -> String {
    format!("decoder/{class}/{p}")
}

impl<T: Real> Decoders<T> {
    /// Dense `Z -> (W-k+1)*C`, then a transposed convolution back to
    /// `W x M`, mirroring the extractor's geometry.
    pub fn new(model: &LocalizerModel<T>, seed: u64) -> Self {
        let cfg = model.config();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (z, c, k) = (cfg.feature_dim, cfg.conv_channels, cfg.kernel_width);
        let flat = cfg.conv_len() * c;
        for class in model.classes() {
            let m = class.metrics.len();
            params.insert(name(&class.id, "dense.weight"), xavier_uniform(&[z, flat], z, flat, &mut rng));
            params.insert(name(&class.id, "dense.bias"), Tensor::zeros(&[flat]));
            params.insert(name(&class.id, "deconv.kernel"), xavier_uniform(&[k, m, c], k * c, k * m, &mut rng));
            params.insert(name(&class.id, "deconv.bias"), Tensor::zeros(&[m]));
        }
        Self {
            window: cfg.window,
            kernel: k,
            channels: c,
            feature_dim: z,
            classes: model.classes().to_vec(),
            params,
        }
    }

    fn metrics(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .find(|c| c.id == class)
            .map(|c| c.metrics.len())
            .ok_or_else(|| Error::UnknownId(format!("decoder class {class}")))
    }

    /// `[n, Z]` features to `[n, W, M]` windows.
    pub fn decode(&self, tape: &mut Tape<T>, class: &str, features: Var) -> Result<Var> {
        self.decode_with(&self.params, tape, class, features)
    }

    fn decode_with(&self, params: &ParamStore<T>, tape: &mut Tape<T>, class: &str, features: Var) -> Result<Var> {
        let n = tape.value(features).shape()[0];
        let w = tape.param(params, &name(class, "dense.weight"))?;
        let b = tape.param(params, &name(class, "dense.bias"))?;
        let k = tape.param(params, &name(class, "deconv.kernel"))?;
        let kb = tape.param(params, &name(class, "deconv.bias"))?;
        let h = tape.dense(features, w, b)?;
        let h = tape.reshape(h, &[n, self.window + 1 - self.kernel, self.channels])?;
        tape.conv1d_transpose(h, k, kb)
    }

    /// Reconstructed windows, row-major `W x M` each.
    pub fn reconstruct(&self, class: &str, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        let flat: Vec<f64> = features.iter().flatten().copied().collect();
        let mut tape = Tape::new();
        let x = tape.input(Tensor::from_f64(vec![features.len(), self.feature_dim], &flat)?);
        let y = self.decode(&mut tape, class, x)?;
        let per = self.window * self.metrics(class)?;
        Ok(tape.value(y).to_f64_vec().chunks(per).map(<[f64]>::to_vec).collect())
    }

    /// Fits one class's decoder on `(feature, window)` pairs; returns the
    /// loss after each step.
    pub fn fit(&mut self, class: &str, features: &[Vec<f64>], windows: &[Vec<f64>], cfg: &DecoderConfig) -> Result<Vec<f64>> {
        let m = self.metrics(class)?;
        if features.len() != windows.len() || features.is_empty() {
            return Err(Error::InvalidArgument(format!("{} features for {} windows", features.len(), windows.len())));
        }
        let n = features.len();
        let flat: Vec<f64> = features.iter().flatten().copied().collect();
        let x = Tensor::<T>::from_f64(vec![n, self.feature_dim], &flat)?;
        let target: Vec<T> = windows.iter().flatten().map(|&v| T::lit(v)).collect();
        if target.len() != n * self.window * m {
            return Err(Error::Shape(format!("windows for class {class} must be {}x{m}", self.window)));
        }
        let prefix = format!("decoder/{class}/");
        let mut own = ParamStore::new();
        for (k, p) in self.params.iter().filter(|(k, _)| k.starts_with(&prefix)) {
            own.insert(k.clone(), p.value.clone());
        }
        let mut adam = Adam::new(cfg.optimizer);
        let scale = T::one() / T::lit(target.len() as f64);
        let mut losses = Vec::with_capacity(cfg.steps);
        for step in 0..cfg.steps {
            let mut tape = Tape::new();
            let xv = tape.input(x.clone());
            let y = self.decode_with(&own, &mut tape, class, xv)?;
            let se = tape.squared_error(y, &target)?;
            let loss = tape.scale(se, scale);
            let value = tape.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(Error::Diverged { epoch: step, loss: value });
            }
            losses.push(value);
            let grads = tape.backward(loss)?;
            own.zero_grad();
            own.accumulate(grads.params())?;
            adam.step(&mut own)?;
        }
        for (k, p) in own.iter() {
            *self.params.value_mut(k)? = p.value.clone();
        }
        Ok(losses)
    }
}
