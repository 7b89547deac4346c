//! Supervised training of the localizer.

mod loss;
mod sampler;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use loss::{batch_targets, weighted_bce_loss, SampleWeights};
pub use sampler::FailureSampler;

use crate::autodiff::{Adam, AdamConfig, Tape};
use crate::dataset::FailureRecord;
use crate::error::{Error, Result};
use crate::eval::metrics::Accuracy;
use crate::fdg::SystemCatalog;
use crate::model::{GraphBatch, LocalizerModel};
use crate::ranking::Ranking;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub optimizer: AdamConfig,
    /// Class-balanced sampling; off reproduces the unbalanced ablation.
    pub balance: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { max_epochs: 3000, batch_size: 16, patience: 300, optimizer: AdamConfig::default(), balance: true, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument("epochs, batch size and patience must be positive".into()));
        }
        self.optimizer.validate()
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mar: f64,
    pub val_top_k: [f64; 4],
    /// Seconds since training started. Not written to the CSV log, which
    /// must be reproducible byte for byte.
    #[serde(skip)]
    pub wall_seconds: f64,
}

pub fn write_log_csv<W: Write>(out: W, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_loss", "val_MAR", "val_A@1", "val_A@2", "val_A@3", "val_A@5"])?;
    for row in log {
        let mut fields = vec![row.epoch.to_string(), format!("{:?}", row.train_loss), format!("{:?}", row.val_mar)];
        fields.extend(row.val_top_k.iter().map(|v| format!("{v:?}")));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_log_csv(path: &Path, log: &[EpochLog]) -> Result<()> {
    write_log_csv(std::fs::File::create(path)?, log)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best validation MAR.
    pub model: LocalizerModel<T>,
    pub best_epoch: usize,
    pub best_val_mar: f64,
    pub log: Vec<EpochLog>,
}

/// Evaluates a frozen model on `records` in one merged batch.
pub fn evaluate_batch<T: Real>(
    model: &LocalizerModel<T>,
    batch: &GraphBatch<T>,
    records: &[FailureRecord],
) -> Result<Accuracy> {
    let mut tape = Tape::new();
    let vars = model.forward(&mut tape, batch)?;
    let scores = tape.value(vars.scores).to_f64_vec();
    let mut results = Vec::with_capacity(records.len());
    for (record, range) in records.iter().zip(&batch.records) {
        let ranking = Ranking::from_scores(range.clone().map(|i| (batch.unit_ids[i].clone(), scores[i])))?;
        results.push((ranking, record.ground_truth.clone()));
    }
    Accuracy::compute(&results)
}

/// Trains `model` in place on `train`, selecting the epoch with the lowest
/// validation MAR.
pub fn train<T: Real>(
    mut model: LocalizerModel<T>,
    train: &[FailureRecord],
    validation: &[FailureRecord],
    catalog: &SystemCatalog,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    for r in train.iter().chain(validation) {
        r.validate(catalog)?;
    }
    let unit_classes: BTreeMap<String, String> = catalog.unit_class_map();
    let sampler = if cfg.balance {
        FailureSampler::balanced(train, catalog)?
    } else {
        FailureSampler::uniform(train.len())?
    };
    let val_refs: Vec<&FailureRecord> = validation.iter().collect();
    let val_batch = model.batch(&val_refs, &unit_classes)?;
    let batches_per_epoch = train.len().div_ceil(cfg.batch_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.optimizer);
    let started = Instant::now();

    let initial = evaluate_batch(&model, &val_batch, validation)?;
    let mut best = (initial.mar, 0usize, model.params().clone());
    let mut log = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..batches_per_epoch {
            let picks: Vec<&FailureRecord> = (0..cfg.batch_size).map(|_| &train[sampler.draw(&mut rng)]).collect();
            let batch = model.batch(&picks, &unit_classes)?;
            let (targets, weights) = batch_targets(picks.iter().copied());
            let targets: Vec<T> = targets.into_iter().map(T::lit).collect();
            let weights: Vec<T> = weights.into_iter().map(T::lit).collect();
            let mut tape = Tape::new();
            let vars = model.forward(&mut tape, &batch)?;
            let loss = tape.weighted_bce(vars.scores, &targets, &weights)?;
            let value = tape.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, loss: value });
            }
            epoch_loss += value;
            let grads = tape.backward(loss)?;
            let params = model.params_mut();
            params.zero_grad();
            params.accumulate(grads.params())?;
            adam.step(params)?;
        }
        let acc = evaluate_batch(&model, &val_batch, validation)?;
        let row = EpochLog {
            epoch,
            train_loss: epoch_loss / batches_per_epoch as f64,
            val_mar: acc.mar,
            val_top_k: acc.top_k(),
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if epoch % 50 == 0 || epoch == 1 {
            log::info!("epoch {epoch}: loss {:.5}, val MAR {:.3}", row.train_loss, row.val_mar);
        }
        log.push(row);
        if acc.mar < best.0 {
            best = (acc.mar, epoch, model.params().clone());
        } else if epoch - best.1 >= cfg.patience {
            log::info!("stopping at epoch {epoch}; best val MAR {:.3} at epoch {}", best.0, best.1);
            break;
        }
    }
    let (best_val_mar, best_epoch, params) = best;
    model.set_params(params)?;
    model.params_mut().zero_grad();
    Ok(TrainOutcome { model, best_epoch, best_val_mar, log })
}
