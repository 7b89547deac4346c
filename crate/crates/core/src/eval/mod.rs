//! Evaluation of ranking producers and the robustness experiments.

pub mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{mar, topk_accuracy, Accuracy, TOP_K};

use crate::dataset::{DatasetSplit, FailureRecord};
use crate::error::{Error, Result};
use crate::fdg::SystemCatalog;
use crate::model::{Localizer, LocalizerModel, ModelConfig};
use crate::ranking::{Ranking, RankingProducer};
use crate::training::{train, TrainConfig};

/// Outcome for one failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureOutcome {
    pub failure_id: String,
    /// 1-based rank of each ground-truth unit.
    pub truth_ranks: BTreeMap<String, usize>,
    pub mean_rank: f64,
}

/// Wall-clock cost of localization. Kept apart from the metrics so that
/// reruns produce identical metrics files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub mean_seconds: f64,
    pub max_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub producer: String,
    pub failures: usize,
    #[serde(flatten)]
    pub accuracy: Accuracy,
    pub per_failure: Vec<FailureOutcome>,
    #[serde(skip)]
    pub timing: Option<Timing>,
}

impl EvalReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_json(&mut f)?;
        writeln!(f)?;
        Ok(())
    }
}

/// Ranks every record with `producer` and scores the rankings.
pub fn evaluate(producer: &dyn RankingProducer, records: &[FailureRecord]) -> Result<EvalReport> {
    let mut results: Vec<(Ranking, BTreeSet<String>)> = Vec::with_capacity(records.len());
    let mut per_failure = Vec::with_capacity(records.len());
    let mut total = 0.0;
    let mut max = 0.0f64;
    for record in records {
        let t = Instant::now();
        let ranking = producer.rank(record)?;
        let secs = t.elapsed().as_secs_f64();
        total += secs;
        max = max.max(secs);
        let mut truth_ranks = BTreeMap::new();
        for u in &record.ground_truth {
            let r = ranking
                .rank_of(u)
                .ok_or_else(|| Error::Validation(format!("ground truth {u} missing from ranking of {}", record.failure_id)))?;
            truth_ranks.insert(u.clone(), r);
        }
        per_failure.push(FailureOutcome {
            failure_id: record.failure_id.clone(),
            mean_rank: metrics::mean_truth_rank(&ranking, &record.ground_truth)?,
            truth_ranks,
        });
        results.push((ranking, record.ground_truth.clone()));
    }
    let accuracy = Accuracy::compute(&results)?;
    Ok(EvalReport {
        producer: producer.name().to_string(),
        failures: records.len(),
        accuracy,
        per_failure,
        timing: Some(Timing { total_seconds: total, mean_seconds: total / records.len() as f64, max_seconds: max }),
    })
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    #[serde(flatten)]
    pub accuracy: Accuracy,
}

pub fn write_table_csv<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "MAR", "A@1", "A@2", "A@3", "A@5"])?;
    for r in rows {
        let a = &r.accuracy;
        w.write_record([r.name.clone(), format!("{:?}", a.mar), format!("{:?}", a.a1), format!("{:?}", a.a2), format!("{:?}", a.a3), format!("{:?}", a.a5)])?;
    }
    w.flush()?;
    Ok(())
}

/// Splits `test` into (seen, unseen): a failure is seen iff some training
/// failure shares one of its exact ground-truth units.
pub fn seen_unseen_split(test: &[FailureRecord], train: &[FailureRecord]) -> (Vec<FailureRecord>, Vec<FailureRecord>) {
    let known: BTreeSet<&str> = train.iter().flat_map(|r| r.ground_truth.iter().map(String::as_str)).collect();
    test.iter().cloned().partition(|r| r.ground_truth.iter().any(|u| known.contains(u.as_str())))
}

/// Model and training settings for a retraining experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Trains a fresh model seeded with `seed` and evaluates it on `test`.
pub fn train_and_evaluate(
    split: &DatasetSplit,
    test: &[FailureRecord],
    catalog: &SystemCatalog,
    run: &RunConfig,
    seed: u64,
) -> Result<EvalReport> {
    let model = LocalizerModel::<f64>::from_catalog(run.model, catalog, seed)?;
    let cfg = TrainConfig { seed, ..run.train };
    let outcome = train(model, &split.train, &split.validation, catalog, &cfg)?;
    let localizer = Localizer::new(outcome.model, catalog);
    evaluate(&localizer, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub mars: Vec<f64>,
    pub mean_mar: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Removes `fraction` of the edges of every failure's FDG, drawn
/// independently per failure. Same seed, same removed edges.
pub fn remove_edges(records: &[FailureRecord], fraction: f64, rng: &mut ChaCha8Rng) -> Result<Vec<FailureRecord>> {
    records
        .iter()
        .map(|r| {
            let mut out = r.clone();
            out.fdg = r.fdg.remove_random_edges(fraction, rng)?;
            Ok(out)
        })
        .collect()
}

/// Retrains and evaluates with a fraction of FDG edges removed from every
/// failure, `repeats` times per fraction. Repeat `r` uses model seed
/// `seed + r`, so each fraction is compared against the same inits.
pub fn edge_removal_experiment(
    split: &DatasetSplit,
    catalog: &SystemCatalog,
    run: &RunConfig,
    fractions: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be positive".into()));
    }
    let mut points = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        let mut mars = Vec::with_capacity(repeats);
        for r in 0..repeats as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            rng.set_stream(fi as u64);
            let pruned = DatasetSplit {
                train: remove_edges(&split.train, fraction, &mut rng)?,
                validation: remove_edges(&split.validation, fraction, &mut rng)?,
                test: remove_edges(&split.test, fraction, &mut rng)?,
            };
            let report = train_and_evaluate(&pruned, &pruned.test, catalog, run, seed.wrapping_add(r))?;
            log::info!("edge fraction {fraction}, repeat {r}: MAR {:.3}", report.accuracy.mar);
            mars.push(report.accuracy.mar);
        }
        points.push(SweepPoint { fraction, mean_mar: mean(&mars), mars });
    }
    Ok(points)
}

/// Retrains on the chronological prefix `ceil(fraction * n)` of the
/// training set for each fraction in (0, 1].
pub fn training_fraction_sweep(
    split: &DatasetSplit,
    catalog: &SystemCatalog,
    run: &RunConfig,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("training fraction {fraction} not in (0, 1]")));
        }
        let n = ((fraction * split.train.len() as f64).ceil() as usize).clamp(1, split.train.len());
        let prefix = DatasetSplit { train: split.train[..n].to_vec(), validation: split.validation.clone(), test: split.test.clone() };
        let report = train_and_evaluate(&prefix, &prefix.test, catalog, run, seed)?;
        log::info!("training fraction {fraction} ({n} failures): MAR {:.3}", report.accuracy.mar);
        points.push(SweepPoint { fraction, mars: vec![report.accuracy.mar], mean_mar: report.accuracy.mar });
    }
    Ok(points)
}
