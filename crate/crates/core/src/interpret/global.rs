//! Surrogate decision trees that mimic the localizer per failure class,
//! built on features that survive reconstruction from the unit-level
//! representation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::decoder::{ae_loss, DecoderConfig, Decoders};
use super::features::{extract_ts_features, CATALOG};
use super::rules::{extract_rules, DecisionRule, Verdict};
use super::tree::{DecisionTree, TreeConfig};
use super::FeatureKey;
use crate::dataset::{FailureRecord, MetricWindow};
use crate::error::Result;
use crate::fdg::SystemCatalog;
use crate::model::LocalizerModel;
use crate::scalar::Real;

/// Confident and unconfident score bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreCategory {
    Faulty,
    Normal,
    Uncertain,
}

pub const FAULTY_THRESHOLD: f64 = 0.9;
pub const NORMAL_THRESHOLD: f64 = 0.1;

pub fn categorize(score: f64) -> ScoreCategory {
    if score > FAULTY_THRESHOLD {
        ScoreCategory::Faulty
    } else if score < NORMAL_THRESHOLD {
        ScoreCategory::Normal
    } else {
        ScoreCategory::Uncertain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    /// Largest median relative discrepancy a retained feature may have.
    pub tau: f64,
    pub tree: TreeConfig,
    pub decoder: DecoderConfig,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self { tau: 0.5, tree: TreeConfig::default(), decoder: DecoderConfig::default() }
    }
}

/// Catalog features of every column, keyed by (feature, metric), in
/// metric-major order.
pub fn window_features(window: &MetricWindow, metrics: &[String]) -> Vec<(FeatureKey, f64)> {
    let mut out = Vec::with_capacity(metrics.len() * CATALOG.len());
    for (c, metric) in metrics.iter().enumerate() {
        let values = extract_ts_features(&window.column(c));
        for (def, v) in CATALOG.iter().zip(values) {
            out.push((FeatureKey { feature: def.name.to_string(), metric: metric.clone() }, v));
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median of `|f(orig) - f(recon)| / (|f(orig)| + 1)` per (feature, metric)
/// over paired windows.
pub fn feature_discrepancies(originals: &[MetricWindow], reconstructed: &[MetricWindow], metrics: &[String]) -> Vec<(FeatureKey, f64)> {
    let mut per_key: Vec<(FeatureKey, Vec<f64>)> = Vec::new();
    for (o, r) in originals.iter().zip(reconstructed) {
        let fo = window_features(o, metrics);
        let fr = window_features(r, metrics);
        if per_key.is_empty() {
            per_key = fo.iter().map(|(k, _)| (k.clone(), Vec::new())).collect();
        }
        for (i, ((_, a), (_, b))) in fo.iter().zip(&fr).enumerate() {
            per_key[i].1.push((a - b).abs() / (a.abs() + 1.0));
        }
    }
    per_key.into_iter().map(|(k, v)| (k, median(v))).collect()
}

/// Keys whose discrepancy is below `tau`.
pub fn select_features(discrepancies: &[(FeatureKey, f64)], tau: f64) -> Vec<FeatureKey> {
    discrepancies.iter().filter(|(_, d)| *d < tau).map(|(k, _)| k.clone()).collect()
}

/// Values of `keys` for one window.
pub fn feature_vector(window: &MetricWindow, metrics: &[String], keys: &[FeatureKey]) -> Vec<f64> {
    let all: BTreeMap<FeatureKey, f64> = window_features(window, metrics).into_iter().collect();
    keys.iter().map(|k| all.get(k).copied().unwrap_or(0.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInterpretation {
    pub class_id: String,
    pub metrics: Vec<String>,
    pub decoder_loss: f64,
    pub discrepancies: Vec<(FeatureKey, f64)>,
    pub retained: Vec<FeatureKey>,
    /// Training samples with a confident category.
    pub samples: usize,
    pub dropped_uncertain: usize,
    pub tree: Option<DecisionTree>,
    pub rules: Vec<DecisionRule>,
}

impl ClassInterpretation {
    pub fn predict(&self, window: &MetricWindow) -> Option<Verdict> {
        let tree = self.tree.as_ref()?;
        Some(Verdict::from_label(tree.predict(&feature_vector(window, &self.metrics, &self.retained))))
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "class {}: {} of {} features retained, {} samples ({} uncertain dropped), reconstruction loss {:.4}\n",
            self.class_id,
            self.retained.len(),
            self.discrepancies.len(),
            self.samples,
            self.dropped_uncertain,
            self.decoder_loss
        );
        if self.tree.as_ref().is_some_and(|t| t.degenerate) {
            out.push_str("  (single category in training data; tree is one leaf)\n");
        }
        for rule in &self.rules {
            out.push_str(&format!("  {rule}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalInterpretation {
    pub config: GlobalConfig,
    pub classes: Vec<ClassInterpretation>,
}

/// Agreement between the surrogate trees and the localizer's confident
/// categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub agree: usize,
    pub total: usize,
}

impl Fidelity {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.agree as f64 / self.total as f64
        }
    }
}

struct ClassData {
    windows: Vec<MetricWindow>,
    features: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

fn collect_by_class<T: Real>(
    model: &LocalizerModel<T>,
    records: &[FailureRecord],
    catalog: &SystemCatalog,
) -> Result<BTreeMap<String, ClassData>> {
    let unit_classes = catalog.unit_class_map();
    let inferences = model.infer_all(records, &unit_classes, 16)?;
    let mut out: BTreeMap<String, ClassData> = BTreeMap::new();
    for (record, inf) in records.iter().zip(inferences) {
        for (unit, score) in &inf.scores {
            let class = unit_classes[unit].clone();
            let d = out.entry(class).or_insert_with(|| ClassData { windows: Vec::new(), features: Vec::new(), scores: Vec::new() });
            d.windows.push(record.windows[unit].clone());
            d.features.push(inf.unit_features[unit].clone());
            d.scores.push(*score);
        }
    }
    Ok(out)
}

impl GlobalInterpretation {
    pub fn fit<T: Real>(
        model: &LocalizerModel<T>,
        train: &[FailureRecord],
        catalog: &SystemCatalog,
        cfg: &GlobalConfig,
    ) -> Result<Self> {
        let data = collect_by_class(model, train, catalog)?;
        let mut decoders = Decoders::new(model, cfg.decoder.seed);
        let mut classes = Vec::new();
        for spec in model.classes() {
            let Some(d) = data.get(&spec.id) else { continue };
            let targets: Vec<Vec<f64>> = d.windows.iter().map(|w| w.data.clone()).collect();
            decoders.fit(&spec.id, &d.features, &targets, &cfg.decoder)?;
            let recon_data = decoders.reconstruct(&spec.id, &d.features)?;
            let reconstructed: Vec<MetricWindow> = d
                .windows
                .iter()
                .zip(recon_data)
                .map(|(w, data)| MetricWindow { data, ..w.clone() })
                .collect();
            let decoder_loss = d.windows.iter().zip(&reconstructed).map(|(a, b)| ae_loss(&a.data, &b.data)).sum::<f64>()
                / d.windows.len().max(1) as f64;
            let discrepancies = feature_discrepancies(&d.windows, &reconstructed, &spec.metrics);
            let retained = select_features(&discrepancies, cfg.tau);
            let mut x = Vec::new();
            let mut y = Vec::new();
            let mut dropped = 0;
            for (w, &s) in d.windows.iter().zip(&d.scores) {
                match categorize(s) {
                    ScoreCategory::Uncertain => dropped += 1,
                    c => {
                        x.push(feature_vector(w, &spec.metrics, &retained));
                        y.push(c == ScoreCategory::Faulty);
                    }
                }
            }
            let tree = if x.is_empty() { None } else { Some(DecisionTree::fit(&x, &y, cfg.tree)?) };
            let rules = tree.as_ref().map(|t| extract_rules(t, &retained, &spec.id)).unwrap_or_default();
            classes.push(ClassInterpretation {
                class_id: spec.id.clone(),
                metrics: spec.metrics.clone(),
                decoder_loss,
                discrepancies,
                retained,
                samples: x.len(),
                dropped_uncertain: dropped,
                tree,
                rules,
            });
        }
        Ok(Self { config: *cfg, classes })
    }

    pub fn class(&self, id: &str) -> Option<&ClassInterpretation> {
        self.classes.iter().find(|c| c.class_id == id)
    }

    /// Fraction of confidently scored units in `records` on which the
    /// class tree reproduces the model's category.
    pub fn fidelity<T: Real>(
        &self,
        model: &LocalizerModel<T>,
        records: &[FailureRecord],
        catalog: &SystemCatalog,
    ) -> Result<Fidelity> {
        let data = collect_by_class(model, records, catalog)?;
        let mut fid = Fidelity { agree: 0, total: 0 };
        for (class, d) in &data {
            let interp = self.class(class);
            for (w, &s) in d.windows.iter().zip(&d.scores) {
                let expected = match categorize(s) {
                    ScoreCategory::Faulty => Verdict::Faulty,
                    ScoreCategory::Normal => Verdict::Normal,
                    ScoreCategory::Uncertain => continue,
                };
                fid.total += 1;
                if interp.and_then(|c| c.predict(w)) == Some(expected) {
                    fid.agree += 1;
                }
            }
        }
        Ok(fid)
    }

    pub fn render(&self) -> String {
        self.classes.iter().map(ClassInterpretation::render).collect::<Vec<_>>().join("\n")
    }
}
