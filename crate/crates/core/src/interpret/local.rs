//! Example-based explanation: which training failures look most like the
//! incoming one in the model's aggregated feature space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::FailureRecord;
use crate::error::Result;
use crate::model::{Inference, LocalizerModel};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    pub failure_id: String,
    /// Representative vector per failure class.
    pub vectors: BTreeMap<String, Vec<f64>>,
    /// Representative unit per class.
    pub representatives: BTreeMap<String, String>,
    /// Ground-truth unit -> class, when known.
    pub ground_truth: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarFailure {
    pub failure_id: String,
    pub similarity: f64,
    pub ground_truth: Vec<String>,
    pub truth_classes: Vec<String>,
}

/// For each class, the aggregated feature of the unit the model scores
/// highest in this failure (ties to the smaller id). Falls back to the
/// unit-level feature when the model has no aggregator.
pub fn signature_from_inference(
    inf: &Inference,
    record: &FailureRecord,
    unit_classes: &BTreeMap<String, String>,
) -> ClassSignature {
    let mut best: BTreeMap<&str, (&str, f64)> = BTreeMap::new();
    for (unit, &score) in &inf.scores {
        let class = unit_classes[unit].as_str();
        match best.get(class) {
            Some(&(_, s)) if s >= score => {}
            _ => {
                best.insert(class, (unit, score));
            }
        }
    }
    let source = if inf.aggregated.is_empty() { &inf.unit_features } else { &inf.aggregated };
    let mut vectors = BTreeMap::new();
    let mut representatives = BTreeMap::new();
    for (class, (unit, _)) in best {
        vectors.insert(class.to_string(), source[unit].clone());
        representatives.insert(class.to_string(), unit.to_string());
    }
    let ground_truth = record
        .ground_truth
        .iter()
        .filter_map(|u| unit_classes.get(u).map(|c| (u.clone(), c.clone())))
        .collect();
    ClassSignature { failure_id: record.failure_id.clone(), vectors, representatives, ground_truth }
}

pub fn class_signature<T: Real>(
    model: &LocalizerModel<T>,
    record: &FailureRecord,
    unit_classes: &BTreeMap<String, String>,
) -> Result<ClassSignature> {
    let inf = model.infer(&[record], unit_classes)?.remove(0);
    Ok(signature_from_inference(&inf, record, unit_classes))
}

pub fn signatures<T: Real>(
    model: &LocalizerModel<T>,
    records: &[FailureRecord],
    unit_classes: &BTreeMap<String, String>,
) -> Result<Vec<ClassSignature>> {
    let infs = model.infer_all(records, unit_classes, 16)?;
    Ok(infs.iter().zip(records).map(|(i, r)| signature_from_inference(i, r, unit_classes)).collect())
}

/// Cosine of two vectors; zero when either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Max cosine over the classes both signatures contain, or `None` when
/// they share none.
pub fn similarity(a: &ClassSignature, b: &ClassSignature) -> Option<f64> {
    a.vectors
        .iter()
        .filter_map(|(class, va)| b.vectors.get(class).map(|vb| cosine(va, vb)))
        .reduce(f64::max)
}

/// The `k` most similar entries of `history`, most similar first, ties by
/// failure id. Entries with the incoming failure's own id are skipped.
pub fn find_similar(incoming: &ClassSignature, history: &[ClassSignature], k: usize) -> Vec<SimilarFailure> {
    let mut scored: Vec<(f64, &ClassSignature)> = history
        .iter()
        .filter(|h| h.failure_id != incoming.failure_id)
        .filter_map(|h| similarity(incoming, h).map(|s| (s, h)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.failure_id.cmp(&b.1.failure_id)));
    scored
        .into_iter()
        .take(k)
        .map(|(s, h)| {
            let mut classes: Vec<String> = h.ground_truth.values().cloned().collect();
            classes.sort();
            classes.dedup();
            SimilarFailure {
                failure_id: h.failure_id.clone(),
                similarity: s,
                ground_truth: h.ground_truth.keys().cloned().collect(),
                truth_classes: classes,
            }
        })
        .collect()
}
