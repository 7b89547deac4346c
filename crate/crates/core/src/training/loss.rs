use std::collections::BTreeMap;

use crate::autodiff::PROB_EPS;
use crate::dataset::FailureRecord;
use crate::error::{Error, Result};

/// Per-unit weights of one failure: `N` for faulty units, 1 otherwise,
/// where `N` is the number of vertices of the failure's graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights {
    pub weights: BTreeMap<String, f64>,
}

impl SampleWeights {
    pub fn for_record(record: &FailureRecord) -> Self {
        let n = record.fdg.vertex_count() as f64;
        let weights = record.fdg.vertices.iter().map(|v| (v.clone(), if record.label(v) { n } else { 1.0 })).collect();
        Self { weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Weighted mean of binary cross-entropy terms over one failure, with
/// weights `N` on faulty units and 1 elsewhere.
pub fn weighted_bce_loss(scores: &BTreeMap<String, f64>, labels: &BTreeMap<String, bool>) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no units to score".into()));
    }
    if scores.len() != labels.len() || scores.keys().zip(labels.keys()).any(|(a, b)| a != b) {
        return Err(Error::Validation("scores and labels cover different units".into()));
    }
    let n = scores.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (unit, &s) in scores {
        let y = labels[unit];
        let w = if y { n } else { 1.0 };
        let p = s.clamp(PROB_EPS, 1.0 - PROB_EPS);
        num += w * if y { -p.ln() } else { -(1.0 - p).ln() };
        den += w;
    }
    Ok(num / den)
}

/// Targets and per-vertex weights for a batch laid out failure by failure,
/// scaled so the tape's weighted sum equals the mean over failures of each
/// failure's normalised weighted loss.
pub fn batch_targets<'a>(records: impl ExactSizeIterator<Item = &'a FailureRecord>) -> (Vec<f64>, Vec<f64>) {
    let count = records.len() as f64;
    let (mut targets, mut weights) = (Vec::new(), Vec::new());
    for r in records {
        let w = SampleWeights::for_record(r);
        let total = w.total();
        for (unit, wv) in &w.weights {
            targets.push(if r.label(unit) { 1.0 } else { 0.0 });
            weights.push(wv / total / count);
        }
    }
    (targets, weights)
}
