//! Per-class decision trees trained directly on ground-truth labels, used
//! as a ranking baseline.

use std::collections::BTreeMap;

use super::global::{feature_vector, window_features};
use super::tree::{DecisionTree, TreeConfig};
use super::FeatureKey;
use crate::dataset::FailureRecord;
use crate::error::{Error, Result};
use crate::fdg::SystemCatalog;
use crate::ranking::{Ranking, RankingProducer};

#[derive(Debug, Clone)]
struct ClassTree {
    metrics: Vec<String>,
    keys: Vec<FeatureKey>,
    tree: DecisionTree,
}

/// Scores a unit by the faulty fraction of the leaf it lands in.
#[derive(Debug, Clone)]
pub struct TreeBaseline {
    unit_classes: BTreeMap<String, String>,
    trees: BTreeMap<String, ClassTree>,
}

impl TreeBaseline {
    pub fn fit(train: &[FailureRecord], catalog: &SystemCatalog, cfg: TreeConfig) -> Result<Self> {
        let unit_classes = catalog.unit_class_map();
        let mut samples: BTreeMap<String, (Vec<Vec<f64>>, Vec<bool>)> = BTreeMap::new();
        let mut keys: BTreeMap<String, Vec<FeatureKey>> = BTreeMap::new();
        for record in train {
            for (unit, window) in &record.windows {
                let class = &unit_classes[unit];
                let metrics = &catalog.class(class).ok_or_else(|| Error::UnknownId(class.clone()))?.metric_names;
                let feats = window_features(window, metrics);
                keys.entry(class.clone()).or_insert_with(|| feats.iter().map(|(k, _)| k.clone()).collect());
                let entry = samples.entry(class.clone()).or_default();
                entry.0.push(feats.into_iter().map(|(_, v)| v).collect());
                entry.1.push(record.ground_truth.contains(unit));
            }
        }
        let mut trees = BTreeMap::new();
        for (class, (x, y)) in samples {
            let metrics = catalog.class(&class).map(|c| c.metric_names.clone()).unwrap_or_default();
            let tree = DecisionTree::fit(&x, &y, cfg)?;
            trees.insert(class.clone(), ClassTree { metrics, keys: keys.remove(&class).unwrap_or_default(), tree });
        }
        Ok(Self { unit_classes, trees })
    }
}

impl RankingProducer for TreeBaseline {
    fn name(&self) -> &str {
        "tree"
    }

    fn rank(&self, record: &FailureRecord) -> Result<Ranking> {
        let mut scores = BTreeMap::new();
        for (unit, window) in &record.windows {
            let class = self.unit_classes.get(unit).ok_or_else(|| Error::UnknownId(unit.clone()))?;
            let s = match self.trees.get(class) {
                Some(t) => t.tree.faulty_fraction(&feature_vector(window, &t.metrics, &t.keys)),
                None => 0.0,
            };
            scores.insert(unit.clone(), s);
        }
        Ranking::from_scores(scores)
    }
}
