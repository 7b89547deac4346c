//! Metric storage, failure records and dataset splits.

mod series;
mod window;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use series::{MetricSeries, MetricStore};
pub use window::{
    baseline_stats, column_stats, normalize_window, slice_window, MetricWindow, WindowConfig, NORMALIZE_EPS,
};

use crate::error::{Error, Result};
use crate::fdg::{Fdg, FdgDocument, SystemCatalog};

pub const METRICS_FILE: &str = "metrics.csv";
pub const FAILURES_FILE: &str = "failures.json";
pub const FDG_FILE: &str = "fdg.json";

/// One historical (or incoming) failure with its graph snapshot and the
/// normalized window of every unit on that graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub failure_id: String,
    pub failure_time: i64,
    pub fdg: Fdg,
    pub windows: BTreeMap<String, MetricWindow>,
    pub ground_truth: BTreeSet<String>,
}

impl FailureRecord {
    /// Checks that every vertex has a window of its class's width and every
    /// ground truth is a vertex.
    pub fn validate(&self, catalog: &SystemCatalog) -> Result<()> {
        if self.ground_truth.is_empty() {
            return Err(Error::Validation(format!("failure {} has no ground truth", self.failure_id)));
        }
        for gt in &self.ground_truth {
            if !self.fdg.contains(gt) {
                return Err(Error::Validation(format!(
                    "failure {}: ground truth {gt} is not on the FDG",
                    self.failure_id
                )));
            }
        }
        for v in &self.fdg.vertices {
            let unit = catalog.unit(v).ok_or_else(|| Error::UnknownId(v.clone()))?;
            let class = catalog.class(&unit.class_id).ok_or_else(|| Error::UnknownId(unit.class_id.clone()))?;
            let w = self
                .windows
                .get(v)
                .ok_or_else(|| Error::Validation(format!("failure {}: no window for {v}", self.failure_id)))?;
            if w.cols != class.metric_count() {
                return Err(Error::Shape(format!(
                    "failure {}: window of {v} has {} columns, class {} has {}",
                    self.failure_id,
                    w.cols,
                    class.id,
                    class.metric_count()
                )));
            }
            if w.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("failure {}: non-finite window for {v}", self.failure_id)));
            }
        }
        Ok(())
    }

    /// Classes of the ground-truth units.
    pub fn truth_classes(&self, catalog: &SystemCatalog) -> BTreeSet<String> {
        self.ground_truth
            .iter()
            .filter_map(|u| catalog.unit(u).map(|u| u.class_id.clone()))
            .collect()
    }

    /// Label `r_T(v)` for every vertex.
    pub fn label(&self, unit_id: &str) -> bool {
        self.ground_truth.contains(unit_id)
    }
}

/// Entry of the failure records JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureSpec {
    pub failure_id: String,
    pub failure_time: i64,
    pub ground_truth: Vec<String>,
    /// FDG file, relative to the dataset directory.
    pub fdg: String,
}

/// A system catalog plus its labeled failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub catalog: SystemCatalog,
    pub window: WindowConfig,
    pub records: Vec<FailureRecord>,
}

impl Dataset {
    /// Slices and normalizes the windows of every failure from raw series.
    pub fn assemble(
        catalog: SystemCatalog,
        window: WindowConfig,
        store: &MetricStore,
        failures: Vec<(FailureSpec, Fdg)>,
    ) -> Result<Self> {
        catalog.validate()?;
        window.validate()?;
        let mut records = Vec::with_capacity(failures.len());
        for (spec, fdg) in failures {
            let mut windows = BTreeMap::new();
            for v in &fdg.vertices {
                let unit = catalog.unit(v).ok_or_else(|| Error::UnknownId(v.clone()))?;
                let class =
                    catalog.class(&unit.class_id).ok_or_else(|| Error::UnknownId(unit.class_id.clone()))?;
                let empties: Vec<MetricSeries> = class
                    .metric_names
                    .iter()
                    .map(|m| MetricSeries::empty(crate::fdg::MetricDescriptor { name: m.clone(), unit_id: v.clone() }))
                    .collect();
                let cols: Vec<&MetricSeries> = class
                    .metric_names
                    .iter()
                    .zip(&empties)
                    .map(|(m, empty)| store.get(v, m).unwrap_or(empty))
                    .collect();
                let raw = slice_window(v, &cols, spec.failure_time, window.length, window.step)?;
                let (mean, std) = baseline_stats(v, &cols, spec.failure_time, &window)?;
                windows.insert(v.clone(), normalize_window(&raw, &mean, &std)?);
            }
            let record = FailureRecord {
                failure_id: spec.failure_id,
                failure_time: spec.failure_time,
                fdg,
                windows,
                ground_truth: spec.ground_truth.into_iter().collect(),
            };
            record.validate(&catalog)?;
            records.push(record);
        }
        let ids: BTreeSet<_> = records.iter().map(|r| r.failure_id.as_str()).collect();
        if ids.len() != records.len() {
            return Err(Error::Validation("duplicate failure ids".into()));
        }
        Ok(Self { catalog, window, records })
    }

    /// Loads `fdg.json`-style graph files, `metrics.csv` and
    /// `failures.json` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>, window: WindowConfig) -> Result<Self> {
        let dir = dir.as_ref();
        let specs: Vec<FailureSpec> =
            serde_json::from_str(&std::fs::read_to_string(dir.join(FAILURES_FILE))?)?;
        let store = MetricStore::load_csv(dir.join(METRICS_FILE))?;
        let mut docs: BTreeMap<String, (SystemCatalog, Fdg)> = BTreeMap::new();
        for spec in &specs {
            if !docs.contains_key(&spec.fdg) {
                let parts = FdgDocument::load(dir.join(&spec.fdg))?.into_parts()?;
                docs.insert(spec.fdg.clone(), parts);
            }
        }
        let mut catalog = SystemCatalog::default();
        for (cat, _) in docs.values() {
            merge_catalog(&mut catalog, cat)?;
        }
        let failures = specs
            .into_iter()
            .map(|spec| {
                let mut fdg = docs[&spec.fdg].1.clone();
                fdg.snapshot_time = spec.failure_time;
                (spec, fdg)
            })
            .collect();
        Self::assemble(catalog, window, &store, failures)
    }

    pub fn record(&self, failure_id: &str) -> Option<&FailureRecord> {
        self.records.iter().find(|r| r.failure_id == failure_id)
    }

    /// Class ids in catalog order.
    pub fn class_ids(&self) -> Vec<String> {
        self.catalog.classes.iter().map(|c| c.id.clone()).collect()
    }
}

fn merge_catalog(into: &mut SystemCatalog, from: &SystemCatalog) -> Result<()> {
    fn merge<T: Clone + PartialEq>(dst: &mut Vec<T>, src: &[T], id: impl Fn(&T) -> &str) -> Result<()> {
        for item in src {
            match dst.iter().find(|d| id(d) == id(item)) {
                Some(existing) if existing != item => {
                    return Err(Error::Validation(format!("conflicting definitions of {}", id(item))));
                }
                Some(_) => {}
                None => dst.push(item.clone()),
            }
        }
        Ok(())
    }
    merge(&mut into.components, &from.components, |c| &c.id)?;
    merge(&mut into.classes, &from.classes, |c| &c.id)?;
    merge(&mut into.units, &from.units, |u| &u.id)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<FailureRecord>,
    pub validation: Vec<FailureRecord>,
    pub test: Vec<FailureRecord>,
}

/// Chronological 40/20/40 split. Validation and test sizes are rounded
/// down; training takes the remainder.
pub fn split_dataset(records: &[FailureRecord]) -> Result<DatasetSplit> {
    if records.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 failures to split, got {}", records.len())));
    }
    let mut sorted: Vec<FailureRecord> = records.to_vec();
    sorted.sort_by(|a, b| a.failure_time.cmp(&b.failure_time).then_with(|| a.failure_id.cmp(&b.failure_id)));
    let n = sorted.len();
    let n_val = n / 5;
    let n_test = 2 * n / 5;
    let n_train = n - n_val - n_test;
    let test = sorted.split_off(n_train + n_val);
    let validation = sorted.split_off(n_train);
    Ok(DatasetSplit { train: sorted, validation, test })
}

/// Number of training failures per ground-truth class. A failure with
/// truths in several classes counts once for each.
pub fn class_counts(train: &[FailureRecord], catalog: &SystemCatalog) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for record in train {
        for class in record.truth_classes(catalog) {
            *counts.entry(class).or_insert(0) += 1;
        }
    }
    counts
}
