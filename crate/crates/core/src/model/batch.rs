use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use crate::autodiff::{Neighborhoods, Tensor};
use crate::dataset::FailureRecord;
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::ClassSpec;

/// Units of one failure class inside a batch, with stacked windows
/// `[n, W, M]`.
#[derive(Debug, Clone)]
pub struct ClassGroup<T> {
    pub class_index: usize,
    pub vertices: Vec<usize>,
    pub windows: Tensor<T>,
}

/// Several failures merged into one disjoint graph.
#[derive(Debug, Clone)]
pub struct GraphBatch<T> {
    pub unit_ids: Vec<String>,
    pub records: Vec<Range<usize>>,
    pub groups: Vec<ClassGroup<T>>,
    /// Row of each vertex in the class-grouped extractor output.
    pub gather: Vec<usize>,
    pub neighborhoods: Arc<Neighborhoods>,
}

impl<T: Real> GraphBatch<T> {
    pub fn build(
        records: &[&FailureRecord],
        classes: &[ClassSpec],
        unit_classes: &BTreeMap<String, String>,
        window: usize,
    ) -> Result<Self> {
        let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
        let mut unit_ids = Vec::new();
        let mut ranges = Vec::with_capacity(records.len());
        let mut parts = Vec::with_capacity(records.len());
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
        let mut data: Vec<Vec<T>> = vec![Vec::new(); classes.len()];
        for record in records {
            let start = unit_ids.len();
            for unit in &record.fdg.vertices {
                let class_id = unit_classes
                    .get(unit)
                    .ok_or_else(|| Error::UnknownId(format!("class of unit {unit} in failure {}", record.failure_id)))?;
                let &ci = index
                    .get(class_id.as_str())
                    .ok_or_else(|| Error::Validation(format!("model has no extractor for failure class {class_id}")))?;
                let w = record
                    .windows
                    .get(unit)
                    .ok_or_else(|| Error::Validation(format!("failure {} has no window for {unit}", record.failure_id)))?;
                let m = classes[ci].metrics.len();
                if w.rows != window || w.cols != m {
                    return Err(Error::Shape(format!(
                        "window of {unit} is {}x{}, class {class_id} expects {window}x{m}",
                        w.rows, w.cols
                    )));
                }
                members[ci].push(unit_ids.len());
                data[ci].extend(w.data.iter().map(|&v| T::lit(v)));
                unit_ids.push(unit.clone());
            }
            ranges.push(start..unit_ids.len());
            parts.push(Neighborhoods::closed(&record.fdg.adjacency())?);
        }
        let mut gather = vec![0; unit_ids.len()];
        let mut groups = Vec::new();
        let mut row = 0;
        for (ci, (vertices, values)) in members.into_iter().zip(data).enumerate() {
            if vertices.is_empty() {
                continue;
            }
            for &v in &vertices {
                gather[v] = row;
                row += 1;
            }
            let shape = vec![vertices.len(), window, classes[ci].metrics.len()];
            groups.push(ClassGroup { class_index: ci, vertices, windows: Tensor::new(shape, values)? });
        }
        Ok(Self {
            unit_ids,
            records: ranges,
            groups,
            gather,
            neighborhoods: Arc::new(Neighborhoods::disjoint_union(&parts)),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.unit_ids.len()
    }
}
