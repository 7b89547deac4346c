use std::collections::BTreeMap;

use rand::Rng;

use crate::dataset::FailureRecord;
use crate::error::{Error, Result};
use crate::fdg::SystemCatalog;

/// Draws training failures either uniformly or so that each ground-truth
/// class is equally likely.
#[derive(Debug, Clone)]
pub enum FailureSampler {
    Uniform { count: usize },
    Balanced { by_class: Vec<(String, Vec<usize>)> },
}

impl FailureSampler {
    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument("no failures to sample".into()));
        }
        Ok(Self::Uniform { count })
    }

    /// Class `c` is drawn with probability 1/C, then a failure uniformly
    /// among those with a ground truth in `c`.
    pub fn balanced(records: &[FailureRecord], catalog: &SystemCatalog) -> Result<Self> {
        let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            for class in r.truth_classes(catalog) {
                by_class.entry(class).or_default().push(i);
            }
        }
        Self::from_groups(by_class.into_iter().collect())
    }

    pub fn from_groups(by_class: Vec<(String, Vec<usize>)>) -> Result<Self> {
        if by_class.is_empty() {
            return Err(Error::InvalidArgument("no failure classes to sample".into()));
        }
        if let Some((c, _)) = by_class.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidArgument(format!("class {c} has no failures")));
        }
        Ok(Self::Balanced { by_class })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Self::Uniform { count } => rng.random_range(0..*count),
            Self::Balanced { by_class } => {
                let (_, members) = &by_class[rng.random_range(0..by_class.len())];
                members[rng.random_range(0..members.len())]
            }
        }
    }

    /// Probability of drawing each failure index.
    pub fn probabilities(&self, count: usize) -> Vec<f64> {
        let mut p = vec![0.0; count];
        match self {
            Self::Uniform { count: n } => p.iter_mut().take(*n).for_each(|v| *v = 1.0 / *n as f64),
            Self::Balanced { by_class } => {
                let c = by_class.len() as f64;
                for (_, members) in by_class {
                    for &i in members {
                        p[i] += 1.0 / (c * members.len() as f64);
                    }
                }
            }
        }
        p
    }
}
