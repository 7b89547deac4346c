use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::Ranking;

/// The cut-offs reported for top-k accuracy.
pub const TOP_K: [usize; 4] = [1, 2, 3, 5];

/// Mean 1-based rank of the ground-truth units of one failure.
pub fn mean_truth_rank(ranking: &Ranking, truths: &BTreeSet<String>) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::Validation("failure without ground truth".into()));
    }
    let mut total = 0usize;
    for t in truths {
        total += ranking.rank_of(t).ok_or_else(|| Error::Validation(format!("ground truth {t} missing from ranking")))?;
    }
    Ok(total as f64 / truths.len() as f64)
}

/// True iff every ground truth sits within the first `k` positions.
pub fn all_in_top_k(ranking: &Ranking, truths: &BTreeSet<String>, k: usize) -> Result<bool> {
    for t in truths {
        let r = ranking.rank_of(t).ok_or_else(|| Error::Validation(format!("ground truth {t} missing from ranking")))?;
        if r > k {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn mar(results: &[(Ranking, BTreeSet<String>)]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no failures to evaluate".into()));
    }
    let mut total = 0.0;
    for (r, t) in results {
        total += mean_truth_rank(r, t)?;
    }
    Ok(total / results.len() as f64)
}

pub fn topk_accuracy(results: &[(Ranking, BTreeSet<String>)], k: usize) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no failures to evaluate".into()));
    }
    let mut hits = 0usize;
    for (r, t) in results {
        if all_in_top_k(r, t, k)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

/// MAR and A@{1,2,3,5} for a set of rankings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub mar: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a5: f64,
}

impl Accuracy {
    pub fn compute(results: &[(Ranking, BTreeSet<String>)]) -> Result<Self> {
        Ok(Self {
            mar: mar(results)?,
            a1: topk_accuracy(results, 1)?,
            a2: topk_accuracy(results, 2)?,
            a3: topk_accuracy(results, 3)?,
            a5: topk_accuracy(results, 5)?,
        })
    }

    pub fn top_k(&self) -> [f64; 4] {
        [self.a1, self.a2, self.a3, self.a5]
    }
}
