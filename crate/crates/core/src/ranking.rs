use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::FailureRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUnit {
    pub unit_id: String,
    pub score: f64,
}

/// Units ordered by descending score; equal scores fall back to ascending
/// unit id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedUnit>,
}

impl Ranking {
    pub fn from_scores(scores: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut entries: Vec<RankedUnit> = scores.into_iter().map(|(unit_id, score)| RankedUnit { unit_id, score }).collect();
        if let Some(bad) = entries.iter().find(|e| !e.score.is_finite()) {
            return Err(Error::Validation(format!("score of {} is not finite", bad.unit_id)));
        }
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.unit_id.cmp(&b.unit_id)));
        for pair in entries.windows(2) {
            if pair[0].unit_id == pair[1].unit_id {
                return Err(Error::Validation(format!("unit {} ranked twice", pair[0].unit_id)));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based position of a unit.
    pub fn rank_of(&self, unit_id: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.unit_id == unit_id).map(|p| p + 1)
    }

    pub fn units(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.unit_id.as_str())
    }

    pub fn scores(&self) -> BTreeMap<&str, f64> {
        self.entries.iter().map(|e| (e.unit_id.as_str(), e.score)).collect()
    }

    /// Plain table for terminals.
    pub fn render(&self, limit: usize) -> String {
        let mut out = String::from("rank  score     unit\n");
        for (i, e) in self.entries.iter().take(limit).enumerate() {
            out.push_str(&format!("{:>4}  {:.6}  {}\n", i + 1, e.score, e.unit_id));
        }
        out
    }
}

/// Anything that can rank the units of a failure.
pub trait RankingProducer {
    fn name(&self) -> &str;
    fn rank(&self, record: &FailureRecord) -> Result<Ranking>;
}
