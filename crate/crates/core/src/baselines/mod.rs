//! Random-walk baselines: personalized PageRank over a metric graph
//! (scores summed per unit) or directly over the FDG.

mod pagerank;

pub use pagerank::{pearson, personalized_pagerank, TransitionMatrix, PAGERANK_TOLERANCE, RESTART_PROBABILITY};

use std::collections::BTreeMap;

use crate::dataset::FailureRecord;
use crate::error::{Error, Result};
use crate::ranking::{Ranking, RankingProducer};

fn window_columns(record: &FailureRecord) -> Result<BTreeMap<&str, Vec<Vec<f64>>>> {
    record
        .fdg
        .vertices
        .iter()
        .map(|v| {
            let w = record
                .windows
                .get(v)
                .ok_or_else(|| Error::Validation(format!("failure {} has no window for {v}", record.failure_id)))?;
            Ok((v.as_str(), w.columns()))
        })
        .collect()
}

/// Walk over individual metrics; a unit's score is the sum of its metrics'
/// scores.
pub fn randomwalk_at_metric(record: &FailureRecord) -> Result<Ranking> {
    let cols = window_columns(record)?;
    let units: Vec<&str> = cols.keys().copied().collect();
    let unit_index: BTreeMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut owner = Vec::new();
    let mut series: Vec<&[f64]> = Vec::new();
    let mut offsets = Vec::with_capacity(units.len() + 1);
    for (i, u) in units.iter().enumerate() {
        offsets.push(series.len());
        for c in &cols[u] {
            owner.push(i);
            series.push(c);
        }
    }
    offsets.push(series.len());
    let n = series.len();
    let mut weights = vec![0.0; n * n];
    let mut link = |a: usize, b: usize| {
        let w = pearson(series[a], series[b]).abs();
        weights[a * n + b] = w;
        weights[b * n + a] = w;
    };
    for (ui, _) in units.iter().enumerate() {
        for a in offsets[ui]..offsets[ui + 1] {
            for b in a + 1..offsets[ui + 1] {
                link(a, b);
            }
        }
    }
    for (a_unit, b_unit) in &record.fdg.edges {
        let (ia, ib) = (unit_index[a_unit.as_str()], unit_index[b_unit.as_str()]);
        for a in offsets[ia]..offsets[ia + 1] {
            for b in offsets[ib]..offsets[ib + 1] {
                link(a, b);
            }
        }
    }
    let p = TransitionMatrix::from_weights(n, weights)?;
    let scores = personalized_pagerank(&p, RESTART_PROBABILITY)?;
    let mut per_unit = vec![0.0; units.len()];
    for (m, s) in scores.iter().enumerate() {
        per_unit[owner[m]] += s;
    }
    Ranking::from_scores(units.iter().map(|u| u.to_string()).zip(per_unit))
}

/// Walk directly on the FDG, weighting an edge by the mean absolute
/// correlation over all metric pairs of its two units.
pub fn randomwalk_at_fi(record: &FailureRecord) -> Result<Ranking> {
    let cols = window_columns(record)?;
    let units: Vec<&str> = cols.keys().copied().collect();
    let index: BTreeMap<&str, usize> = units.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let n = units.len();
    let mut weights = vec![0.0; n * n];
    for (a, b) in &record.fdg.edges {
        let (ca, cb) = (&cols[a.as_str()], &cols[b.as_str()]);
        let mut total = 0.0;
        for x in ca {
            for y in cb {
                total += pearson(x, y).abs();
            }
        }
        let pairs = (ca.len() * cb.len()).max(1) as f64;
        let (i, j) = (index[a.as_str()], index[b.as_str()]);
        weights[i * n + j] = total / pairs;
        weights[j * n + i] = total / pairs;
    }
    let p = TransitionMatrix::from_weights(n, weights)?;
    let scores = personalized_pagerank(&p, RESTART_PROBABILITY)?;
    Ranking::from_scores(units.iter().map(|u| u.to_string()).zip(scores))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomWalkAtMetric;

impl RankingProducer for RandomWalkAtMetric {
    fn name(&self) -> &str {
        "rw_metric"
    }

    fn rank(&self, record: &FailureRecord) -> Result<Ranking> {
        randomwalk_at_metric(record)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomWalkAtFi;

impl RankingProducer for RandomWalkAtFi {
    fn name(&self) -> &str {
        "rw_fi"
    }

    fn rank(&self, record: &FailureRecord) -> Result<Ranking> {
        randomwalk_at_fi(record)
    }
}
