use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Pattern, SimConfig};
use crate::error::Result;
use crate::topology::Topology;

/// Samples a spike lasts.
const SPIKE_SAMPLES: i64 = 3;

/// One additive anomaly on every metric of a unit, in units of the metric's
/// noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub onset_time: i64,
    pub end_time: i64,
    pub magnitude: f64,
    pub pattern: Pattern,
}

impl Injection {
    pub fn offset_at(&self, t: i64, step: i64) -> f64 {
        let active = match self.pattern {
            Pattern::Shift => t >= self.onset_time && t <= self.end_time,
            Pattern::Spike => t >= self.onset_time && t < self.onset_time + SPIKE_SAMPLES * step && t <= self.end_time,
        };
        if active {
            self.magnitude
        } else {
            0.0
        }
    }
}

/// Sum of the anomalies hitting one unit during one failure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitEffect(pub Vec<Injection>);

impl UnitEffect {
    pub fn offset_at(&self, t: i64, step: i64) -> f64 {
        self.0.iter().map(|i| i.offset_at(t, step)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub unit: String,
    pub injection: Injection,
}

/// Planned failure with its injected truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedFailure {
    pub failure_id: String,
    pub failure_time: i64,
    pub class_id: String,
    /// Faulty units; the first belongs to `class_id`.
    pub units: Vec<String>,
    pub magnitude: f64,
    pub onset_time: i64,
    pub pattern: Pattern,
    /// Index of the pair this failure belongs to in paired mode.
    pub pair: Option<usize>,
    /// Whether the primary unit is one of the held-out units.
    pub held_out: bool,
    pub distractors: Vec<Distractor>,
}

fn pattern_of(cfg: &SimConfig, topo: &Topology, unit: &str) -> Pattern {
    let class = &topo.catalog.unit(unit).expect("unit from catalog").class_id;
    cfg.classes.iter().find(|c| &c.id == class).map(|c| c.pattern).unwrap_or(Pattern::Shift)
}

/// Chooses failure times, classes, faulty units, sizes and distractors.
/// Returns the failures in time order and the held-out unit set.
pub fn plan_failures<R: Rng + ?Sized>(
    cfg: &SimConfig,
    topo: &Topology,
    rng: &mut R,
) -> Result<(Vec<InjectedFailure>, BTreeSet<String>)> {
    let catalog = &topo.catalog;
    let mut by_class: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for u in &catalog.units {
        by_class.entry(u.class_id.as_str()).or_default().push(u.id.clone());
    }
    let class_ids: Vec<&str> = cfg.classes.iter().map(|c| c.id.as_str()).filter(|c| by_class.contains_key(c)).collect();

    let mut held_out = BTreeSet::new();
    for units in by_class.values() {
        let k = ((cfg.unseen_fraction * units.len() as f64).floor() as usize).min(units.len() - 1);
        let mut shuffled = units.clone();
        shuffled.shuffle(rng);
        held_out.extend(shuffled.into_iter().take(k));
    }

    let n = cfg.n_failures;
    let test_start = n - 2 * n / 5;
    let group = if cfg.paired { 2 } else { 1 };
    let slots = n.div_ceil(group);
    let mut schedule = Vec::with_capacity(slots);
    while schedule.len() < slots {
        let mut round = class_ids.clone();
        round.shuffle(rng);
        schedule.extend(round);
    }
    schedule.truncate(slots);

    let first_time = cfg.start_time + cfg.segment_len() as i64 * cfg.step_seconds;
    let mut injected: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    let mut failures = Vec::with_capacity(n);
    for (slot, &class) in schedule.iter().enumerate() {
        let magnitude = cfg.magnitude * rng.random_range(1.0 - cfg.magnitude_jitter..=1.0 + cfg.magnitude_jitter);
        let lo = cfg.window / 4;
        let hi = (cfg.window * 3 / 5).max(lo);
        // paired failures replay the same injection, onset included
        let shared_onset = cfg.paired.then(|| rng.random_range(lo..=hi));
        let mut used: BTreeSet<String> = BTreeSet::new();
        for member in 0..group {
            let i = slot * group + member;
            if i >= n {
                break;
            }
            let units = &by_class[class];
            let seen: Vec<&String> = units.iter().filter(|u| !held_out.contains(*u)).collect();
            let hidden: Vec<&String> = units.iter().filter(|u| held_out.contains(*u)).collect();
            let from_hidden = i >= test_start && !hidden.is_empty() && rng.random_bool(cfg.unseen_test_share);
            let mut pool: Vec<&String> = if from_hidden { hidden } else { seen };
            pool.retain(|u| !used.contains(*u));
            let so_far = injected.entry(class).or_default();
            if so_far.len() == 1 && pool.len() > 1 {
                pool.retain(|u| !so_far.contains(*u));
            }
            if pool.is_empty() {
                pool = units.iter().filter(|u| !used.contains(*u)).collect();
            }
            if pool.is_empty() {
                pool = units.iter().collect();
            }
            let primary = pool[rng.random_range(0..pool.len())].clone();
            so_far.insert(primary.clone());
            used.insert(primary.clone());

            let failure_time = first_time + i as i64 * cfg.spacing_minutes * 60;
            let onset_row = match shared_onset {
                Some(row) => row,
                None => rng.random_range(lo..=hi),
            };
            let onset_time = failure_time - (cfg.window - 1 - onset_row) as i64 * cfg.step_seconds;

            let mut truth = vec![primary.clone()];
            if !cfg.paired && rng.random_bool(cfg.multi_fault_probability) {
                let others: Vec<&String> =
                    catalog.units.iter().map(|u| &u.id).filter(|u| **u != primary && !held_out.contains(*u)).collect();
                if !others.is_empty() {
                    truth.push(others[rng.random_range(0..others.len())].clone());
                }
            }

            let mut near: BTreeSet<String> = BTreeSet::new();
            for t in &truth {
                for (u, d) in topo.fdg.hop_distances(t)? {
                    if d <= cfg.hops {
                        near.insert(u);
                    }
                }
            }
            let far: Vec<&String> = catalog.units.iter().map(|u| &u.id).filter(|u| !near.contains(*u)).collect();
            let mut distractors = Vec::new();
            let mut chosen = far.clone();
            chosen.shuffle(rng);
            for unit in chosen.into_iter().take(cfg.distractors) {
                let row = rng.random_range(lo..=hi);
                distractors.push(Distractor {
                    unit: unit.clone(),
                    injection: Injection {
                        onset_time: failure_time - (cfg.window - 1 - row) as i64 * cfg.step_seconds,
                        end_time: failure_time,
                        magnitude: cfg.magnitude * rng.random_range(0.6..1.0),
                        pattern: pattern_of(cfg, topo, unit),
                    },
                });
            }

            failures.push(InjectedFailure {
                failure_id: format!("F{i:04}"),
                failure_time,
                class_id: class.to_string(),
                held_out: held_out.contains(&primary),
                units: truth,
                magnitude,
                onset_time,
                pattern: pattern_of(cfg, topo, &primary),
                pair: cfg.paired.then_some(slot),
                distractors,
            });
        }
    }
    Ok((failures, held_out))
}

/// Anomalies per unit for one failure: the faulty units, their neighbours
/// within `hops` (attenuated by `decay` per hop and delayed one step per
/// hop), and the distractors.
pub fn effects(cfg: &SimConfig, topo: &Topology, f: &InjectedFailure) -> Result<BTreeMap<String, UnitEffect>> {
    let mut out: BTreeMap<String, UnitEffect> = BTreeMap::new();
    for truth in &f.units {
        let pattern = pattern_of(cfg, topo, truth);
        for (unit, hop) in topo.fdg.hop_distances(truth)? {
            if hop > cfg.hops {
                continue;
            }
            let magnitude = f.magnitude * cfg.decay.powi(hop as i32);
            if magnitude == 0.0 {
                continue;
            }
            let onset = (f.onset_time + hop as i64 * cfg.step_seconds).min(f.failure_time);
            out.entry(unit).or_default().0.push(Injection { onset_time: onset, end_time: f.failure_time, magnitude, pattern });
        }
    }
    for d in &f.distractors {
        out.entry(d.unit.clone()).or_default().0.push(d.injection);
    }
    Ok(out)
}
