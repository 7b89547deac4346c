//! Deterministic generator of small service systems, their metrics and
//! injected failures with known ground truth.
//!
//! Everything is a pure function of [`SimConfig`]: the same seed yields the
//! same topology, the same series and the same failures, byte for byte once
//! exported.

mod config;
mod error;
mod inject;
mod series;
mod topology;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{default_classes, ClassTemplate, Pattern, SimConfig, Tier};
pub use error::{Result, SimError};
pub use inject::{plan_failures, InjectedFailure, Injection};
pub use series::MetricProfile;
pub use topology::{generate_topology, Topology};

use unitrank_core::dataset::{
    Dataset, FailureSpec, MetricSeries, MetricStore, WindowConfig, FAILURES_FILE, FDG_FILE, METRICS_FILE,
};
use unitrank_core::fdg::{FdgDocument, MetricDescriptor};

pub const RELATIONS_FILE: &str = "relations.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Injected truth and the generating config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest {
    pub config: SimConfig,
    pub held_out_units: Vec<String>,
    pub failures: Vec<InjectedFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub topology: Topology,
    pub store: MetricStore,
    pub failures: Vec<FailureSpec>,
    pub manifest: SimManifest,
}

/// Independent random stream for one generation phase.
fn stream(seed: u64, phase: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase);
    rng
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub fn simulate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let topology = generate_topology(cfg, &mut stream(cfg.seed, 1))?;
    let catalog = &topology.catalog;

    let mut profile_rng = stream(cfg.seed, 2);
    let mut profiles: BTreeMap<(String, String), MetricProfile> = BTreeMap::new();
    for unit in &catalog.units {
        let class = catalog.class(&unit.class_id).expect("validated catalog");
        for metric in &class.metric_names {
            let p = MetricProfile::draw(cfg.noise_std, cfg.seasonal_amplitude, &mut profile_rng);
            profiles.insert((unit.id.clone(), metric.clone()), p);
        }
    }

    let (failures, held_out) = plan_failures(cfg, &topology, &mut stream(cfg.seed, 3))?;

    let mut noise_rng = stream(cfg.seed, 4);
    let segment = cfg.segment_len();
    let mut columns: BTreeMap<(String, String), (Vec<i64>, Vec<Option<f64>>)> = BTreeMap::new();
    for failure in &failures {
        let first = failure.failure_time - (segment as i64 - 1) * cfg.step_seconds;
        let effects = inject::effects(cfg, &topology, failure)?;
        for ((unit, metric), profile) in &profiles {
            let shift = effects.get(unit.as_str());
            let entry = columns.entry((unit.clone(), metric.clone())).or_default();
            for r in 0..segment {
                let t = first + r as i64 * cfg.step_seconds;
                let minute = (t - cfg.start_time) as f64 / 60.0;
                let mut v = profile.sample(minute, &mut noise_rng);
                if let Some(inj) = shift {
                    v += inj.offset_at(t, cfg.step_seconds) * profile.noise_std.max(1e-9);
                }
                let missing = cfg.missing_rate > 0.0 && rand::Rng::random_bool(&mut noise_rng, cfg.missing_rate);
                entry.0.push(t);
                entry.1.push(if missing { None } else { Some(round4(v)) });
            }
        }
    }
    let mut store = MetricStore::new();
    for ((unit_id, name), (timestamps, values)) in columns {
        store.insert(MetricSeries::new(MetricDescriptor { name, unit_id }, timestamps, values)?);
    }

    let specs = failures
        .iter()
        .map(|f| FailureSpec {
            failure_id: f.failure_id.clone(),
            failure_time: f.failure_time,
            ground_truth: f.units.clone(),
            fdg: FDG_FILE.into(),
        })
        .collect();
    let manifest = SimManifest { config: cfg.clone(), held_out_units: held_out.into_iter().collect(), failures };
    Ok(SimOutput { topology, store, failures: specs, manifest })
}

impl SimManifest {
    pub fn window_config(&self) -> WindowConfig {
        let c = &self.config;
        WindowConfig { length: c.window, step: c.step_seconds, baseline_length: c.baseline }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

impl SimOutput {
    pub fn window_config(&self) -> WindowConfig {
        self.manifest.window_config()
    }

    /// Assembles the dataset in memory, exactly as loading the exported
    /// directory would.
    pub fn dataset(&self) -> Result<Dataset> {
        let failures = self
            .failures
            .iter()
            .map(|spec| {
                let mut fdg = self.topology.fdg.clone();
                fdg.snapshot_time = spec.failure_time;
                (spec.clone(), fdg)
            })
            .collect();
        Ok(Dataset::assemble(self.topology.catalog.clone(), self.window_config(), &self.store, failures)?)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        FdgDocument::new(&self.topology.catalog, &self.topology.fdg).save(dir.join(FDG_FILE))?;
        std::fs::write(dir.join(RELATIONS_FILE), serde_json::to_string_pretty(&self.topology.relations)?)?;
        self.store.save_csv(dir.join(METRICS_FILE))?;
        std::fs::write(dir.join(FAILURES_FILE), serde_json::to_string_pretty(&self.failures)?)?;
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }
}
