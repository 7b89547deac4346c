use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unitrank_core::dataset::Dataset;
use unitrank_sim::{generate_topology, simulate, MetricProfile, SimConfig, SimError};

fn small() -> SimConfig {
    SimConfig { n_failures: 48, ..SimConfig::default() }
}

fn dir_bytes(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn same_seed_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(&small()).unwrap().write_dir(a.path()).unwrap();
    simulate(&small()).unwrap().write_dir(b.path()).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), ["failures.json", "fdg.json", "manifest.json", "metrics.csv", "relations.json"]);
    assert_eq!(fa, fb);
    let c = tempfile::tempdir().unwrap();
    simulate(&SimConfig { seed: 1, ..small() }).unwrap().write_dir(c.path()).unwrap();
    assert_ne!(fa["metrics.csv"], dir_bytes(c.path())["metrics.csv"]);
}

#[test]
fn exported_dataset_round_trips() {
    let sim = simulate(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sim.write_dir(dir.path()).unwrap();
    let loaded = Dataset::load_dir(dir.path(), sim.window_config()).unwrap();
    let direct = sim.dataset().unwrap();
    assert_eq!(loaded.catalog, direct.catalog);
    assert_eq!(loaded.records, direct.records);
    assert_eq!(loaded.records.len(), 48);
}

#[test]
fn default_topology_shape() {
    let sim = simulate(&SimConfig { n_failures: 8, ..SimConfig::default() }).unwrap();
    let cat = &sim.topology.catalog;
    assert_eq!(cat.components.len(), 30);
    assert_eq!(cat.classes.len(), 8);
    assert!((80..=120).contains(&cat.units.len()), "{} units", cat.units.len());
    // every service unit reaches a container unit on the graph
    let g = &sim.topology.fdg;
    for u in cat.units.iter().filter(|u| u.class_id == "service_requests") {
        let d = g.hop_distances(&u.id).unwrap();
        assert!(d.keys().any(|v| v.contains("container")), "{} has no container neighbour", u.id);
    }
}

#[test]
fn minimal_topology_is_valid() {
    let cfg = SimConfig { n_services: 1, n_containers: 1, n_hosts: 1, n_failures: 4, ..SimConfig::default() };
    let topo = generate_topology(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(topo.catalog.validate().is_ok());
    assert!(topo.fdg.vertex_count() >= 3);
    assert!(simulate(&cfg).unwrap().dataset().is_ok());
}

#[test]
fn ground_truth_is_on_the_graph() {
    let sim = simulate(&small()).unwrap();
    for r in sim.dataset().unwrap().records {
        assert!(!r.ground_truth.is_empty());
        assert!(r.ground_truth.iter().all(|u| r.fdg.contains(u)));
    }
}

#[test]
fn injected_unit_stands_out() {
    let cfg = small();
    let sim = simulate(&cfg).unwrap();
    let ds = sim.dataset().unwrap();
    for (f, r) in sim.manifest.failures.iter().zip(&ds.records) {
        let w = &r.windows[&f.units[0]];
        let z = w.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(z >= cfg.magnitude / 2.0, "{}: max z {z}", f.failure_id);
    }
}

#[test]
fn zero_decay_touches_only_the_faulty_unit() {
    let base = SimConfig { decay: 0.0, distractors: 0, multi_fault_probability: 0.0, n_failures: 12, ..SimConfig::default() };
    let strong = simulate(&base).unwrap();
    let weak = simulate(&SimConfig { magnitude: 3.0, ..base.clone() }).unwrap();
    let truth_at: BTreeMap<i64, String> = strong.manifest.failures.iter().map(|f| (f.failure_time, f.units[0].clone())).collect();
    let segment = base.segment_len() as i64 * base.step_seconds;
    let mut touched = BTreeSet::new();
    for (sa, sb) in strong.store.iter().zip(weak.store.iter()) {
        assert_eq!(sa.descriptor, sb.descriptor);
        for ((t, a), b) in sa.timestamps.iter().zip(&sa.values).zip(&sb.values) {
            if a != b {
                let (ft, unit) = truth_at.range(t..).next().unwrap();
                assert!(ft - t < segment);
                assert_eq!(unit, &sa.descriptor.unit_id, "perturbation outside the faulty unit");
                touched.insert(unit.clone());
            }
        }
    }
    assert!(!touched.is_empty());
}

#[test]
fn every_class_fails_on_two_units() {
    let cfg = SimConfig { n_failures: 32, ..SimConfig::default() };
    let sim = simulate(&cfg).unwrap();
    let mut per_class: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in &sim.manifest.failures {
        per_class.entry(f.class_id.as_str()).or_default().insert(f.units[0].as_str());
    }
    assert_eq!(per_class.len(), 8);
    for (c, units) in per_class {
        assert!(units.len() >= 2, "class {c} failed only on {units:?}");
    }
}

#[test]
fn held_out_units_fail_only_in_the_test_period() {
    let cfg = SimConfig { unseen_fraction: 0.4, ..SimConfig::default() };
    let sim = simulate(&cfg).unwrap();
    let held: BTreeSet<&str> = sim.manifest.held_out_units.iter().map(String::as_str).collect();
    assert!(!held.is_empty());
    let test_start = cfg.n_failures - 2 * cfg.n_failures / 5;
    for (i, f) in sim.manifest.failures.iter().enumerate() {
        if i < test_start {
            assert!(f.units.iter().all(|u| !held.contains(u.as_str())), "{} uses a held-out unit", f.failure_id);
        }
    }
    assert!(sim.manifest.failures.iter().any(|f| f.held_out));
}

#[test]
fn paired_failures_share_class_size_and_onset() {
    let sim = simulate(&SimConfig { paired: true, n_failures: 40, ..SimConfig::default() }).unwrap();
    for pair in sim.manifest.failures.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert_eq!(a.pair, b.pair);
        assert_eq!(a.class_id, b.class_id);
        assert_eq!(a.magnitude, b.magnitude);
        assert_eq!(a.failure_time - a.onset_time, b.failure_time - b.onset_time);
        assert_ne!(a.units, b.units);
    }
}

#[test]
fn quiet_profile_is_constant_and_noise_averages_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = MetricProfile::draw(0.0, 0.0, &mut rng);
    let xs: Vec<f64> = (0..50).map(|m| p.sample(m as f64, &mut rng)).collect();
    assert!(xs.iter().all(|x| *x == xs[0]));

    let p = MetricProfile::draw(2.0, 1.0, &mut rng);
    let n = 4000;
    // whole seasons sampled at many phases cancel the sinusoid
    let period = p.period_minutes;
    let mean = (0..n).map(|i| p.sample(i as f64 * period / 100.0, &mut rng)).sum::<f64>() / n as f64;
    assert!((mean - p.level).abs() < 3.0 * p.noise_std / (n as f64).sqrt() + 1e-9, "{mean} vs {}", p.level);
}

#[test]
fn config_is_checked() {
    assert!(matches!(simulate(&SimConfig { decay: 1.0, ..small() }), Err(SimError::Config(_))));
    assert!(matches!(simulate(&SimConfig { n_hosts: 0, ..small() }), Err(SimError::Config(_))));
    assert!(matches!(simulate(&SimConfig { spacing_minutes: 30, ..small() }), Err(SimError::InsufficientDuration(_))));
}
