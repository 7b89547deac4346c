#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitrank_core::dataset::{FailureRecord, MetricWindow};
use unitrank_core::fdg::{Component, FailureClass, FailureUnit, Fdg, SystemCatalog};

/// Two classes (`svc` with 2 metrics, `host` with 3) over the given units.
pub fn catalog(svc_units: &[&str], host_units: &[&str]) -> SystemCatalog {
    let mut components = Vec::new();
    let mut units = Vec::new();
    for (ids, class, comp_class) in [(svc_units, "svc", "service"), (host_units, "host", "machine")] {
        for id in ids {
            components.push(Component { id: format!("c-{id}"), class_name: comp_class.into() });
            units.push(FailureUnit { id: id.to_string(), component_id: format!("c-{id}"), class_id: class.into() });
        }
    }
    let classes = vec![
        FailureClass { id: "host".into(), component_class: "machine".into(), metric_names: vec!["cpu".into(), "mem".into(), "disk".into()] },
        FailureClass { id: "svc".into(), component_class: "service".into(), metric_names: vec!["lat".into(), "err".into()] },
    ];
    SystemCatalog { components, classes, units }
}

pub fn random_record(
    id: &str,
    catalog: &SystemCatalog,
    edges: &[(&str, &str)],
    truth: &[&str],
    window: usize,
    seed: u64,
) -> FailureRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<String> = catalog.units.iter().map(|u| u.id.clone()).collect();
    let edges: Vec<(String, String)> = edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let fdg = Fdg::new(vertices.iter().cloned(), &edges, 0).unwrap();
    let mut windows = BTreeMap::new();
    for u in &catalog.units {
        let m = catalog.class(&u.class_id).unwrap().metric_count();
        let data = (0..window * m).map(|_| rng.random_range(-1.5..1.5)).collect();
        windows.insert(u.id.clone(), MetricWindow::new(u.id.clone(), window, m, 0, data).unwrap());
    }
    FailureRecord {
        failure_id: id.into(),
        failure_time: 0,
        fdg,
        windows,
        ground_truth: truth.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
    }
}
