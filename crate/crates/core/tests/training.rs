mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unitrank_core::autodiff::{AdamConfig, Tape, Tensor};
use unitrank_core::dataset::FailureRecord;
use unitrank_core::model::{LocalizerModel, ModelConfig};
use unitrank_core::training::{batch_targets, weighted_bce_loss, SampleWeights};
use unitrank_core::training::FailureSampler;
use unitrank_core::training::{train, write_log_csv, TrainConfig};

fn labels(truth: &[&str], units: &[&str]) -> BTreeMap<String, bool> {
    units.iter().map(|u| (u.to_string(), truth.contains(u))).collect()
}

fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(u, s)| (u.to_string(), *s)).collect()
}

#[test]
fn bce_is_zero_at_perfect_prediction() {
    let l = weighted_bce_loss(&scores(&[("a", 1.0), ("b", 0.0), ("c", 0.0)]), &labels(&["a"], &["a", "b", "c"])).unwrap();
    assert!(l.abs() < 1e-9, "{l}");
}

#[test]
fn bce_is_ln2_at_one_half() {
    let l = weighted_bce_loss(&scores(&[("a", 0.5), ("b", 0.5), ("c", 0.5), ("d", 0.5)]), &labels(&["b"], &["a", "b", "c", "d"])).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-9, "{l}");
}

#[test]
fn bce_weights_faulty_units_by_graph_size() {
    let l = weighted_bce_loss(&scores(&[("a", 0.8), ("b", 0.3), ("c", 0.1)]), &labels(&["a"], &["a", "b", "c"])).unwrap();
    let want = (3.0 * -(0.8f64).ln() - (0.7f64).ln() - (0.9f64).ln()) / 5.0;
    assert!((l - want).abs() < 1e-12);
    assert!(weighted_bce_loss(&BTreeMap::new(), &BTreeMap::new()).is_err());
    assert!(weighted_bce_loss(&scores(&[("a", 0.5)]), &labels(&[], &["b"])).is_err());
}

fn records() -> (unitrank_core::fdg::SystemCatalog, Vec<FailureRecord>) {
    let cat = common::catalog(&["s1", "s2", "s3"], &["h1", "h2"]);
    let edges = [("s1", "s2"), ("s2", "s3"), ("s1", "h1"), ("s3", "h2")];
    let truths: [&[&str]; 6] = [&["s1"], &["s2"], &["h1"], &["s3", "h2"], &["s2"], &["h2"]];
    let recs = truths
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut r = common::random_record(&format!("F{i}"), &cat, &edges, t, 6, i as u64);
            r.failure_time = i as i64;
            r
        })
        .collect();
    (cat, recs)
}

#[test]
fn sample_weights_follow_labels() {
    let (_, recs) = records();
    let w = SampleWeights::for_record(&recs[3]);
    assert_eq!(w.weights["s3"], 5.0);
    assert_eq!(w.weights["h2"], 5.0);
    assert_eq!(w.weights["s1"], 1.0);
    assert_eq!(w.total(), 13.0);
}

#[test]
fn tape_loss_equals_mean_of_per_failure_losses() {
    let (_, recs) = records();
    let picks: Vec<&FailureRecord> = vec![&recs[0], &recs[3], &recs[5]];
    let (targets, weights) = batch_targets(picks.iter().copied());
    let p: Vec<f64> = (0..targets.len()).map(|i| 0.05 + 0.9 * ((i * 7) % 11) as f64 / 10.0).collect();
    let mut tape = Tape::<f64>::new();
    let s = tape.input(Tensor::from_f64(vec![p.len(), 1], &p).unwrap());
    let loss = tape.weighted_bce(s, &targets, &weights).unwrap();
    let got = tape.value(loss).item();
    // recompute failure by failure through the map-based loss
    let mut off = 0;
    let mut total = 0.0;
    for r in &picks {
        let n = r.fdg.vertex_count();
        let sc: BTreeMap<String, f64> = r.fdg.vertices.iter().cloned().zip(p[off..off + n].iter().copied()).collect();
        let lb: BTreeMap<String, bool> = r.fdg.vertices.iter().map(|v| (v.clone(), r.label(v))).collect();
        total += weighted_bce_loss(&sc, &lb).unwrap();
        off += n;
    }
    assert!((got - total / 3.0).abs() < 1e-12, "{got} vs {}", total / 3.0);
}

#[test]
fn balanced_sampler_frequencies() {
    // class a: 7 failures, b: 2, c: 1
    let groups = vec![
        ("a".to_string(), (0..7).collect::<Vec<_>>()),
        ("b".to_string(), vec![7, 8]),
        ("c".to_string(), vec![9]),
    ];
    let s = FailureSampler::from_groups(groups.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut hits = [0usize; 10];
    let draws = 100_000;
    for _ in 0..draws {
        hits[s.draw(&mut rng)] += 1;
    }
    for (_, members) in &groups {
        let f = members.iter().map(|&i| hits[i]).sum::<usize>() as f64 / draws as f64;
        assert!((f - 1.0 / 3.0).abs() < 0.01, "class frequency {f}");
    }
    let p = s.probabilities(10);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((p[9] - 1.0 / 3.0).abs() < 1e-12 && (p[0] - 1.0 / 21.0).abs() < 1e-12);
    assert!(FailureSampler::from_groups(vec![]).is_err());
    assert!(FailureSampler::from_groups(vec![("x".into(), vec![])]).is_err());
}

#[test]
fn balanced_sampler_from_records_counts_multi_class_failures_twice() {
    let (cat, recs) = records();
    let s = FailureSampler::balanced(&recs, &cat).unwrap();
    let p = s.probabilities(recs.len());
    // svc: F0 F1 F3 F4, host: F2 F3 F5
    assert!((p[3] - (0.5 / 4.0 + 0.5 / 3.0)).abs() < 1e-12);
    assert!((p[0] - 0.125).abs() < 1e-12);
    let u = FailureSampler::uniform(4).unwrap();
    assert_eq!(u.probabilities(4), vec![0.25; 4]);
    assert!(FailureSampler::uniform(0).is_err());
}

fn quick(seed: u64) -> TrainConfig {
    TrainConfig { max_epochs: 6, batch_size: 3, patience: 10, seed, optimizer: AdamConfig::default(), balance: true }
}

fn small_model(cat: &unitrank_core::fdg::SystemCatalog, seed: u64) -> LocalizerModel<f64> {
    LocalizerModel::from_catalog(ModelConfig { layers: 2, window: 6, ..ModelConfig::default() }, cat, seed).unwrap()
}

#[test]
fn training_is_deterministic() {
    let (cat, recs) = records();
    let a = train(small_model(&cat, 1), &recs[..4], &recs[4..], &cat, &quick(5)).unwrap();
    let b = train(small_model(&cat, 1), &recs[..4], &recs[4..], &cat, &quick(5)).unwrap();
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(a.best_epoch, b.best_epoch);
    let (mut la, mut lb) = (Vec::new(), Vec::new());
    write_log_csv(&mut la, &a.log).unwrap();
    write_log_csv(&mut lb, &b.log).unwrap();
    assert_eq!(la, lb);
    let c = train(small_model(&cat, 1), &recs[..4], &recs[4..], &cat, &quick(6)).unwrap();
    assert_ne!(a.log.iter().map(|r| r.train_loss).collect::<Vec<_>>(), c.log.iter().map(|r| r.train_loss).collect::<Vec<_>>());
}

#[test]
fn keeps_the_best_validation_epoch() {
    let (cat, recs) = records();
    let out = train(small_model(&cat, 2), &recs[..4], &recs[4..], &cat, &quick(0)).unwrap();
    let min = out.log.iter().map(|r| r.val_mar).fold(f64::INFINITY, f64::min);
    assert!(out.best_val_mar <= min);
    if out.best_epoch > 0 {
        assert_eq!(out.log[out.best_epoch - 1].val_mar, out.best_val_mar);
    }
    let text = {
        let mut v = Vec::new();
        write_log_csv(&mut v, &out.log).unwrap();
        String::from_utf8(v).unwrap()
    };
    assert!(text.starts_with("epoch,train_loss,val_MAR,val_A@1,val_A@2,val_A@3,val_A@5\n"));
    assert_eq!(text.lines().count(), out.log.len() + 1);
}

#[test]
fn early_stopping_and_argument_checks() {
    let (cat, recs) = records();
    let cfg = TrainConfig { max_epochs: 50, patience: 2, ..quick(0) };
    let out = train(small_model(&cat, 2), &recs[..4], &recs[4..], &cat, &cfg).unwrap();
    assert!(out.log.len() <= out.best_epoch + 2);
    assert!(train(small_model(&cat, 2), &[], &recs[4..], &cat, &cfg).is_err());
    assert!(train(small_model(&cat, 2), &recs[..4], &[], &cat, &cfg).is_err());
    assert!(train(small_model(&cat, 2), &recs[..4], &recs[4..], &cat, &TrainConfig { batch_size: 0, ..cfg }).is_err());
}
