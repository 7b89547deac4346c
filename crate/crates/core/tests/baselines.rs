mod common;

use proptest::prelude::*;
use unitrank_core::baselines::{
    pearson, personalized_pagerank, randomwalk_at_fi, randomwalk_at_metric, RandomWalkAtFi, RandomWalkAtMetric,
    TransitionMatrix, RESTART_PROBABILITY,
};
use unitrank_core::ranking::RankingProducer;

/// Textbook sample correlation via sums of products.
fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Solves `x = (1-r) P^T x + r/n` by Gaussian elimination.
fn pagerank_oracle(p: &TransitionMatrix, r: f64) -> Vec<f64> {
    let n = p.size;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        for j in 0..n {
            row[j] = if i == j { 1.0 } else { 0.0 } - (1.0 - r) * p.get(j, i);
        }
        row[n] = r / n as f64;
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        for rr in 0..n {
            if rr != c {
                let f = a[rr][c] / a[c][c];
                for k in c..=n {
                    a[rr][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

#[test]
fn pearson_known_values() {
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
    assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    assert_eq!(pearson(&[], &[]), 0.0);
}

#[test]
fn transition_rows_are_stochastic() {
    let p = TransitionMatrix::from_weights(3, vec![0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 1.0, 3.0, 0.0]).unwrap();
    assert_eq!((p.get(0, 1), p.get(0, 2)), (0.5, 0.5));
    // all-zero row becomes uniform
    assert!((p.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!((p.get(2, 0), p.get(2, 1)), (0.25, 0.75));
    assert!(TransitionMatrix::from_weights(2, vec![1.0, -1.0, 0.0, 1.0]).is_err());
    assert!(TransitionMatrix::from_weights(2, vec![1.0]).is_err());
}

#[test]
fn pagerank_matches_linear_solve() {
    let p = TransitionMatrix::from_weights(4, vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.2, 0.3, 0.0, 0.9, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let x = personalized_pagerank(&p, RESTART_PROBABILITY).unwrap();
    let oracle = pagerank_oracle(&p, RESTART_PROBABILITY);
    for (a, b) in x.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9, "{x:?} vs {oracle:?}");
    }
}

#[test]
fn pagerank_of_symmetric_cycle_is_uniform() {
    let n = 5;
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        w[i * n + (i + 1) % n] = 1.0;
        w[((i + 1) % n) * n + i] = 1.0;
    }
    let x = personalized_pagerank(&TransitionMatrix::from_weights(n, w).unwrap(), 0.15).unwrap();
    assert!(x.iter().all(|v| (v - 0.2).abs() < 1e-10));
    assert!(personalized_pagerank(&TransitionMatrix::from_weights(1, vec![0.0]).unwrap(), 0.0).is_err());
}

fn anomalous_record() -> unitrank_core::dataset::FailureRecord {
    let cat = common::catalog(&["s1", "s2", "s3"], &["h1", "h2"]);
    let mut r = common::random_record("F", &cat, &[("s1", "s2"), ("s2", "s3"), ("s1", "h1"), ("s3", "h2")], &["s2"], 20, 3);
    // a shared step across every metric of s2 and its neighbours makes
    // their series strongly correlated
    for unit in ["s1", "s2", "s3"] {
        let w = r.windows.get_mut(unit).unwrap();
        let amp = if unit == "s2" { 30.0 } else { 10.0 };
        for row in 10..20 {
            for c in 0..w.cols {
                w.data[row * w.cols + c] += amp;
            }
        }
    }
    r
}

#[test]
fn baselines_rank_every_vertex_once() {
    let r = anomalous_record();
    for ranking in [randomwalk_at_metric(&r).unwrap(), randomwalk_at_fi(&r).unwrap()] {
        assert_eq!(ranking.len(), 5);
        let scores: f64 = ranking.entries.iter().map(|e| e.score).sum();
        assert!((scores - 1.0).abs() < 1e-8, "scores are a distribution, sum {scores}");
    }
    assert_eq!(RandomWalkAtMetric.name(), "rw_metric");
    assert_eq!(RandomWalkAtFi.name(), "rw_fi");
    assert_eq!(RandomWalkAtFi.rank(&r).unwrap(), randomwalk_at_fi(&r).unwrap());
}

#[test]
fn correlated_cluster_outranks_isolated_units() {
    let r = anomalous_record();
    let ranking = randomwalk_at_fi(&r).unwrap();
    let top: Vec<&str> = ranking.units().take(3).collect();
    assert!(top.contains(&"s2"), "{top:?}");
}

#[test]
fn isolated_unit_gets_restart_mass_only() {
    let cat = common::catalog(&["s1", "s2"], &["h1"]);
    let r = common::random_record("F", &cat, &[("s1", "s2")], &["s1"], 20, 9);
    let ranking = randomwalk_at_fi(&r).unwrap();
    let scores = ranking.scores();
    // h1 has only a zero row, so it leaks uniformly; its inbound mass is
    // restart plus its own uniform share
    let n = 3.0;
    let s = scores["h1"];
    let expected = 0.15 / n + 0.85 * s / n;
    assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
}

proptest! {
    #[test]
    fn pearson_agrees_with_oracle(
        xy in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let o = pearson_oracle(&x, &y);
        prop_assume!(o.is_finite());
        prop_assert!((pearson(&x, &y) - o).abs() < 1e-8);
    }

    #[test]
    fn pagerank_is_a_distribution(w in proptest::collection::vec(0.0f64..1.0, 36)) {
        let p = TransitionMatrix::from_weights(6, w).unwrap();
        let x = personalized_pagerank(&p, 0.15).unwrap();
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(x.iter().all(|v| *v >= 0.15 / 6.0 - 1e-12));
        let o = pagerank_oracle(&p, 0.15);
        for (a, b) in x.iter().zip(&o) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
