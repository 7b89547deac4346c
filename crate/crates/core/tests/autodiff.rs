use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitrank_core::autodiff::{Adam, AdamConfig, Neighborhoods, ParamStore, Tape, Tensor, Var};

type Build = dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn eval(inputs: &[Tensor<f64>], build: &Build) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = build(&mut tape, &vars);
    tape.value(out).item()
}

/// Relative error between the tape gradient and central differences.
fn fd_error(inputs: &[Tensor<f64>], build: &Build, h: f64) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.of(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
        for i in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let numeric = (eval(&plus, build) - eval(&minus, build)) / (2.0 * h);
            diff += (analytic[i] - numeric).powi(2);
            scale += analytic[i].powi(2) + numeric.powi(2);
        }
    }
    diff.sqrt() / scale.sqrt().max(1e-300)
}

fn sq_loss(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target: Vec<f64> = (0..tape.value(y).len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    tape.squared_error(y, &target).unwrap()
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn dense_identity_and_constant() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 4.0]).unwrap());
    let mut eye = vec![0.0; 9];
    for i in 0..3 {
        eye[i * 3 + i] = 1.0;
    }
    let w = tape.input(Tensor::new(vec![3, 3], eye).unwrap());
    let b = tape.input(Tensor::zeros(&[3]));
    let y = tape.dense(x, w, b).unwrap();
    assert_eq!(tape.value(y).data(), tape.value(x).data());
    let w0 = tape.input(Tensor::zeros(&[3, 2]));
    let b2 = tape.input(Tensor::new(vec![2], vec![0.25, -7.0]).unwrap());
    let y = tape.dense(x, w0, b2).unwrap();
    assert_eq!(tape.value(y).data(), &[0.25, -7.0, 0.25, -7.0]);
}

#[test]
fn dense_rejects_shape_mismatch() {
    let mut tape = Tape::<f64>::new();
    let x = tape.input(Tensor::zeros(&[2, 3]));
    let w = tape.input(Tensor::zeros(&[4, 2]));
    let b = tape.input(Tensor::zeros(&[2]));
    assert!(tape.dense(x, w, b).is_err());
}

#[test]
fn dense_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs = [random_tensor(&mut rng, &[4, 3]), random_tensor(&mut rng, &[3, 5]), random_tensor(&mut rng, &[5])];
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.dense(v[0], v[1], v[2]).unwrap();
        sq_loss(t, y, 9)
    };
    assert!(fd_error(&inputs, &build, 1e-5) < 1e-6);
}

#[test]
fn conv1d_trivial_kernels() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::filled(&[6, 1], 1.0));
    let k = tape.input(Tensor::filled(&[3, 1, 1], 1.0));
    let b = tape.input(Tensor::zeros(&[1]));
    let y = tape.conv1d(x, k, b).unwrap();
    assert_eq!(tape.value(y).shape(), &[4, 1]);
    assert!(tape.value(y).data().iter().all(|&v| v == 3.0));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs = random_tensor(&mut rng, &[5, 2]);
    let x = tape.input(xs.clone());
    let k = tape.input(Tensor::new(vec![1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let b = tape.input(Tensor::zeros(&[2]));
    let y = tape.conv1d(x, k, b).unwrap();
    assert_eq!(tape.value(y).data(), xs.data());
}

#[test]
fn conv1d_rejects_wide_kernel() {
    let mut tape = Tape::<f64>::new();
    let x = tape.input(Tensor::zeros(&[2, 1]));
    let k = tape.input(Tensor::zeros(&[3, 1, 1]));
    let b = tape.input(Tensor::zeros(&[1]));
    assert!(tape.conv1d(x, k, b).is_err());
}

#[test]
fn conv1d_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = [random_tensor(&mut rng, &[2, 7, 3]), random_tensor(&mut rng, &[3, 3, 4]), random_tensor(&mut rng, &[4])];
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.conv1d(v[0], v[1], v[2]).unwrap();
        sq_loss(t, y, 10)
    };
    assert!(fd_error(&inputs, &build, 1e-5) < 1e-6);
}

#[test]
fn conv1d_transpose_restores_length_and_copies_kernel() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::zeros(&[20, 2]));
    let k = tape.input(Tensor::zeros(&[3, 2, 8]));
    let b = tape.input(Tensor::zeros(&[8]));
    let y = tape.conv1d(x, k, b).unwrap();
    let bt = tape.input(Tensor::zeros(&[2]));
    let back = tape.conv1d_transpose(y, k, bt).unwrap();
    assert_eq!(tape.value(back).shape(), &[20, 2]);

    // Impulse at position 2 of a length-4 single-channel input.
    let mut imp = vec![0.0; 4];
    imp[2] = 1.0;
    let x = tape.input(Tensor::new(vec![4, 1], imp).unwrap());
    let k = tape.input(Tensor::new(vec![3, 1, 1], vec![0.5, -1.0, 2.0]).unwrap());
    let b = tape.input(Tensor::zeros(&[1]));
    let y = tape.conv1d_transpose(x, k, b).unwrap();
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 0.5, -1.0, 2.0, 0.0]);
}

#[test]
fn conv1d_transpose_is_adjoint_of_conv1d() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let (w, ci, co, kw) = (12, 3, 5, 4);
        let xs = random_tensor(&mut rng, &[w, ci]);
        let ys = random_tensor(&mut rng, &[w - kw + 1, co]);
        let ks = random_tensor(&mut rng, &[kw, ci, co]);
        // Reorder [k, ci, co] into the transpose layout [k, ci(out), co(in)].
        let mut tape = Tape::new();
        let x = tape.input(xs.clone());
        let k = tape.input(ks.clone());
        let zero_co = tape.input(Tensor::zeros(&[co]));
        let cx = tape.conv1d(x, k, zero_co).unwrap();
        let y = tape.input(ys.clone());
        let zero_ci = tape.input(Tensor::zeros(&[ci]));
        let cty = tape.conv1d_transpose(y, k, zero_ci).unwrap();
        let lhs = inner(tape.value(cx).data(), ys.data());
        let rhs = inner(xs.data(), tape.value(cty).data());
        assert!((lhs - rhs).abs() / lhs.abs().max(1e-12) < 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn conv1d_transpose_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs = [random_tensor(&mut rng, &[2, 5, 3]), random_tensor(&mut rng, &[3, 2, 3]), random_tensor(&mut rng, &[2])];
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.conv1d_transpose(v[0], v[1], v[2]).unwrap();
        sq_loss(t, y, 11)
    };
    assert!(fd_error(&inputs, &build, 1e-5) < 1e-6);
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn gru_zero_input_stays_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tape = Tape::new();
    let x = tape.input(Tensor::zeros(&[20, 2]));
    let wi = tape.input(random_tensor(&mut rng, &[2, 12]));
    let wh = tape.input(random_tensor(&mut rng, &[4, 12]));
    let bi = tape.input(Tensor::zeros(&[12]));
    let bh = tape.input(Tensor::zeros(&[12]));
    let h = tape.gru(x, wi, wh, bi, bh).unwrap();
    assert_eq!(tape.value(h).shape(), &[20, 4]);
    assert!(tape.value(h).data().iter().all(|&v| v == 0.0));
}

#[test]
fn gru_single_step_equals_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (d, hd) = (3, 2);
    let xs = random_tensor(&mut rng, &[1, d]);
    let wi = random_tensor(&mut rng, &[d, 3 * hd]);
    let wh = random_tensor(&mut rng, &[hd, 3 * hd]);
    let bi = random_tensor(&mut rng, &[3 * hd]);
    let bh = random_tensor(&mut rng, &[3 * hd]);
    let mut tape = Tape::new();
    let vars: Vec<Var> = [&xs, &wi, &wh, &bi, &bh].iter().map(|t| tape.input((*t).clone())).collect();
    let h = tape.gru(vars[0], vars[1], vars[2], vars[3], vars[4]).unwrap();
    // With h0 = 0 the recurrent product vanishes and only b_hh remains.
    for j in 0..hd {
        let pre = |g: usize| (0..d).map(|k| xs.data()[k] * wi.data()[k * 3 * hd + g * hd + j]).sum::<f64>() + bi.data()[g * hd + j];
        let r = sigmoid(pre(0) + bh.data()[j]);
        let z = sigmoid(pre(1) + bh.data()[hd + j]);
        let n = (pre(2) + r * bh.data()[2 * hd + j]).tanh();
        let expected = (1.0 - z) * n;
        assert!((tape.value(h).data()[j] - expected).abs() < 1e-14);
    }
}

#[test]
fn gru_gradient_through_twenty_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let inputs = [
        random_tensor(&mut rng, &[2, 20, 3]),
        random_tensor(&mut rng, &[3, 12]),
        random_tensor(&mut rng, &[4, 12]),
        random_tensor(&mut rng, &[12]),
        random_tensor(&mut rng, &[12]),
    ];
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.gru(v[0], v[1], v[2], v[3], v[4]).unwrap();
        sq_loss(t, y, 12)
    };
    assert!(fd_error(&inputs, &build, 1e-5) < 1e-5);
}

/// Standard normal CDF by composite Simpson quadrature of the density on
/// `[0, x]`; shares nothing with the `erf`-based implementation.
fn phi_quadrature(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

#[test]
fn activations_at_reference_points() {
    let mut tape = Tape::new();
    let x = tape.input(Tensor::new(vec![3], vec![0.0, 3.0, -1.5]).unwrap());
    let g = tape.gelu(x);
    let s = tape.sigmoid(x);
    assert_eq!(tape.value(g).data()[0], 0.0);
    assert_eq!(tape.value(s).data()[0], 0.5);
    let oracle = 3.0 * phi_quadrature(3.0);
    assert!((tape.value(g).data()[1] - oracle).abs() < 1e-10);
    assert!((tape.value(g).data()[1] - 2.9960).abs() < 5e-5);
    let oracle_neg = -1.5 * phi_quadrature(-1.5);
    assert!((tape.value(g).data()[2] - oracle_neg).abs() < 1e-10);

    let e = tape.input(Tensor::filled(&[2, 4], 3.7));
    let sm = tape.softmax(e);
    assert!(tape.value(sm).data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn elementwise_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let inputs = [random_tensor(&mut rng, &[3, 4]), random_tensor(&mut rng, &[3, 4])];
    let build = |t: &mut Tape<f64>, v: &[Var]| {
        let a = t.gelu(v[0]);
        let b = t.sigmoid(v[1]);
        let c = t.add(a, b).unwrap();
        let d = t.tanh(c);
        let e = t.leaky_relu(d, 0.2);
        let f = t.softmax(e);
        let g = t.scale(f, 1.7);
        let h = t.concat_cols(&[g, v[0]]).unwrap();
        let i = t.gather_rows(h, &[2, 0, 2]).unwrap();
        let j = t.reshape(i, &[24]).unwrap();
        let k = t.concat_rows(&[j, j]).unwrap();
        sq_loss(t, k, 14)
    };
    assert!(fd_error(&inputs, &build, 1e-5) < 1e-6);
}

#[test]
fn weighted_bce_gradient() {
    let inputs = [Tensor::new(vec![4], vec![0.2, 0.7, 0.45, 0.9]).unwrap()];
    let build = |t: &mut Tape<f64>, v: &[Var]| t.weighted_bce(v[0], &[1.0, 0.0, 0.0, 1.0], &[0.4, 0.1, 0.1, 0.4]).unwrap();
    assert!(fd_error(&inputs, &build, 1e-6) < 1e-8);
}

fn ring(n: usize) -> Neighborhoods {
    let adj: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
    Neighborhoods::closed(&adj).unwrap()
}

#[test]
fn graph_attention_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let nb = Arc::new(Neighborhoods::disjoint_union(&[ring(5), Neighborhoods::closed(&[vec![]]).unwrap()]));
    let inputs = [random_tensor(&mut rng, &[6, 6]), random_tensor(&mut rng, &[2, 6])];
    let build = move |t: &mut Tape<f64>, v: &[Var]| {
        let y = t.graph_attention(v[0], v[1], nb.clone(), 2, 0.2).unwrap();
        sq_loss(t, y, 16)
    };
    assert!(fd_error(&inputs, &build, 1e-5) < 1e-6);
}

#[test]
fn graph_attention_isolated_vertex_and_equal_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let nb = Arc::new(Neighborhoods::closed(&[vec![1, 2], vec![0], vec![0], vec![]]).unwrap());
    let mut tape = Tape::new();
    let g = tape.input(random_tensor(&mut rng, &[4, 4]));
    let a = tape.input(random_tensor(&mut rng, &[2, 4]));
    let y = tape.graph_attention(g, a, nb.clone(), 2, 0.2).unwrap();
    assert_eq!(&tape.value(y).data()[12..16], &tape.value(g).data()[12..16]);

    // Identical rows: any convex combination returns the same row.
    let same = tape.input(Tensor::new(vec![4, 4], [0.3, -0.2, 1.0, 0.5].repeat(4)).unwrap());
    let y = tape.graph_attention(same, a, nb, 2, 0.2).unwrap();
    for (o, s) in tape.value(y).data().iter().zip(tape.value(same).data()) {
        assert!((o - s).abs() < 1e-12);
    }
}

#[test]
fn adam_zero_gradient_without_decay_is_noop() {
    let mut store = ParamStore::new();
    store.insert("w", Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap());
    let before = store.clone();
    let mut adam = Adam::new(AdamConfig { weight_decay: 0.0, ..AdamConfig::default() });
    for _ in 0..3 {
        adam.step(&mut store).unwrap();
    }
    assert_eq!(store.value("w").unwrap(), before.value("w").unwrap());
}

#[test]
fn adam_clips_global_norm() {
    let mut store = ParamStore::<f64>::new();
    store.insert("a", Tensor::zeros(&[1]));
    store.insert("b", Tensor::zeros(&[1]));
    let mut g = std::collections::BTreeMap::new();
    g.insert("a".to_string(), Tensor::new(vec![1], vec![6.0]).unwrap());
    g.insert("b".to_string(), Tensor::new(vec![1], vec![8.0]).unwrap());
    store.accumulate(&g).unwrap();
    assert!((store.grad_norm() - 10.0).abs() < 1e-12);
    let mut adam = Adam::new(AdamConfig::default());
    adam.step(&mut store).unwrap();
    // First moment after one step is (1 - beta1) * clipped gradient.
    let (m_a, _) = adam.moments("a").unwrap();
    let (m_b, _) = adam.moments("b").unwrap();
    assert!((m_a.data()[0] - 0.1 * 0.6).abs() < 1e-12);
    assert!((m_b.data()[0] - 0.1 * 0.8).abs() < 1e-12);
}

#[test]
fn adam_single_step_matches_hand_formula() {
    let (w0, g) = (0.8_f64, 0.3_f64);
    let mut store = ParamStore::new();
    store.insert("w", Tensor::scalar(w0));
    let mut grads = std::collections::BTreeMap::new();
    grads.insert("w".to_string(), Tensor::scalar(g));
    store.accumulate(&grads).unwrap();
    let mut adam = Adam::new(AdamConfig::default());
    adam.step(&mut store).unwrap();
    // Hand evaluation: m = 0.1 g, v = 0.001 g^2, bias-corrected m_hat = g,
    // v_hat = g^2, so the Adam direction is g / (|g| + eps).
    let m_hat = (0.1 * g) / (1.0 - 0.9);
    let v_hat = (0.001 * g * g) / (1.0 - 0.999);
    let expected = w0 - 0.01 * (0.01 * w0 + m_hat / (v_hat.sqrt() + 1e-8));
    assert!((store.value("w").unwrap().item() - expected).abs() < 1e-15);
}

#[test]
fn adam_names_non_finite_parameter() {
    let mut store = ParamStore::new();
    store.insert("layer.bias", Tensor::scalar(0.0));
    let mut grads = std::collections::BTreeMap::new();
    grads.insert("layer.bias".to_string(), Tensor::scalar(f64::NAN));
    store.accumulate(&grads).unwrap();
    let err = Adam::new(AdamConfig::default()).step(&mut store).unwrap_err();
    assert!(err.to_string().contains("layer.bias"));
}

#[test]
fn repeated_params_accumulate_gradient() {
    let mut store = ParamStore::new();
    store.insert("w", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    store.insert("b", Tensor::zeros(&[2]));
    let mut tape = Tape::new();
    let x = tape.input(Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap());
    let w = tape.param(&store, "w").unwrap();
    let b = tape.param(&store, "b").unwrap();
    let h = tape.dense(x, w, b).unwrap();
    let w2 = tape.param(&store, "w").unwrap();
    assert_eq!(w, w2);
    let y = tape.dense(h, w2, b).unwrap();
    let s = tape.sum(y);
    let grads = tape.backward(s).unwrap();
    // db = 1 from the outer layer plus W . 1 = [3, 7] through the inner one.
    assert_eq!(grads.params()["b"].data(), &[4.0, 8.0]);
}

fn train_steps(seed: u64) -> ParamStore<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    store.insert("w", unitrank_core::autodiff::init::xavier_uniform(&[3, 2], 3, 2, &mut rng));
    store.insert("b", Tensor::zeros(&[2]));
    let x = random_tensor(&mut rng, &[5, 3]);
    let mut adam = Adam::new(AdamConfig::default());
    for _ in 0..25 {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let w = tape.param(&store, "w").unwrap();
        let b = tape.param(&store, "b").unwrap();
        let y = tape.dense(xv, w, b).unwrap();
        let l = tape.squared_error(y, &[0.5; 10]).unwrap();
        let g = tape.backward(l).unwrap();
        store.zero_grad();
        store.accumulate(g.params()).unwrap();
        adam.step(&mut store).unwrap();
    }
    store
}

#[test]
fn identical_seeds_give_identical_parameters() {
    assert_eq!(train_steps(3), train_steps(3));
    assert_ne!(train_steps(3), train_steps(4));
}

#[test]
fn orthogonal_init_is_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let q: Vec<f64> = unitrank_core::autodiff::init::orthogonal(8, &mut rng);
    for i in 0..8 {
        for j in 0..8 {
            let d: f64 = (0..8).map(|k| q[k * 8 + i] * q[k * 8 + j]).sum();
            assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn softmax_rows_sum_to_one(v in prop::collection::vec(-50.0f64..50.0, 12)) {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(vec![3, 4], v).unwrap());
        let y = tape.softmax(x);
        for row in tape.value(y).data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn dense_conv_gru_fd_random(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = [
            random_tensor(&mut rng, &[6, 2]),
            random_tensor(&mut rng, &[2, 9]),
            random_tensor(&mut rng, &[3, 9]),
            random_tensor(&mut rng, &[9]),
            random_tensor(&mut rng, &[9]),
            random_tensor(&mut rng, &[2, 3, 2]),
            random_tensor(&mut rng, &[2]),
        ];
        let build = |t: &mut Tape<f64>, v: &[Var]| {
            let h = t.gru(v[0], v[1], v[2], v[3], v[4]).unwrap();
            let c = t.conv1d(h, v[5], v[6]).unwrap();
            let g = t.gelu(c);
            sq_loss(t, g, 99)
        };
        prop_assert!(fd_error(&inputs, &build, 1e-5) < 1e-5);
    }
}
