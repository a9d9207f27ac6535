use hge::models::{hge_backward, GradientModel, HgeLayer, HgeModel, LayerOptions, MfModel};
use hge::numerics::{Activation, DenseMatrix, GradCheck, SparseIncidence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two nested levels: `n_fine` fine categories grouped into `n_coarse`.
fn two_levels(rng: &mut ChaCha8Rng, n_items: usize, n_fine: usize, n_coarse: usize) -> Vec<SparseIncidence> {
    let mut fine: Vec<usize> = (0..n_items).map(|i| i % n_fine).collect();
    for i in (1..fine.len()).rev() {
        fine.swap(i, rng.random_range(0..=i));
    }
    let coarse_of_fine: Vec<usize> = (0..n_fine).map(|c| c % n_coarse).collect();
    let coarse = fine.iter().map(|&c| coarse_of_fine[c]).collect();
    vec![
        SparseIncidence::from_assignment(fine, n_fine).unwrap(),
        SparseIncidence::from_assignment(coarse, n_coarse).unwrap(),
    ]
}

fn random_model(seed: u64, n_users: usize, n_items: usize, d: usize, h: usize, opts: [LayerOptions; 2]) -> HgeModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = two_levels(&mut rng, n_items, (n_items / 4).max(2), 2);
    let base = MfModel::new(
        DenseMatrix::uniform(n_users, d, -0.5, 0.5, &mut rng),
        DenseMatrix::uniform(n_items, d, -0.5, 0.5, &mut rng),
    )
    .unwrap();
    let layers = levels
        .into_iter()
        .zip(opts)
        .enumerate()
        .map(|(l, (g, o))| {
            let k = g.n_categories();
            let w1 = DenseMatrix::uniform(k, h, -0.5, 0.5, &mut rng);
            let w2 = DenseMatrix::uniform(n_items, h, -0.5, 0.5, &mut rng);
            HgeLayer::new(l + 1, g, w1, w2, o).unwrap()
        })
        .collect();
    HgeModel::new(base, layers).unwrap()
}

fn random_pairs(seed: u64, n_users: usize, n_items: usize, n: usize) -> (Vec<(u32, u32)>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let pairs = (0..n)
        .map(|_| (rng.random_range(0..n_users) as u32, rng.random_range(0..n_items) as u32))
        .collect();
    let w = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (pairs, w)
}

fn weighted_loss(m: &HgeModel<f64>, pairs: &[(u32, u32)], w: &[f64]) -> f64 {
    let (scores, _) = m.forward_batch(pairs);
    scores.iter().zip(w).map(|(s, w)| s * w).sum()
}

/// Checks every parameter block; returns the worst relative error.
fn check_all_blocks(m: &HgeModel<f64>, pairs: &[(u32, u32)], w: &[f64]) -> f64 {
    let g = hge_backward(m, pairs, w);
    let mut analytic = vec![g.users, g.items];
    for (a, b) in g.layers {
        analytic.push(a);
        analytic.push(b);
    }
    let mut worst = 0.0f64;
    for (b, grad) in analytic.iter().enumerate() {
        let point = m.blocks()[b].clone();
        let report = GradCheck::default()
            .run(
                |p| {
                    let mut probe = m.clone();
                    *probe.blocks_mut()[b] = p.clone();
                    weighted_loss(&probe, pairs, w)
                },
                grad,
                &point,
            )
            .unwrap();
        assert!(report.passed, "block {b}: {report:?}");
        worst = worst.max(report.max_rel_error);
    }
    worst
}

fn options(activation: Activation, skip: bool, masked: bool) -> LayerOptions {
    LayerOptions {
        activation,
        skip,
        masked_softmax: masked,
    }
}

#[test]
fn gradients_match_finite_differences() {
    let leaky = Activation::LeakyRelu { alpha: 0.1 };
    let cases = [
        [LayerOptions::default(), LayerOptions::default()],
        [options(Activation::Relu, false, true), LayerOptions::default()],
        [options(leaky, true, true), options(leaky, false, true)],
        [options(Activation::Relu, true, false), options(leaky, true, true)],
    ];
    for (s, opts) in cases.into_iter().enumerate() {
        let m = random_model(s as u64, 7, 12, 5, 3, opts);
        let (pairs, w) = random_pairs(s as u64, 7, 12, 20);
        check_all_blocks(&m, &pairs, &w);
    }
}

#[test]
fn untouched_categories_get_no_key_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = SparseIncidence::from_assignment((0..16).map(|i| i % 4).collect(), 4).unwrap();
    let base = MfModel::new(
        DenseMatrix::uniform(4, 4, -0.5, 0.5, &mut rng),
        DenseMatrix::uniform(16, 4, -0.5, 0.5, &mut rng),
    )
    .unwrap();
    // positive keys keep every score above the gate
    let w1 = DenseMatrix::uniform(4, 3, 0.1, 1.0, &mut rng);
    let w2 = DenseMatrix::uniform(16, 3, 0.1, 1.0, &mut rng);
    let layer = HgeLayer::new(1, g.clone(), w1, w2, LayerOptions::default()).unwrap();
    let m = HgeModel::new(base, vec![layer]).unwrap();
    let pairs: Vec<(u32, u32)> = g.members(0).iter().map(|&i| (0, i as u32)).collect();
    let w = vec![1.0; pairs.len()];
    let grads = hge_backward(&m, &pairs, &w);
    let (dw1, dw2) = &grads.layers[0];
    for c in 1..g.n_categories() {
        assert!(dw1.row(c).iter().all(|&x| x == 0.0), "category {c}");
        for &j in g.members(c) {
            assert!(dw2.row(j).iter().all(|&x| x == 0.0), "item {j}");
            assert!(grads.items.row(j).iter().all(|&x| x == 0.0), "item {j}");
        }
    }
    assert!(dw1.row(0).iter().any(|&x| x != 0.0));
    // every member of the touched category receives gradient
    for &j in g.members(0) {
        assert!(dw2.row(j).iter().any(|&x| x != 0.0), "item {j}");
    }
}

#[test]
fn disabling_skip_changes_gradients() {
    let on = random_model(11, 5, 10, 4, 3, [LayerOptions::default(); 2]);
    let off = random_model(11, 5, 10, 4, 3, [options(Activation::Relu, false, true); 2]);
    let (pairs, w) = random_pairs(11, 5, 10, 12);
    let g_on = hge_backward(&on, &pairs, &w);
    let g_off = hge_backward(&off, &pairs, &w);
    assert_ne!(g_on.items, g_off.items);
    assert_ne!(g_on.users, g_off.users);
    // frozen from the checked implementation
    let fixture = [g_on.items.get(0, 0), g_off.items.get(0, 0), g_on.layers[0].0.get(0, 0), g_off.layers[0].0.get(0, 0)];
    let expected = FIXTURE_SKIP;
    for (got, want) in fixture.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{fixture:?}");
    }
}

const FIXTURE_SKIP: [f64; 4] = [-0.6383473024749696, -0.14368671600603847, -0.09294929477713895, -0.046474647388569476];

/// Dense oracle: builds each layer's full `I x I` weight matrix.
fn dense_oracle(m: &HgeModel<f64>) -> DenseMatrix<f64> {
    let mut e = m.base.item_embeddings.clone();
    for layer in &m.layers {
        let n = layer.n_items();
        let g = &layer.incidence;
        let act = layer.options.activation;
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let c = g.category_of(i);
            let support: Vec<usize> = if layer.options.masked_softmax {
                (0..n).filter(|&j| g.category_of(j) == c).collect()
            } else {
                (0..n).collect()
            };
            let z: Vec<f64> = support
                .iter()
                .map(|&j| {
                    let s: f64 = (0..layer.hidden()).map(|t| layer.w1.get(c, t) * layer.w2.get(j, t)).sum();
                    act.apply(s)
                })
                .collect();
            let active: Vec<bool> = z.iter().map(|&v| !act.gates() || v > 0.0).collect();
            let max = z.iter().zip(&active).filter(|p| *p.1).map(|p| *p.0).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = z.iter().zip(&active).filter(|p| *p.1).map(|p| (p.0 - max).exp()).sum();
            for ((&j, &v), &a) in support.iter().zip(&z).zip(&active) {
                if a {
                    w.set(i, j, (v - max).exp() / total);
                }
            }
        }
        let out = hge::numerics::matmul(&w, &e).unwrap();
        e = if layer.options.skip {
            DenseMatrix::from_fn(n, e.cols(), |r, c| e.get(r, c) + out.get(r, c))
        } else {
            out
        };
    }
    e
}

#[test]
fn two_layer_toy_matches_dense_oracle() {
    // 6 items: fine categories {0,1}, {2,3}, {4,5}; coarse {0..3}, {4,5}
    let fine = SparseIncidence::from_assignment(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
    let coarse = SparseIncidence::from_assignment(vec![0, 0, 0, 0, 1, 1], 2).unwrap();
    let e = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[2.0, 2.0], &[-1.0, 0.5], &[0.3, 0.3], &[0.0, -2.0]]).unwrap();
    let base = MfModel::new(DenseMatrix::from_rows(&[&[1.0, 1.0]]).unwrap(), e).unwrap();
    let l1 = HgeLayer::new(
        1,
        fine,
        DenseMatrix::from_rows(&[&[1.0], &[1.0], &[-1.0]]).unwrap(),
        DenseMatrix::from_rows(&[&[2f64.ln()], &[-1.0], &[0.5], &[1.0], &[0.2], &[0.1]]).unwrap(),
        LayerOptions::default(),
    )
    .unwrap();
    let l2 = HgeLayer::new(
        2,
        coarse,
        DenseMatrix::from_rows(&[&[1.0], &[0.5]]).unwrap(),
        DenseMatrix::from_rows(&[&[1.0], &[0.0], &[1.0], &[0.0], &[2.0], &[2.0]]).unwrap(),
        LayerOptions::default(),
    )
    .unwrap();
    let m = HgeModel::new(base, vec![l1, l2]).unwrap();
    let got = m.item_embeddings();
    // hand unrolled:
    // layer 1: cat0 weights (1, 0) -> g0 = (1, 0); cat1 scores 0.5, 1 ->
    // weights sigma(-0.5), sigma(0.5); cat2 all gated -> 0.
    let a = 1.0 / (1.0 + 0.5f64.exp());
    let g1 = [a * 2.0 + (1.0 - a) * -1.0, a * 2.0 + (1.0 - a) * 0.5];
    let e1 = [[2.0, 0.0], [1.0, 1.0], [2.0 + g1[0], 2.0 + g1[1]], [-1.0 + g1[0], 0.5 + g1[1]], [0.3, 0.3], [0.0, -2.0]];
    // layer 2: cat0 scores (1, 0, 1, 0) -> items 0 and 2 share half each;
    // cat1 scores (1, 1) -> mean of items 4 and 5.
    let c0 = [(e1[0][0] + e1[2][0]) / 2.0, (e1[0][1] + e1[2][1]) / 2.0];
    let c1 = [(e1[4][0] + e1[5][0]) / 2.0, (e1[4][1] + e1[5][1]) / 2.0];
    for i in 0..6 {
        let g = if i < 4 { c0 } else { c1 };
        for k in 0..2 {
            let want = e1[i][k] + g[k];
            assert!((got.get(i, k) - want).abs() < 1e-12, "item {i} dim {k}");
        }
    }
    let oracle = dense_oracle(&m);
    for (x, y) in got.as_slice().iter().zip(oracle.as_slice()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn random_models_match_dense_oracle() {
    let leaky = Activation::LeakyRelu { alpha: 0.2 };
    for s in 0..6u64 {
        let opts = [options(Activation::Relu, s % 2 == 0, s % 3 != 0), options(leaky, s % 2 == 1, true)];
        let m = random_model(100 + s, 3, 14, 4, 3, opts);
        let got = m.item_embeddings();
        let oracle = dense_oracle(&m);
        for (x, y) in got.as_slice().iter().zip(oracle.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn fully_gated_model_reproduces_mf_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = MfModel::<f32>::random_scaled(6, 10, 4, 1.0, &mut rng);
    let g = SparseIncidence::from_assignment((0..10).map(|i| i % 3).collect(), 3).unwrap();
    // nonnegative category keys against nonpositive item keys: every score <= 0
    let w1 = DenseMatrix::uniform(3, 2, 0.0, 1.0, &mut rng);
    let w2 = DenseMatrix::uniform(10, 2, -1.0, 0.0, &mut rng);
    let layer = HgeLayer::new(1, g, w1, w2, LayerOptions::default()).unwrap();
    let m = HgeModel::new(base.clone(), vec![layer]).unwrap();
    for u in 0..6 {
        for i in 0..10 {
            assert_eq!(m.score(u, i).unwrap().to_bits(), base.score(u, i).unwrap().to_bits());
        }
    }
}

#[test]
fn param_count_matches_enumeration() {
    let m = random_model(1, 10, 20, 4, 3, [LayerOptions::default(); 2]);
    assert_eq!(m.param_count(), m.enumerate_params());
    let k: usize = m.layers.iter().map(|l| l.n_categories()).sum();
    assert_eq!(m.param_count(), (10 + 20) * 4 + (2 * 20 + k) * 3);
}

#[test]
fn large_layer_param_count() {
    let g = SparseIncidence::from_assignment((0..100_000).map(|i| i % 500).collect(), 500).unwrap();
    let layer = HgeLayer::new(1, g, DenseMatrix::<f32>::zeros(500, 64), DenseMatrix::zeros(100_000, 64), LayerOptions::default()).unwrap();
    assert_eq!(layer.param_count(), 6_432_000);
    assert!(layer.param_count() < 100_000 * 500);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layer_output_is_constant_within_category_and_in_the_hull(seed in 0u64..10_000, leaky in any::<bool>()) {
        let act = if leaky { Activation::LeakyRelu { alpha: 0.3 } } else { Activation::Relu };
        let m = random_model(seed, 2, 15, 3, 2, [options(act, true, true); 2]);
        let layer = &m.layers[0];
        let e = &m.base.item_embeddings;
        let out = layer.forward(e).unwrap();
        let g = &layer.incidence;
        for c in 0..g.n_categories() {
            let members = g.members(c);
            let first = out.row(members[0]);
            for &i in members {
                prop_assert_eq!(out.row(i), first);
            }
            let cache = layer.forward_cached(e).unwrap();
            let weights: Vec<(usize, f64)> = cache.weights(c).filter(|w| w.1 > 0.0).collect();
            if weights.is_empty() {
                prop_assert!(first.iter().all(|&x| x == 0.0));
                continue;
            }
            let total: f64 = weights.iter().map(|w| w.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for k in 0..e.cols() {
                let lo = weights.iter().map(|w| e.get(w.0, k)).fold(f64::INFINITY, f64::min);
                let hi = weights.iter().map(|w| e.get(w.0, k)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(first[k] >= lo - 1e-12 && first[k] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn gradcheck_on_small_instances(seed in 0u64..1_000) {
        let m = random_model(seed, 4, 9, 3, 2, [LayerOptions::default(), options(Activation::Relu, false, true)]);
        let (pairs, w) = random_pairs(seed, 4, 9, 8);
        check_all_blocks(&m, &pairs, &w);
    }
}
