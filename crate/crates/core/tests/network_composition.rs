mod common;

use kan_credit::network::{silu, KanLayer, KanNetwork};
use kan_credit::spline::KnotVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arch() -> impl Strategy<Value = (Vec<usize>, usize, usize, u64)> {
    (
        prop::collection::vec(1usize..6, 1..3),
        1usize..12,
        1usize..5,
        any::<u64>(),
    )
        .prop_map(|(mut hidden, g, k, seed)| {
            hidden.push(1);
            (hidden, g, k, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn network_is_composition_of_layers((widths, g, k, seed) in arch(), xs in prop::collection::vec(-2.0f64..2.0, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = KanNetwork::init(&widths, g, k, seed).unwrap();
        common::randomize(&mut net, 0.8, &mut rng);
        let x: Vec<f64> = xs.iter().cycle().take(widths[0]).copied().collect();

        let mut h = x.clone();
        for layer in &net.layers {
            h = layer.forward(&h).unwrap().0;
        }
        prop_assert_eq!(h.len(), 1);
        let logit = net.logit(&x).unwrap();
        prop_assert!((logit - h[0]).abs() < 1e-12);

        let trace = net.forward(&x).unwrap();
        prop_assert_eq!(trace.logit, logit);
        for (l, lt) in trace.layers.iter().enumerate() {
            let layer = &net.layers[l];
            for q in 0..layer.n_out {
                let direct: f64 = (0..layer.n_in)
                    .map(|p| layer.edge(q, p).forward(&layer.knots, lt.inputs[p]).unwrap())
                    .sum();
                prop_assert!((lt.node_sums[q] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clamp_stability(seed in any::<u64>(), beyond in 0.0f64..50.0, j in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = KanNetwork::init(&[4, 1], 7, 3, seed).unwrap();
        common::randomize(&mut net, 0.5, &mut rng);
        // the spline term saturates outside the grid, only the silu term moves
        let mut at_edge = vec![0.1; 4];
        at_edge[j] = 1.0;
        let mut outside = at_edge.clone();
        outside[j] = 1.0 + beyond;
        let edge = net.layers[0].edge(0, j);
        let expected = edge.w_b * (silu(1.0 + beyond) - silu(1.0));
        let delta = net.logit(&outside).unwrap() - net.logit(&at_edge).unwrap();
        prop_assert!((delta - expected).abs() < 1e-9 * (1.0 + expected.abs()));
        prop_assert!(net.logit(&outside).unwrap().is_finite());
    }
}

#[test]
fn edge_additivity_in_a_two_input_layer() {
    let knots = KnotVector::new(-1.0, 1.0, 5, 3).unwrap();
    let mut layer = KanLayer::zeros(2, 1, knots.clone());
    layer.edge_mut(0, 0).spline.coefficients = vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1, 0.2, 0.05];
    layer.edge_mut(0, 1).w_b = -0.7;
    layer.edge_mut(0, 1).w_s = 0.4;
    layer.edge_mut(0, 1).spline.coefficients = vec![1.0; 8];
    let x = [0.35, -0.6];
    let (y, edges) = layer.forward(&x).unwrap();
    let a = layer.edge(0, 0).forward(&knots, x[0]).unwrap();
    let b = layer.edge(0, 1).forward(&knots, x[1]).unwrap();
    assert_eq!(edges, vec![a, b]);
    assert_eq!(y[0], a + b);
    // unit coefficients sum to one by partition of unity
    assert!((b - (-0.7 * silu(-0.6) + 0.4)).abs() < 1e-14);
}

#[test]
fn all_zero_network_has_zero_logit() {
    let net = KanNetwork::zeros(&[10, 1], 30, 4).unwrap();
    for x in [[0.0; 10], [1.0; 10], [-5.0; 10]] {
        let mut net = net.clone();
        for e in &mut net.layers[0].edges {
            e.w_b = 0.0;
            e.w_s = 0.0;
        }
        assert_eq!(net.logit(&x).unwrap(), 0.0);
        assert_eq!(net.predict_proba(&x).unwrap(), 0.5);
    }
}

#[test]
fn initialization_is_deterministic_in_the_seed() {
    let a = KanNetwork::init(&[10, 4, 1], 30, 4, 7).unwrap();
    let b = KanNetwork::init(&[10, 4, 1], 30, 4, 7).unwrap();
    let c = KanNetwork::init(&[10, 4, 1], 30, 4, 8).unwrap();
    assert_eq!(a.params(), b.params());
    assert_ne!(a.params(), c.params());
    assert!(a.params().iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn batch_logits_match_single_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = KanNetwork::init(&[3, 2, 1], 6, 2, 11).unwrap();
    let rows = common::random_rows(600, 3, &mut rng);
    let batch = net.logits(&rows).unwrap();
    for (row, z) in rows.iter().zip(&batch) {
        assert_eq!(net.logit(row).unwrap(), *z);
    }
}
