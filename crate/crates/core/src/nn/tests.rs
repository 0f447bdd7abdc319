use approx::assert_relative_eq;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

use super::*;
use crate::rng::stream_rng;
use crate::scheme::{build_plan, Distribution, FanMode};

fn he(distribution: Distribution) -> InitScheme {
    InitScheme::He {
        distribution,
        fan_mode: FanMode::FanIn,
    }
}

fn seeded_net(input: usize, widths: Vec<usize>, seed: u64) -> DenseNetwork {
    let spec = NetworkSpec::new(input, widths).unwrap();
    let plan = build_plan(&spec, &he(Distribution::Normal)).unwrap();
    init_network(&spec, &plan, seed).unwrap()
}

fn normal_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    sample_matrix(&mut stream_rng(seed, 7), rows, cols, 1.0, Distribution::Normal).unwrap()
}

fn labels_for(rows: usize, classes: usize) -> Vec<usize> {
    (0..rows).map(|i| (i * 7 + 3) % classes).collect()
}

fn provenance() -> InitProvenance {
    InitProvenance {
        scheme: he(Distribution::Normal),
        seed: 0,
    }
}

#[test]
fn identity_layer_clips_negative_input() {
    let net = DenseNetwork::from_parts(
        vec![Array2::eye(2), Array2::eye(2)],
        vec![Array1::zeros(2), Array1::zeros(2)],
        provenance(),
    )
    .unwrap();
    let acts = net.forward(array![[1.0, -1.0]].view()).unwrap();
    assert_eq!(acts.inputs[1], array![[1.0, 0.0]]);
    assert_eq!(acts.logits(), &array![[1.0, 0.0]]);
}

#[test]
fn zero_weights_give_zero_logits() {
    let spec = NetworkSpec::new(3, vec![4, 4, 2]).unwrap();
    let plan = build_plan(&spec, &he(Distribution::Normal))
        .unwrap()
        .with_constant_variance(0.0);
    let net = init_network(&spec, &plan, 5).unwrap();
    assert!(net.weights.iter().all(|w| w.iter().all(|&x| x == 0.0)));
    let logits = net.predict(normal_batch(6, 3, 1).view()).unwrap();
    assert!(logits.iter().all(|&x| x == 0.0));
}

#[test]
fn forward_matches_loop_oracle() {
    let net = seeded_net(5, vec![7, 6, 3], 11);
    let batch = normal_batch(4, 5, 2);
    let logits = net.forward(batch.view()).unwrap().logits().clone();
    for (r, sample) in batch.rows().into_iter().enumerate() {
        let mut x: Vec<f64> = sample.to_vec();
        for (l, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
            let mut y = vec![0.0; w.nrows()];
            for i in 0..w.nrows() {
                y[i] = b[i] + (0..w.ncols()).map(|j| w[[i, j]] * x[j]).sum::<f64>();
            }
            x = if l + 1 < net.depth() {
                y.into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect()
            } else {
                y
            };
        }
        for (c, v) in x.iter().enumerate() {
            assert_relative_eq!(logits[[r, c]], *v, max_relative = 1e-12, epsilon = 1e-14);
        }
    }
    assert_eq!(net.predict(batch.view()).unwrap(), logits);
}

#[test]
fn forward_rejects_wrong_width() {
    let net = seeded_net(5, vec![4, 3], 1);
    assert!(net.forward(normal_batch(2, 4, 0).view()).is_err());
}

#[test]
fn init_is_deterministic() {
    let a = seeded_net(8, vec![8, 8, 4], 99);
    let b = seeded_net(8, vec![8, 8, 4], 99);
    assert_eq!(a, b);
    assert!(a.biases.iter().all(|b| b.iter().all(|&x| x == 0.0)));
    assert_ne!(a, seeded_net(8, vec![8, 8, 4], 100));
}

#[test]
fn init_rejects_mismatched_plan() {
    let spec = NetworkSpec::uniform(8, 3).unwrap();
    let other = NetworkSpec::uniform(8, 4).unwrap();
    let plan = build_plan(&other, &he(Distribution::Normal)).unwrap();
    assert!(init_network(&spec, &plan, 0).is_err());
}

#[test]
fn deep_he_layers_match_planned_variance() {
    for dist in [Distribution::Normal, Distribution::Uniform] {
        let spec = NetworkSpec::uniform(64, 54).unwrap();
        let plan = build_plan(&spec, &he(dist)).unwrap();
        let net = init_network(&spec, &plan, 3).unwrap();
        for (l, var) in net.weight_variances().into_iter().enumerate() {
            assert!(
                (var / 0.03125 - 1.0).abs() < 0.15,
                "{dist:?} layer {} variance {var}",
                l + 1
            );
        }
    }
}

#[test]
fn uniform_logits_cost_ln_classes() {
    let logits = Array2::from_elem((5, 10), 0.7);
    assert_relative_eq!(
        loss_softmax_ce(&logits, &labels_for(5, 10)).unwrap(),
        10f64.ln(),
        max_relative = 1e-14
    );
}

#[test]
fn correct_margin_lowers_loss() {
    let mut logits = Array2::zeros((1, 10));
    logits[[0, 4]] = 3.0;
    let uniform = loss_softmax_ce(&Array2::zeros((1, 10)), &[4]).unwrap();
    assert!(loss_softmax_ce(&logits, &[4]).unwrap() < uniform);
}

#[test]
fn loss_matches_direct_formula() {
    let logits = normal_batch(9, 6, 4) * 3.0;
    let labels = labels_for(9, 6);
    let oracle = -labels
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            let z: f64 = logits.row(r).iter().map(|v| v.exp()).sum();
            (logits[[r, y]].exp() / z).ln()
        })
        .sum::<f64>()
        / 9.0;
    assert_relative_eq!(
        loss_softmax_ce(&logits, &labels).unwrap(),
        oracle,
        max_relative = 1e-12
    );
}

#[test]
fn loss_is_stable_for_huge_logits() {
    let logits = array![[1000.0, 0.0], [0.0, -1000.0]];
    let loss = loss_softmax_ce(&logits, &[0, 1]).unwrap();
    assert!(loss.is_finite());
    assert_relative_eq!(loss, 500.0, max_relative = 1e-12);
}

#[test]
fn loss_rejects_bad_labels() {
    let logits = Array2::zeros((2, 3));
    assert!(loss_softmax_ce(&logits, &[0, 3]).is_err());
    assert!(loss_softmax_ce(&logits, &[0]).is_err());
}

#[test]
fn saturated_softmax_has_vanishing_gradients() {
    // one hidden unit that copies the input and an output layer with a huge
    // margin on the correct class
    let w1 = array![[1.0]];
    let w2 = array![[60.0], [-60.0]];
    let net = DenseNetwork::from_parts(
        vec![w1, w2],
        vec![Array1::zeros(1), Array1::zeros(2)],
        provenance(),
    )
    .unwrap();
    let batch = array![[1.0], [2.0], [0.5]];
    let acts = net.forward(batch.view()).unwrap();
    let grads = net.backward(&acts, &[0, 0, 0]).unwrap();
    let norm: f64 = grads
        .weights
        .iter()
        .flat_map(|g| g.iter())
        .chain(grads.biases.iter().flat_map(|g| g.iter()))
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    assert!(norm < 1e-20, "gradient norm {norm}");
}

#[test]
fn dead_layer_blocks_earlier_gradients() {
    let mut net = seeded_net(4, vec![6, 5, 3], 8);
    // every unit of layer 2 is pushed far negative
    net.biases[1].fill(-1e3);
    let batch = normal_batch(8, 4, 3);
    let acts = net.forward(batch.view()).unwrap();
    assert!(acts.pre[1].iter().all(|&y| y < 0.0));
    let grads = net.backward(&acts, &labels_for(8, 3)).unwrap();
    for l in 0..2 {
        assert!(grads.weights[l].iter().all(|&g| g == 0.0), "layer {}", l + 1);
        assert!(grads.biases[l].iter().all(|&g| g == 0.0));
    }
    assert!(grads.pre_grads[1].iter().all(|&g| g == 0.0));
    assert!(grads.biases[2].iter().any(|&g| g != 0.0));
}

#[test]
fn backward_rejects_foreign_activations() {
    let net = seeded_net(4, vec![6, 3], 1);
    let other = seeded_net(4, vec![5, 3], 1);
    let acts = other.forward(normal_batch(2, 4, 0).view()).unwrap();
    assert!(net.backward(&acts, &[0, 1]).is_err());
}

#[test]
fn gradcheck_small_net() {
    let net = seeded_net(4, vec![4, 4], 21);
    let batch = normal_batch(8, 4, 5);
    let err = gradcheck_finite_diff(&net, batch.view(), &labels_for(8, 4), 1e-5).unwrap();
    assert!(err < 1e-5, "max relative error {err}");
}

#[test]
fn gradcheck_zero_loss_is_well_defined() {
    let spec = NetworkSpec::new(3, vec![4, 2]).unwrap();
    let plan = build_plan(&spec, &he(Distribution::Normal))
        .unwrap()
        .with_constant_variance(0.0);
    let net = init_network(&spec, &plan, 0).unwrap();
    // all-zero network: hidden gradients are exactly zero on both sides
    let err = gradcheck_finite_diff(&net, normal_batch(4, 3, 1).view(), &[0, 1, 0, 1], 1e-5)
        .unwrap();
    assert!(err.is_finite());
    assert!(err < 1e-6, "{err}");
}

#[test]
fn gradcheck_rejects_nonpositive_epsilon() {
    let net = seeded_net(3, vec![3, 2], 0);
    let batch = normal_batch(2, 3, 0);
    assert!(gradcheck_finite_diff(&net, batch.view(), &[0, 1], 0.0).is_err());
    assert!(gradcheck_finite_diff(&net, batch.view(), &[0, 1], -1e-5).is_err());
}

#[test]
fn sgd_updates_in_place() {
    let mut net = DenseNetwork::from_parts(
        vec![array![[1.0]], array![[1.0]]],
        vec![array![0.0], array![0.0]],
        provenance(),
    )
    .unwrap();
    let grads = GradientSet {
        weights: vec![array![[0.5]], array![[0.0]]],
        biases: vec![array![0.0], array![0.0]],
        input_grads: vec![],
        pre_grads: vec![],
    };
    net.sgd_step(&grads, 0.1).unwrap();
    assert_relative_eq!(net.weights[0][[0, 0]], 0.95, max_relative = 1e-15);
    assert_eq!(net.weights[1][[0, 0]], 1.0);
    assert!(net.sgd_step(&grads, 0.0).is_err());
    assert!(net.sgd_step(&grads, -0.1).is_err());
}

#[test]
fn zero_gradients_leave_network_unchanged() {
    let mut net = seeded_net(4, vec![5, 3], 2);
    let before = net.clone();
    let acts = net.forward(normal_batch(2, 4, 0).view()).unwrap();
    let mut grads = net.backward(&acts, &[0, 1]).unwrap();
    grads.weights.iter_mut().for_each(|g| g.fill(0.0));
    grads.biases.iter_mut().for_each(|g| g.fill(0.0));
    net.sgd_step(&grads, 0.5).unwrap();
    assert_eq!(net, before);
}

#[test]
fn two_steps_differ_from_one_summed_step() {
    let batch = normal_batch(8, 4, 9);
    let labels = labels_for(8, 3);
    let lr = 0.5;
    let start = seeded_net(4, vec![6, 6, 3], 4);

    let mut stepped = start.clone();
    let g1 = stepped.backward(&stepped.forward(batch.view()).unwrap(), &labels).unwrap();
    stepped.sgd_step(&g1, lr).unwrap();
    let g2 = stepped.backward(&stepped.forward(batch.view()).unwrap(), &labels).unwrap();
    stepped.sgd_step(&g2, lr).unwrap();

    let mut summed = start.clone();
    let mut g = g1.clone();
    for l in 0..g.weights.len() {
        g.weights[l] = &g.weights[l] * 2.0;
        g.biases[l] = &g.biases[l] * 2.0;
    }
    summed.sgd_step(&g, lr).unwrap();

    let diff: f64 = stepped
        .weights
        .iter()
        .zip(&summed.weights)
        .map(|(a, b)| (a - b).mapv(f64::abs).sum())
        .sum();
    assert!(diff > 1e-6, "gradient was not recomputed: diff {diff}");
}

#[test]
fn relu_zeroes_half_the_units() {
    // per-unit on/off rates vary with the weights, so average over networks
    let spec = NetworkSpec::uniform(64, 6).unwrap();
    let plan = build_plan(&spec, &he(Distribution::Normal)).unwrap();
    let mut zeros = vec![0usize; 5];
    let mut total = 0;
    for trial in 0..8 {
        let net = init_network(&spec, &plan, 12 + trial).unwrap();
        let acts = net.forward(normal_batch(128, 64, 8 + trial).view()).unwrap();
        for (z, x) in zeros.iter_mut().zip(&acts.inputs[1..]) {
            *z += x.iter().filter(|&&v| v == 0.0).count();
        }
        total += 128 * 64;
    }
    for z in zeros {
        let frac = z as f64 / total as f64;
        assert!((frac - 0.5).abs() < 0.05, "zero fraction {frac}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backprop_agrees_with_finite_differences(
        depth in 2usize..=6,
        width in 2usize..=8,
        seed in 0u64..10_000,
    ) {
        let mut widths = vec![width; depth - 1];
        widths.push(3);
        let net = seeded_net(width, widths, seed);
        let batch = normal_batch(6, width, seed + 1);
        let check = gradcheck(&net, batch.view(), &labels_for(6, 3), 1e-5).unwrap();
        prop_assert!(check.max_rel_error < 1e-4, "max relative error {}", check.max_rel_error);
        prop_assert!(check.compared > check.kinks);
    }
}

#[test]
fn gradcheck_skips_stencils_across_relu_kinks() {
    // width-2 layers die for whole samples, leaving pre-activations at exactly 0
    let mut widths = vec![2; 4];
    widths.push(3);
    let net = seeded_net(2, widths, 0);
    let batch = normal_batch(6, 2, 1);
    let check = gradcheck(&net, batch.view(), &labels_for(6, 3), 1e-5).unwrap();
    assert!(check.kinks > 0);
    assert!(check.max_rel_error < 1e-4, "{}", check.max_rel_error);
}
