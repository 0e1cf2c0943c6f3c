//! Apparel-module contracts: feature assembly, grouped convolution
//! isolation, rollout recursion and gradients through it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use drape_geom::types::JointTransform;
use drape_model::apparel::{apparel_losses, ApparelConfig, ApparelGraph, ApparelNet, HISTORY_K};
use drape_model::ModelError;
use drape_nn::gradcheck::finite_difference_check_sampled;
use drape_nn::{ParameterStore, Tape, Tensor};

fn tiny_config() -> ApparelConfig {
    ApparelConfig { motion_dim: 4, conv_blocks: 2, hidden: 8 }
}

fn static_frame(j: usize) -> Vec<JointTransform> {
    vec![JointTransform::identity(); j]
}

fn random_positions(rng: &mut ChaCha20Rng, n: usize) -> Tensor {
    Tensor::matrix(n, 3, (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn static_history_zeroes_velocity_and_acceleration() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    let pos = random_positions(&mut rng, 5);
    let mut tape = Tape::new();
    let h: Vec<_> = (0..3).map(|_| tape.constant(pos.clone())).collect();
    let features = net
        .assemble_features(&mut tape, &store, &h, &static_frame(2), [0.0, 1.0, 0.0])
        .unwrap();
    let f = tape.value(features);
    assert_eq!(f.shape(), &[5, 9 + 4]);
    for i in 0..5 {
        for c in 3..9 {
            assert_eq!(f.get(i, c), 0.0, "velocity/acceleration must vanish for static history");
        }
    }
}

#[test]
fn linear_history_gives_constant_velocity_zero_acceleration() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    let base = random_positions(&mut rng, 4);
    let step = [0.01, -0.02, 0.005];
    let shifted = |k: f64| {
        let mut t = base.clone();
        for i in 0..4 {
            for c in 0..3 {
                let v = t.get(i, c) - k * step[c];
                t.set(i, c, v);
            }
        }
        t
    };
    let mut tape = Tape::new();
    let h = vec![
        tape.constant(shifted(0.0)),
        tape.constant(shifted(1.0)),
        tape.constant(shifted(2.0)),
    ];
    let features = net
        .assemble_features(&mut tape, &store, &h, &static_frame(2), [0.0, 0.0, 0.0])
        .unwrap();
    let f = tape.value(features);
    for i in 0..4 {
        for c in 0..3 {
            assert!((f.get(i, 3 + c) - step[c]).abs() < 1e-12, "velocity");
            assert!(f.get(i, 6 + c).abs() < 1e-12, "acceleration");
        }
    }
}

#[test]
fn history_translation_covariance() {
    // Adding a constant to all history positions shifts the position
    // channel and leaves velocity/acceleration untouched.
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    let base = random_positions(&mut rng, 4);
    let offset = [0.3, -1.1, 0.7];
    let mut moved = base.clone();
    for i in 0..4 {
        for c in 0..3 {
            let v = moved.get(i, c) + offset[c];
            moved.set(i, c, v);
        }
    }
    let mut tape = Tape::new();
    let ha: Vec<_> = (0..3).map(|_| tape.constant(base.clone())).collect();
    let hb: Vec<_> = (0..3).map(|_| tape.constant(moved.clone())).collect();
    let fa = net.assemble_features(&mut tape, &store, &ha, &static_frame(2), [0.0; 3]).unwrap();
    let fb = net.assemble_features(&mut tape, &store, &hb, &static_frame(2), [0.0; 3]).unwrap();
    let (fa, fb) = (tape.value(fa), tape.value(fb));
    for i in 0..4 {
        for c in 0..3 {
            assert!((fb.get(i, c) - fa.get(i, c) - offset[c]).abs() < 1e-12);
            assert!((fb.get(i, 3 + c) - fa.get(i, 3 + c)).abs() < 1e-12);
            assert!((fb.get(i, 6 + c) - fa.get(i, 6 + c)).abs() < 1e-12);
        }
    }
}

#[test]
fn short_history_errors_as_warmup_incomplete() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    let pos = random_positions(&mut rng, 3);
    let mut tape = Tape::new();
    let h = vec![tape.constant(pos.clone()), tape.constant(pos)];
    match net.assemble_features(&mut tape, &store, &h, &static_frame(2), [0.0; 3]) {
        Err(ModelError::WarmupIncomplete { got: 2, need }) => assert_eq!(need, HISTORY_K),
        other => panic!("expected WarmupIncomplete, got {other:?}"),
    }
}

#[test]
fn disconnected_components_never_exchange_features() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    // Two triangles, no shared vertices.
    let graph = ApparelGraph::new(6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
    assert_eq!(graph.component_id[0], graph.component_id[2]);
    assert_ne!(graph.component_id[0], graph.component_id[3]);

    let base = random_positions(&mut rng, 6);
    let mut perturbed = base.clone();
    for c in 0..3 {
        let v = perturbed.get(4, c) + 10.0;
        perturbed.set(4, c, v);
    }

    let run = |positions: &Tensor| {
        let mut tape = Tape::new();
        let h: Vec<_> = (0..3).map(|_| tape.constant(positions.clone())).collect();
        let next = net.step(&mut tape, &store, &h, &static_frame(2), [0.0; 3], &graph).unwrap();
        tape.value(next).clone()
    };
    let a = run(&base);
    let b = run(&perturbed);
    // Vertices in the first component are bit-identical.
    for i in 0..3 {
        assert_eq!(a.row_slice(i), b.row_slice(i), "component 0 vertex {i} was corrupted");
    }
    // The perturbed component changed.
    assert_ne!(a.row_slice(4), b.row_slice(4));
}

#[test]
fn single_edge_projection_recovers_difference() {
    // MLP forced to the projection of the second argument: the conv output
    // at node 0 is H_1 - H_0.
    let mut store = ParameterStore::new();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let cfg = ApparelConfig { motion_dim: 1, conv_blocks: 1, hidden: 10 };
    let net = ApparelNet::register(&mut store, &mut rng, 1, cfg).unwrap();
    // conv0 weight: (2 * width) x hidden with width = 9 + 1 = 10. Select
    // the difference half (rows 10..20) as identity.
    {
        let w = store.value_mut("apparel.conv0.w").unwrap();
        for x in w.data_mut() {
            *x = 0.0;
        }
        for k in 0..10 {
            w.set(10 + k, k, 1.0);
        }
        for x in store.value_mut("apparel.conv0.b").unwrap().data_mut() {
            *x = 0.0;
        }
    }
    let graph = ApparelGraph::new(2, vec![(0, 1)]);
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::matrix(2, 10, (0..20).map(|x| 0.1 * x as f64).collect()).unwrap());
    let out = net.edge_conv_stack(&mut tape, &store, h, &graph).unwrap();
    let hv = tape.value(h).clone();
    for k in 0..10 {
        let expect = (hv.get(1, k) - hv.get(0, k)).max(0.0);
        assert!((tape.value(out).get(0, k) - expect).abs() < 1e-12);
    }
}

#[test]
fn node_permutation_within_component_permutes_outputs() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    let graph = ApparelGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
    let base = random_positions(&mut rng, 4);

    // Rotate the ring by one: vertex i of the permuted graph is vertex
    // (i + 1) % 4 of the original.
    let perm = [1usize, 2, 3, 0];
    let mut rotated = Tensor::zeros(vec![4, 3]);
    for (row, &src) in perm.iter().enumerate() {
        for c in 0..3 {
            rotated.set(row, c, base.get(src, c));
        }
    }
    let run = |positions: &Tensor| {
        let mut tape = Tape::new();
        let h: Vec<_> = (0..3).map(|_| tape.constant(positions.clone())).collect();
        let next = net.step(&mut tape, &store, &h, &static_frame(2), [0.0; 3], &graph).unwrap();
        tape.value(next).clone()
    };
    let a = run(&base);
    let b = run(&rotated);
    for (row, &src) in perm.iter().enumerate() {
        for c in 0..3 {
            assert!((b.get(row, c) - a.get(src, c)).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_decoder_freezes_apparel_exactly() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    // Zero the decoder's output layer.
    for name in ["apparel.dec.1.w", "apparel.dec.1.b"] {
        for x in store.value_mut(name).unwrap().data_mut() {
            *x = 0.0;
        }
    }
    let graph = ApparelGraph::new(3, vec![(0, 1), (1, 2)]);
    let start = random_positions(&mut rng, 3);
    let frames = vec![static_frame(2); 5];
    let mut tape = Tape::new();
    let history = vec![start.clone(), start.clone(), start.clone()];
    let out = net.rollout(&mut tape, &store, &history, &frames, [0.0; 3], &graph).unwrap();
    for (t, var) in out.iter().enumerate() {
        assert_eq!(tape.value(*var), &start, "frame {t} must stay frozen");
    }
}

#[test]
fn horizon_one_equals_single_step() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let mut store = ParameterStore::new();
    let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
    let graph = ApparelGraph::new(3, vec![(0, 1), (1, 2)]);
    let start = random_positions(&mut rng, 3);
    let history = vec![start.clone(), start.clone(), start.clone()];
    let frames = vec![static_frame(2)];

    let mut tape_a = Tape::new();
    let rolled = net.rollout(&mut tape_a, &store, &history, &frames, [0.0; 3], &graph).unwrap();
    let mut tape_b = Tape::new();
    let h: Vec<_> = history.iter().map(|t| tape_b.constant(t.clone())).collect();
    let stepped = net.step(&mut tape_b, &store, &h, &frames[0], [0.0; 3], &graph).unwrap();
    assert_eq!(tape_a.value(rolled[0]), tape_b.value(stepped));
}

#[test]
fn apparel_loss_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let rest: Vec<[f64; 3]> = (0..4).map(|_| {
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
    }).collect();
    let edges = vec![(0, 1), (1, 2), (2, 3)];

    // Prediction equals ground truth: vertex loss 0.
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::from_points(&rest));
    let t = tape.constant(Tensor::from_points(&rest));
    let l = apparel_losses(&mut tape, p, t, &rest, &edges).unwrap();
    assert_eq!(tape.value(l.vertex).item(), 0.0);

    // Uniform 1 cm offset: vertex loss is exactly 0.01 m.
    let moved: Vec<[f64; 3]> = rest.iter().map(|v| [v[0] + 0.01, v[1] + 0.01, v[2] + 0.01]).collect();
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::from_points(&moved));
    let t = tape.constant(Tensor::from_points(&rest));
    let l = apparel_losses(&mut tape, p, t, &rest, &edges).unwrap();
    assert!((tape.value(l.vertex).item() - 0.01).abs() < 1e-15);
    // Rigid offset: edge loss 0.
    assert!(tape.value(l.edge).item() <= 1e-9);
}

/// Gradient through a 3-step autoregressive rollout on a tiny graph.
#[test]
fn rollout_gradients_pass_fd_over_20_seeds() {
    for seed in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(7000 + seed);
        let mut store = ParameterStore::new();
        let net = ApparelNet::register(&mut store, &mut rng, 2, tiny_config()).unwrap();
        let graph = ApparelGraph::new(4, vec![(0, 1), (1, 2), (2, 3)]);
        let start = random_positions(&mut rng, 4);
        let history = vec![start.clone(), start.clone(), start.clone()];
        let mut frame = static_frame(2);
        frame[1].translation = [0.05, -0.02, 0.01];
        let frames = vec![frame.clone(), frame.clone(), frame];
        let target = random_positions(&mut rng, 4);
        let rest: Vec<[f64; 3]> = start.to_points();

        let net_c = net.clone();
        let graph_c = graph.clone();
        let frames_c = frames.clone();
        let history_c = history.clone();
        let target_c = target.clone();
        let rest_c = rest.clone();
        let build = move |tape: &mut Tape, store: &ParameterStore| {
            let out = net_c
                .rollout(tape, store, &history_c, &frames_c, [0.0; 3], &graph_c)
                .map_err(|e| drape_nn::NnError::Invalid(e.to_string()))?;
            let t = tape.constant(target_c.clone());
            let mut total = None;
            for &step in &out {
                let l = apparel_losses(tape, step, t, &rest_c, &graph_c.edges)
                    .map_err(|e| drape_nn::NnError::Invalid(e.to_string()))?;
                total = Some(match total {
                    None => l.total,
                    Some(acc) => tape.add(acc, l.total)?,
                });
            }
            Ok(total.expect("at least one step"))
        };
        if let Err(fail) = finite_difference_check_sampled(&mut store, &build, 1e-6, 1e-4, 8) {
            panic!("seed {seed}: {fail}");
        }
    }
}
