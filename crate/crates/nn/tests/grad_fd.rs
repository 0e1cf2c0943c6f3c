//! Finite-difference verification of every tape primitive, 20 seeds each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use drape_nn::gradcheck::{finite_difference_check, DEFAULT_EPSILON, DEFAULT_TOLERANCE};
use drape_nn::{Axis, Mlp, NnError, ParameterStore, Tape, Tensor, Var};

fn random_tensor(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Run an FD check over `seeds` different random parameter draws.
fn check_over_seeds(
    seeds: u64,
    setup: impl Fn(&mut ChaCha20Rng, &mut ParameterStore),
    build: impl Fn(&mut Tape, &ParameterStore) -> Result<Var, NnError> + Copy,
) {
    for seed in 0..seeds {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
        let mut store = ParameterStore::new();
        setup(&mut rng, &mut store);
        if let Err(fail) = finite_difference_check(&mut store, &build, DEFAULT_EPSILON, DEFAULT_TOLERANCE) {
            panic!("seed {seed}: {fail}");
        }
    }
}

#[test]
fn dense_relu_chain() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("x", random_tensor(rng, 4, 3)).unwrap();
            store.register("w", random_tensor(rng, 3, 5)).unwrap();
            store.register("b", random_tensor(rng, 1, 5)).unwrap();
        },
        |tape, store| {
            let x = tape.param(store, "x")?;
            let w = tape.param(store, "w")?;
            let b = tape.param(store, "b")?;
            let h = tape.matmul(x, w)?;
            let h = tape.add_row(h, b)?;
            let h = tape.relu(h);
            Ok(tape.mean_all(h))
        },
    );
}

#[test]
fn sigmoid_ln_clamp() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("x", random_tensor(rng, 3, 4)).unwrap();
        },
        |tape, store| {
            let x = tape.param(store, "x")?;
            let s = tape.sigmoid(x);
            let c = tape.clamp(s, 1e-7, 1.0 - 1e-7);
            let l = tape.ln(c);
            Ok(tape.mean_all(l))
        },
    );
}

#[test]
fn softmax_both_axes() {
    for axis in [Axis::Cols, Axis::Rows] {
        check_over_seeds(
            20,
            |rng, store| {
                store.register("x", random_tensor(rng, 4, 5)).unwrap();
                store.register("t", random_tensor(rng, 4, 5)).unwrap();
            },
            move |tape, store| {
                let x = tape.param(store, "x")?;
                let t = tape.param(store, "t")?;
                let y = tape.softmax(x, axis);
                let prod = tape.mul_elem(y, t)?;
                Ok(tape.sum_all(prod))
            },
        );
    }
}

#[test]
fn elementwise_and_reductions() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("a", random_tensor(rng, 3, 3)).unwrap();
            store.register("b", random_tensor(rng, 3, 3)).unwrap();
        },
        |tape, store| {
            let a = tape.param(store, "a")?;
            let b = tape.param(store, "b")?;
            let d = tape.sub(a, b)?;
            let p = tape.mul_elem(d, a)?;
            let s = tape.scale(p, 0.7);
            let abs = tape.abs(s);
            Ok(tape.mean_all(abs))
        },
    );
}

#[test]
fn concat_repeat_maxpool() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("a", random_tensor(rng, 4, 2)).unwrap();
            store.register("g", random_tensor(rng, 1, 3)).unwrap();
        },
        |tape, store| {
            let a = tape.param(store, "a")?;
            let g = tape.param(store, "g")?;
            let rep = tape.repeat_rows(g, 4)?;
            let cat = tape.concat_cols(&[a, rep])?;
            let pooled = tape.max_pool(cat, Axis::Rows);
            Ok(tape.sum_all(pooled))
        },
    );
}

#[test]
fn gather_segment_max_blend() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("feats", random_tensor(rng, 5, 3)).unwrap();
            store.register("weights", random_tensor(rng, 2, 2)).unwrap();
        },
        |tape, store| {
            let f = tape.param(store, "feats")?;
            let w = tape.param(store, "weights")?;
            let gathered = tape.gather_rows(f, &[0, 2, 4, 1])?;
            let seg = tape.segment_max(gathered, &[0, 0, 1, 1], 2)?;
            // blend: 2 groups of 2 over the segment rows requires 4 rows
            let rows4 = tape.gather_rows(f, &[1, 3, 0, 2])?;
            let blended = tape.blend_groups(rows4, w)?;
            let joined = tape.concat_cols(&[seg, blended])?;
            Ok(tape.mean_all(joined))
        },
    );
}

#[test]
fn row_norms_away_from_zero() {
    check_over_seeds(
        20,
        |rng, store| {
            // Keep rows away from the origin so the norm is differentiable.
            let data: Vec<f64> = (0..12)
                .map(|_| {
                    let x: f64 = rng.gen_range(0.3..1.5);
                    if rng.gen_bool(0.5) {
                        x
                    } else {
                        -x
                    }
                })
                .collect();
            store.register("x", Tensor::matrix(4, 3, data).unwrap()).unwrap();
        },
        |tape, store| {
            let x = tape.param(store, "x")?;
            let norms = tape.row_norms(x);
            Ok(tape.mean_all(norms))
        },
    );
}

/// Random two-layer MLP against the finite-difference oracle.
#[test]
fn random_two_layer_mlp() {
    check_over_seeds(
        20,
        |rng, store| {
            let mlp = Mlp::register(store, rng, "mlp", &[4, 8, 2]).unwrap();
            let _ = mlp;
            store.register("input", random_tensor(rng, 6, 4)).unwrap();
            store.register("target", random_tensor(rng, 6, 2)).unwrap();
        },
        |tape, store| {
            let mlp = Mlp::bind(store, "mlp", 2)?;
            let x = tape.param(store, "input")?;
            let t = tape.param(store, "target")?;
            let y = mlp.forward(tape, store, x)?;
            let d = tape.sub(y, t)?;
            let sq = tape.mul_elem(d, d)?;
            Ok(tape.mean_all(sq))
        },
    );
}

/// A shared parameter consumed twice must accumulate both contributions.
#[test]
fn shared_parameter_reuse() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("w", random_tensor(rng, 3, 3)).unwrap();
            store.register("x", random_tensor(rng, 2, 3)).unwrap();
        },
        |tape, store| {
            let w = tape.param(store, "w")?;
            let x = tape.param(store, "x")?;
            let h1 = tape.matmul(x, w)?;
            let h2 = tape.matmul(h1, w)?;
            Ok(tape.mean_all(h2))
        },
    );
}

/// Determinism: the same seed gives a bit-identical short training run.
#[test]
fn training_is_deterministic() {
    let run = || -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let mut store = ParameterStore::new();
        let mlp = Mlp::register(&mut store, &mut rng, "net", &[3, 6, 1]).unwrap();
        let x = random_tensor(&mut rng, 8, 3);
        let t = random_tensor(&mut rng, 8, 1);
        let mut losses = Vec::new();
        for _ in 0..5 {
            store.zero_grads();
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let tv = tape.constant(t.clone());
            let y = mlp.forward(&mut tape, &store, xv).unwrap();
            let d = tape.sub(y, tv).unwrap();
            let sq = tape.mul_elem(d, d).unwrap();
            let loss = tape.mean_all(sq);
            tape.backward(loss).unwrap();
            tape.apply_param_grads(&mut store).unwrap();
            store.adamw_step(&drape_nn::AdamWConfig::default()).unwrap();
            losses.push(tape.value(loss).item());
        }
        losses
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "identical seeds must give bit-identical trajectories");
}

#[test]
fn concat_rows_and_neighbor_mean() {
    check_over_seeds(
        20,
        |rng, store| {
            store.register("a", random_tensor(rng, 3, 2)).unwrap();
            store.register("b", random_tensor(rng, 2, 2)).unwrap();
        },
        |tape, store| {
            let a = tape.param(store, "a")?;
            let b = tape.param(store, "b")?;
            let stacked = tape.concat_rows(&[a, b])?;
            // 5 vertices: a ring of 4 plus one isolated vertex.
            let adjacency = vec![vec![1, 3], vec![0, 2], vec![1, 3], vec![0, 2], vec![]];
            let mean = tape.neighbor_mean(stacked, &adjacency)?;
            let joined = tape.mul_elem(mean, stacked)?;
            Ok(tape.mean_all(joined))
        },
    );
}
