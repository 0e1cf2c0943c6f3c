//! Refinement contracts: tiling order, zero-network pass-through, boundary
//! edge coverage and gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use drape_geom::mesh::{boundary_edges, mesh_edges, vertex_adjacency};
use drape_geom::RiggedCharacter;
use drape_model::refine::{refine_losses, RefineNet};
use drape_model::Partition;
use drape_nn::gradcheck::finite_difference_check_sampled;
use drape_nn::{ParameterStore, Tape, Tensor};

fn quad_strip_character() -> RiggedCharacter {
    // 6 vertices, two squares sharing an edge; right square is apparel.
    RiggedCharacter {
        vertices: vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [2.0, 0.0, 0.0],
            [2.0, 1.0, 0.0],
        ],
        faces: vec![[0, 1, 2], [1, 3, 2], [1, 4, 3], [4, 5, 3]],
        joints: vec![[0.0; 3]],
        parents: vec![None],
        gt_skinning: None,
        gt_apparel_mask: Some(vec![false, false, false, false, true, true]),
    }
}

fn random_points(rng: &mut ChaCha20Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

#[test]
fn zero_network_returns_exact_tiling() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut store = ParameterStore::new();
    let net = RefineNet::register(&mut store, &mut rng).unwrap();
    for name in ["refine.mlp.2.w", "refine.mlp.2.b"] {
        for x in store.value_mut(name).unwrap().data_mut() {
            *x = 0.0;
        }
    }
    let c = quad_strip_character();
    let mask = c.gt_apparel_mask.clone().unwrap();
    let part = Partition::from_mask(&mask);
    let points = random_points(&mut rng, 6);
    let body = part.body_points(&points);
    let apparel = part.apparel_points(&points);
    let adjacency = vertex_adjacency(6, &mesh_edges(&c.faces));

    let mut tape = Tape::new();
    let bv = tape.constant(Tensor::from_points(&body));
    let av = tape.constant(Tensor::from_points(&apparel));
    let (refined, tiled, delta) = net
        .joint_refine(&mut tape, &store, bv, av, &part, &vec![0.25; 6], &adjacency)
        .unwrap();
    assert_eq!(tape.value(refined), tape.value(tiled));
    assert!(tape.value(delta).data().iter().all(|&x| x == 0.0));
    // Tiling restores the original vertex order exactly.
    assert_eq!(tape.value(tiled).to_points(), points);
}

#[test]
fn boundary_edges_appear_exactly_once_in_full_edge_set() {
    let c = quad_strip_character();
    let mask = c.gt_apparel_mask.clone().unwrap();
    let all_edges = mesh_edges(&c.faces);
    let boundary = boundary_edges(&c, &mask);
    assert!(!boundary.is_empty());
    for b in &boundary {
        let count = all_edges.iter().filter(|e| *e == b).count();
        assert_eq!(count, 1, "boundary edge {b:?} must appear exactly once");
    }
}

#[test]
fn refine_loss_examples() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let c = quad_strip_character();
    let all_edges = mesh_edges(&c.faces);
    let points = random_points(&mut rng, 6);

    // Zero displacement: regularizer is exactly zero; prediction equal to
    // target: vertex loss zero.
    let mut tape = Tape::new();
    let v = tape.constant(Tensor::from_points(&points));
    let t = tape.constant(Tensor::from_points(&points));
    let zero = tape.constant(Tensor::zeros(vec![6, 3]));
    let l = refine_losses(&mut tape, v, t, &points, &all_edges, zero).unwrap();
    assert_eq!(tape.value(l.regularizer).item(), 0.0);
    assert_eq!(tape.value(l.vertex).item(), 0.0);

    // Rigid motion of the whole mesh: edge loss zero.
    let r = drape_geom::types::axis_angle_to_mat3([0.2, 0.5, 1.0], 0.8);
    let moved: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            let rp = drape_geom::types::mat3_mul_vec(&r, *p);
            [rp[0] - 0.4, rp[1] + 1.0, rp[2] + 0.1]
        })
        .collect();
    let mut tape = Tape::new();
    let v = tape.constant(Tensor::from_points(&moved));
    let t = tape.constant(Tensor::from_points(&points));
    let zero = tape.constant(Tensor::zeros(vec![6, 3]));
    let l = refine_losses(&mut tape, v, t, &points, &all_edges, zero).unwrap();
    assert!(tape.value(l.edge).item() <= 1e-9);
}

#[test]
fn mismatched_rows_error() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut store = ParameterStore::new();
    let net = RefineNet::register(&mut store, &mut rng).unwrap();
    let c = quad_strip_character();
    let part = Partition::from_mask(c.gt_apparel_mask.as_ref().unwrap());
    let adjacency = vertex_adjacency(6, &mesh_edges(&c.faces));
    let mut tape = Tape::new();
    let bv = tape.constant(Tensor::zeros(vec![3, 3])); // wrong: partition has 4 body rows
    let av = tape.constant(Tensor::zeros(vec![2, 3]));
    assert!(net
        .joint_refine(&mut tape, &store, bv, av, &part, &vec![0.0; 6], &adjacency)
        .is_err());
}

#[test]
fn refine_gradients_pass_fd_over_20_seeds() {
    let c = quad_strip_character();
    let mask = c.gt_apparel_mask.clone().unwrap();
    let part = Partition::from_mask(&mask);
    let all_edges = mesh_edges(&c.faces);
    let adjacency = vertex_adjacency(6, &all_edges);

    for seed in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(9000 + seed);
        let mut store = ParameterStore::new();
        let net = RefineNet::register(&mut store, &mut rng).unwrap();
        let points = random_points(&mut rng, 6);
        let target = random_points(&mut rng, 6);
        let probs: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();

        let body = part.body_points(&points);
        let apparel = part.apparel_points(&points);
        let rest = points.clone();

        let net_c = net.clone();
        let part_c = part.clone();
        let adjacency_c = adjacency.clone();
        let all_edges_c = all_edges.clone();
        let probs_c = probs.clone();
        let build = move |tape: &mut Tape, store: &ParameterStore| {
            let bv = tape.constant(Tensor::from_points(&body));
            let av = tape.constant(Tensor::from_points(&apparel));
            let (refined, _, delta) = net_c
                .joint_refine(tape, store, bv, av, &part_c, &probs_c, &adjacency_c)
                .map_err(|e| drape_nn::NnError::Invalid(e.to_string()))?;
            let t = tape.constant(Tensor::from_points(&target));
            let l = refine_losses(tape, refined, t, &rest, &all_edges_c, delta)
                .map_err(|e| drape_nn::NnError::Invalid(e.to_string()))?;
            Ok(l.total)
        };
        if let Err(fail) = finite_difference_check_sampled(&mut store, &build, 1e-6, 1e-4, 8) {
            panic!("seed {seed}: {fail}");
        }
    }
}
