//! Physics-oracle contracts: equilibrium, free-fall step, pin exactness,
//! settling and stability at default parameters.

use drape_geom::skinning::lbs_apply;
use drape_geom::types::{dist3, JointTransform, MotionClip, RiggedCharacter};
use drape_synth::sim::simulate_full;
use drape_synth::{generate_character, SynthCharacter, SynthCharacterSpec};

fn static_motion(joints: usize, frames: usize) -> MotionClip {
    MotionClip { frames: vec![vec![JointTransform::identity(); joints]; frames], fps: 30.0 }
}

/// A minimal hand-built bundle: tetrahedron body, one free-floating apparel
/// vertex with no springs. Exercises the bare integration step.
fn free_particle_character(spec: SynthCharacterSpec) -> SynthCharacter {
    let vertices = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [2.0, 2.0, 2.0],
    ];
    let n = vertices.len();
    let character = RiggedCharacter {
        vertices,
        faces: vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]],
        joints: vec![[0.0, 0.0, 0.0]],
        parents: vec![None],
        gt_skinning: Some(vec![1.0; n]),
        gt_apparel_mask: Some(vec![false, false, false, false, true]),
    };
    SynthCharacter {
        character,
        capsules: vec![],
        pin_ring: vec![],
        boundary_ring: vec![],
        spec,
        seed: 0,
    }
}

#[test]
fn free_particle_one_step_displaces_by_gravity() {
    let spec = SynthCharacterSpec {
        substeps: 1,
        damping: 0.0,
        gravity: [0.0, -0.25, 0.0],
        pushout: false,
        ..Default::default()
    };
    let synth = free_particle_character(spec);
    let motion = static_motion(1, 2);
    let frames = simulate_full(&synth, &motion).unwrap();
    let start = frames[0][4];
    let end = frames[1][4];
    assert_eq!(end[0] - start[0], 0.0);
    assert_eq!(end[1] - start[1], -0.25);
    assert_eq!(end[2] - start[2], 0.0);
}

#[test]
fn zero_gravity_rest_springs_static_body_stays_still() {
    let spec = SynthCharacterSpec { gravity: [0.0; 3], pushout: false, ..Default::default() };
    let synth = generate_character(&spec, 17).unwrap();
    let motion = static_motion(synth.character.joint_count(), 20);
    let frames = simulate_full(&synth, &motion).unwrap();
    for (t, frame) in frames.iter().enumerate() {
        for (i, p) in frame.iter().enumerate() {
            let rest = synth.character.vertices[i];
            assert!(
                dist3(*p, rest) < 1e-12,
                "frame {t} vertex {i} drifted {}",
                dist3(*p, rest)
            );
        }
    }
}

#[test]
fn pinned_vertices_track_body_exactly() {
    let spec = SynthCharacterSpec::default();
    let synth = generate_character(&spec, 23).unwrap();
    let motion = drape_synth::generate_motion(31, 40, 30.0);
    let frames = simulate_full(&synth, &motion).unwrap();
    let skinning = synth.character.gt_skinning.as_ref().unwrap();
    for (t, frame) in frames.iter().enumerate() {
        let driven = lbs_apply(&synth.character.vertices, skinning, &synth.character.joints, &motion.frames[t]);
        for &p in &synth.pin_ring {
            assert_eq!(frame[p], driven[p], "frame {t} pin {p}");
        }
    }
}

#[test]
fn settles_with_static_body() {
    let spec = SynthCharacterSpec::default();
    let synth = generate_character(&spec, 29).unwrap();
    let motion = static_motion(synth.character.joint_count(), 120);
    let frames = simulate_full(&synth, &motion).unwrap();
    let mask = synth.character.gt_apparel_mask.as_ref().unwrap();
    let proxy: Vec<f64> = frames
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|((a, b), _)| {
                    let d = dist3(*a, *b);
                    d * d
                })
                .sum()
        })
        .collect();
    for t in 30..proxy.len() {
        assert!(
            proxy[t] <= proxy[t - 1] + 1e-18,
            "kinetic proxy rose at frame {t}: {} -> {}",
            proxy[t - 1],
            proxy[t]
        );
    }
}

#[test]
fn edges_stay_bounded_over_long_motion() {
    let spec = SynthCharacterSpec::default();
    let synth = generate_character(&spec, 37).unwrap();
    let motion = drape_synth::generate_motion(41, 120, 30.0);
    let frames = simulate_full(&synth, &motion).unwrap();
    let mask = synth.character.gt_apparel_mask.as_ref().unwrap();
    let edges = drape_geom::mesh::edges_within(&drape_geom::mesh_edges(&synth.character.faces), mask);
    for (t, frame) in frames.iter().enumerate() {
        for &(a, b) in &edges {
            let rest = dist3(synth.character.vertices[a], synth.character.vertices[b]);
            let len = dist3(frame[a], frame[b]);
            assert!(len <= 2.0 * rest, "frame {t} edge ({a},{b}): {len} > 2 x {rest}");
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let spec = SynthCharacterSpec::default();
    let synth = generate_character(&spec, 43).unwrap();
    let motion = drape_synth::generate_motion(47, 30, 30.0);
    let a = simulate_full(&synth, &motion).unwrap();
    let b = simulate_full(&synth, &motion).unwrap();
    assert_eq!(a, b);
}

#[test]
fn explosion_aborts_with_frame_index() {
    // Generate at sane parameters, then rerun the sim with an absurd
    // gravity that launches free apparel beyond a body height per frame.
    let mut synth = generate_character(&SynthCharacterSpec::default(), 53).unwrap();
    synth.spec.gravity = [0.0, -50.0, 0.0];
    synth.spec.pushout = false;
    let motion = static_motion(synth.character.joint_count(), 5);
    match simulate_full(&synth, &motion) {
        Err(drape_synth::SynthError::SpringExplosion { frame, .. }) => assert!(frame >= 1),
        other => panic!("expected SpringExplosion, got {:?}", other.map(|f| f.len())),
    }
}
