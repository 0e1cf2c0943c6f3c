//! Mass-spring apparel oracle: position Verlet with per-substep Hooke
//! relaxation along apparel edges, pinned vertices driven by the
//! LBS-deformed body, and optional capsule pushout.
//!
//! The spring term is applied as a position correction with coefficient
//! `min(1, stiffness * dt^2)` (dt in frames), which keeps the step stable
//! for arbitrary stiffness while behaving like a Hooke pull toward the rest
//! length for soft settings.

use drape_geom::mesh::{edges_within, mesh_edges};
use drape_geom::skinning::lbs_apply;
use drape_geom::types::{add3, dist3, scale3, sub3, MotionClip};

use crate::character::{point_segment_distance, Capsule, SynthCharacter};
use crate::error::SynthError;

/// Upper bound for the per-substep spring correction fraction.
pub const MAX_SPRING_COEFF: f64 = 1.0;

/// Fraction of the per-substep stretch rate removed along each edge.
/// Damps relative (buckling/shear) modes that uniform velocity damping
/// barely touches.
pub const EDGE_DAMPING: f64 = 0.5;

/// Sleep threshold: when every free vertex moves less than this over a
/// whole frame (meters), the frame is frozen at its start state. Static
/// scenes then reach an exact fixed point instead of a driven micro
/// limit cycle.
pub const SLEEP_EPS: f64 = 2e-4;

/// Verlet state: current and previous positions of every mesh vertex.
#[derive(Debug, Clone)]
pub struct SimState {
    pub positions: Vec<[f64; 3]>,
    pub previous: Vec<[f64; 3]>,
}

struct Spring {
    a: usize,
    b: usize,
    rest: f64,
}

/// Per-frame full-mesh positions: body (and pinned apparel) via LBS with
/// ground-truth skinning, free apparel vertices via the oracle.
///
/// Returns one full vertex buffer per motion frame, frame 0 included.
pub fn simulate_full(synth: &SynthCharacter, motion: &MotionClip) -> Result<Vec<Vec<[f64; 3]>>, SynthError> {
    let character = &synth.character;
    let spec = &synth.spec;
    spec.validate()?;
    let n = character.vertex_count();
    let skinning = character
        .gt_skinning
        .as_ref()
        .ok_or_else(|| SynthError::Generation("simulation needs ground-truth skinning".into()))?;
    let mask = character
        .gt_apparel_mask
        .as_ref()
        .ok_or_else(|| SynthError::Generation("simulation needs the apparel mask".into()))?;
    let height = character.skeleton_height().max(0.5);

    // Kinematic vertices: all body vertices plus the pin rings.
    let mut kinematic = vec![false; n];
    for (i, &apparel) in mask.iter().enumerate() {
        if !apparel {
            kinematic[i] = true;
        }
    }
    for &p in &synth.pin_ring {
        kinematic[p] = true;
    }

    // Springs: apparel-internal edges plus the welding edges, so free cloth
    // stays tied to its pins and the body.
    let all_edges = mesh_edges(&character.faces);
    let apparel_edges = edges_within(&all_edges, mask);
    let mut springs: Vec<Spring> = Vec::new();
    for &(a, b) in apparel_edges.iter().chain(synth.boundary_ring.iter()) {
        springs.push(Spring { a, b, rest: dist3(character.vertices[a], character.vertices[b]) });
    }

    let dt = 1.0 / spec.substeps as f64;
    // Under-relaxed Gauss-Seidel: full projection on constraint loops
    // sustains a jitter limit cycle, so cap the per-pass correction.
    let spring_coeff = (spec.stiffness * dt * dt).min(MAX_SPRING_COEFF);
    let gravity_step = scale3(spec.gravity, dt * dt);

    let mut state = SimState {
        positions: character.vertices.clone(),
        previous: character.vertices.clone(),
    };

    let mut frames = Vec::with_capacity(motion.frame_count());
    let mut body_prev = character.vertices.clone();
    frames.push(character.vertices.clone());

    for (t, frame) in motion.frames.iter().enumerate().skip(1) {
        let body_cur = lbs_apply(&character.vertices, skinning, &character.joints, frame);
        let frame_start = state.positions.clone();

        for s in 1..=spec.substeps {
            let alpha = s as f64 / spec.substeps as f64;

            // Verlet integration of free vertices.
            for i in 0..n {
                if kinematic[i] {
                    continue;
                }
                let vel = sub3(state.positions[i], state.previous[i]);
                let next = add3(
                    add3(state.positions[i], scale3(vel, 1.0 - spec.damping)),
                    gravity_step,
                );
                state.previous[i] = state.positions[i];
                state.positions[i] = next;
            }

            // Kinematic targets interpolate between the frame endpoints.
            for i in 0..n {
                if kinematic[i] {
                    let target = lerp3(body_prev[i], body_cur[i], alpha);
                    state.previous[i] = state.positions[i];
                    state.positions[i] = target;
                }
            }

            // Hooke relaxation toward rest lengths, symmetric Gauss-Seidel
            // (a forward and a backward sweep) to avoid orbiting on
            // constraint loops.
            for pass in 0..2 {
                let indices: Box<dyn Iterator<Item = usize>> = if pass == 0 {
                    Box::new(0..springs.len())
                } else {
                    Box::new((0..springs.len()).rev())
                };
                for si in indices {
                    let spring = &springs[si];
                    let d = sub3(state.positions[spring.b], state.positions[spring.a]);
                    let len = drape_geom::types::norm3(d);
                    if len < 1e-12 {
                        continue;
                    }
                    let prev_len = dist3(state.previous[spring.b], state.previous[spring.a]);
                    let correction =
                        (spring_coeff * (len - spring.rest) + EDGE_DAMPING * (len - prev_len)) / len;
                    let (fa, fb) = (!kinematic[spring.a], !kinematic[spring.b]);
                    match (fa, fb) {
                        (true, true) => {
                            let half = scale3(d, 0.5 * correction);
                            state.positions[spring.a] = add3(state.positions[spring.a], half);
                            state.positions[spring.b] = sub3(state.positions[spring.b], half);
                        }
                        (true, false) => {
                            state.positions[spring.a] =
                                add3(state.positions[spring.a], scale3(d, correction));
                        }
                        (false, true) => {
                            state.positions[spring.b] =
                                sub3(state.positions[spring.b], scale3(d, correction));
                        }
                        (false, false) => {}
                    }
                }
            }

            // Capsule pushout against the interpolated skeleton.
            if spec.pushout {
                let joint_pos = interpolated_joint_positions(character, &motion.frames[t - 1], frame, alpha);
                for i in 0..n {
                    if kinematic[i] {
                        continue;
                    }
                    push_out_of_capsules(&mut state.positions[i], &synth.capsules, &joint_pos);
                }
            }
        }

        // Explosion guard: a free vertex travelling more than a body height
        // in one frame means the springs diverged.
        let mut max_disp: f64 = 0.0;
        for i in 0..n {
            if !kinematic[i] {
                max_disp = max_disp.max(dist3(state.positions[i], frame_start[i]));
            }
        }
        if max_disp > height {
            return Err(SynthError::SpringExplosion { frame: t, max_displacement: max_disp, height });
        }
        if max_disp < SLEEP_EPS {
            for i in 0..n {
                if !kinematic[i] {
                    state.positions[i] = frame_start[i];
                    state.previous[i] = frame_start[i];
                }
            }
        }

        frames.push(state.positions.clone());
        body_prev = body_cur;
    }
    Ok(frames)
}

/// Ground-truth apparel positions per frame, in original vertex order
/// restricted to the apparel mask.
pub fn simulate_apparel(synth: &SynthCharacter, motion: &MotionClip) -> Result<Vec<Vec<[f64; 3]>>, SynthError> {
    let mask = synth
        .character
        .gt_apparel_mask
        .clone()
        .ok_or_else(|| SynthError::Generation("simulation needs the apparel mask".into()))?;
    let full = simulate_full(synth, motion)?;
    Ok(full
        .into_iter()
        .map(|frame| {
            frame
                .into_iter()
                .zip(&mask)
                .filter_map(|(p, &m)| if m { Some(p) } else { None })
                .collect()
        })
        .collect())
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn interpolated_joint_positions(
    character: &drape_geom::RiggedCharacter,
    prev: &[drape_geom::JointTransform],
    cur: &[drape_geom::JointTransform],
    alpha: f64,
) -> Vec<[f64; 3]> {
    character
        .joints
        .iter()
        .zip(prev.iter().zip(cur))
        .map(|(j, (tp, tc))| {
            let a = add3(*j, tp.translation);
            let b = add3(*j, tc.translation);
            lerp3(a, b, alpha)
        })
        .collect()
}

/// Project a point out of every capsule it falls inside.
pub fn push_out_of_capsules(p: &mut [f64; 3], capsules: &[Capsule], joint_pos: &[[f64; 3]]) {
    for cap in capsules {
        let a = joint_pos[cap.joint_a];
        let b = joint_pos[cap.joint_b];
        let (d, t) = point_segment_distance(*p, a, b);
        if d < cap.radius {
            let closest = lerp3(a, b, t);
            let dir = sub3(*p, closest);
            let n = drape_geom::types::norm3(dir);
            let unit = if n > 1e-9 { scale3(dir, 1.0 / n) } else { [0.0, 0.0, 1.0] };
            *p = add3(closest, scale3(unit, cap.radius + 1e-6));
        }
    }
}
