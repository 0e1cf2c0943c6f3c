//! Smooth random joint-angle motion synthesis with forward kinematics.
//!
//! Every clip starts at the rest pose; the first frames ramp linearly into
//! the moving pose so the physics oracle is not shocked by a sudden change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use drape_geom::types::{
    add3, axis_angle_to_mat3, mat3_mul, mat3_mul_vec, orthonormalize, sub3, JointTransform,
    MotionClip,
};

use crate::skeleton::{joint_index, parents, rest_joints, Proportions, JOINT_COUNT};

/// Frames linearly blended from the rest pose at the start of every clip.
pub const RELAXATION_FRAMES: usize = 15;

/// Joints that receive a rotation curve, with per-group amplitude bounds
/// (radians).
const ANIMATED: [(&str, f64); 15] = [
    ("pelvis", 0.25),
    ("spine1", 0.12),
    ("spine2", 0.12),
    ("chest", 0.15),
    ("neck", 0.2),
    ("head", 0.2),
    ("l_shoulder", 0.55),
    ("l_elbow", 0.45),
    ("r_shoulder", 0.55),
    ("r_elbow", 0.45),
    ("l_hip", 0.4),
    ("l_knee", 0.45),
    ("r_hip", 0.4),
    ("r_knee", 0.45),
    ("l_collar", 0.1),
];

struct Curve {
    joint: usize,
    axis: [f64; 3],
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

impl Curve {
    /// Raw angle before rest alignment, in radians; `t` in frames.
    fn raw(&self, t: f64, fps: f64) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t / fps + self.phase).sin()
    }
}

/// Generate a motion clip on the canonical skeleton.
///
/// Local joint angles follow smooth sinusoids aligned so frame 0 is the rest
/// pose; frames `1..RELAXATION_FRAMES` interpolate linearly toward the pose
/// at the end of the relaxation window.
pub fn generate_motion(seed: u64, length: usize, fps: f64) -> MotionClip {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let joints = rest_joints(&Proportions::default());
    let parent = parents();

    let curves: Vec<Curve> = ANIMATED
        .iter()
        .map(|(name, max_amp)| {
            let axis = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            Curve {
                joint: joint_index(name).expect("animated joint exists"),
                axis,
                amplitude: rng.gen_range(0.3 * max_amp..*max_amp),
                frequency: rng.gen_range(0.25..0.9),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();

    // Root sway translation (meters), ramped like the angles.
    let sway_amp = [rng.gen_range(0.0..0.08), 0.0, rng.gen_range(0.0..0.08)];
    let sway_freq: f64 = rng.gen_range(0.2..0.5);
    let sway_phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);

    let relax_end = RELAXATION_FRAMES.min(length.saturating_sub(1)) as f64;

    let mut frames = Vec::with_capacity(length);
    for t in 0..length {
        // Angle at frame t after rest alignment; inside the relaxation
        // window it is a linear ramp toward the end-of-window pose, which
        // makes |angle| monotone over the ramp.
        let eval = |curve: &Curve, tf: f64| curve.raw(tf, fps) - curve.raw(0.0, fps);
        let ramp = if relax_end > 0.0 { ((t as f64) / relax_end).min(1.0) } else { 1.0 };

        let mut local_angles = vec![0.0; JOINT_COUNT];
        for curve in &curves {
            let angle = if (t as f64) < relax_end {
                ramp * eval(curve, relax_end)
            } else {
                eval(curve, t as f64)
            };
            local_angles[curve.joint] = angle;
        }

        let sway_raw = |tf: f64| {
            let s = (2.0 * std::f64::consts::PI * sway_freq * tf / fps + sway_phase).sin();
            let s0 = sway_phase.sin();
            [sway_amp[0] * (s - s0), 0.0, sway_amp[2] * (s - s0)]
        };
        let root_offset = if (t as f64) < relax_end {
            let target = sway_raw(relax_end);
            [target[0] * ramp, target[1] * ramp, target[2] * ramp]
        } else {
            sway_raw(t as f64)
        };

        // Forward kinematics: accumulate global rotations and positions.
        let mut global_rot = vec![[[0.0; 3]; 3]; JOINT_COUNT];
        let mut global_pos = vec![[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            let axis = curves.iter().find(|c| c.joint == j).map_or([0.0, 1.0, 0.0], |c| c.axis);
            let local = axis_angle_to_mat3(axis, local_angles[j]);
            match parent[j] {
                None => {
                    global_rot[j] = local;
                    global_pos[j] = add3(joints[j], root_offset);
                }
                Some(p) => {
                    global_rot[j] = mat3_mul(&global_rot[p], &local);
                    let offset = sub3(joints[j], joints[p]);
                    global_pos[j] = add3(global_pos[p], mat3_mul_vec(&global_rot[p], offset));
                }
            }
        }

        let frame: Vec<JointTransform> = (0..JOINT_COUNT)
            .map(|j| JointTransform {
                rotation: orthonormalize(&global_rot[j]),
                translation: sub3(global_pos[j], joints[j]),
            })
            .collect();
        frames.push(frame);
    }

    MotionClip { frames, fps }
}
