//! Linear blend skinning over per-joint rigid transforms.
//!
//! The blend is applied in delta form,
//! `v' = v + sum_j w_ij * ((R_j - I)(v - J_j) + t_j)`,
//! which is algebraically the standard rest-pose LBS for row-stochastic
//! weights and reconstructs the rest mesh bit-for-bit at the identity frame.

use crate::types::{JointTransform, sub3};

/// Displacement of vertex `v` under joint `j`'s transform:
/// `(R - I)(v - J_j) + t`.
#[inline]
pub fn joint_displacement(tf: &JointTransform, vertex: [f64; 3], joint_rest: [f64; 3]) -> [f64; 3] {
    let d = sub3(vertex, joint_rest);
    let r = &tf.rotation;
    [
        (r[0][0] - 1.0) * d[0] + r[0][1] * d[1] + r[0][2] * d[2] + tf.translation[0],
        r[1][0] * d[0] + (r[1][1] - 1.0) * d[1] + r[1][2] * d[2] + tf.translation[1],
        r[2][0] * d[0] + r[2][1] * d[1] + (r[2][2] - 1.0) * d[2] + tf.translation[2],
    ]
}

/// Deform `rest` vertices with row-major `n x j` weights and one transform
/// per joint.
pub fn lbs_apply(
    rest: &[[f64; 3]],
    weights: &[f64],
    joints: &[[f64; 3]],
    frame: &[JointTransform],
) -> Vec<[f64; 3]> {
    let n = rest.len();
    let j = joints.len();
    debug_assert_eq!(weights.len(), n * j);
    debug_assert_eq!(frame.len(), j);
    let mut out = Vec::with_capacity(n);
    for (i, &v) in rest.iter().enumerate() {
        let row = &weights[i * j..(i + 1) * j];
        let mut acc = [0.0; 3];
        for (jj, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let d = joint_displacement(&frame[jj], v, joints[jj]);
            acc[0] += w * d[0];
            acc[1] += w * d[1];
            acc[2] += w * d[2];
        }
        out.push([v[0] + acc[0], v[1] + acc[1], v[2] + acc[2]]);
    }
    out
}

/// Deformed positions of the joints themselves (`J_j + t_j`).
pub fn deformed_joint_positions(joints: &[[f64; 3]], frame: &[JointTransform]) -> Vec<[f64; 3]> {
    joints
        .iter()
        .zip(frame)
        .map(|(j, tf)| [j[0] + tf.translation[0], j[1] + tf.translation[1], j[2] + tf.translation[2]])
        .collect()
}
