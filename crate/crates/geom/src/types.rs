//! Core domain types: rigged characters, joint transforms, motion clips.

use crate::error::GeomError;

/// Index used to mark the root joint in `parents` arrays stored on disk.
pub const ROOT_SENTINEL: i64 = -1;

/// A 3x3 rotation plus translation for one joint at one frame.
///
/// The transform acts on a point `x` relative to the joint's rest position
/// `j` as `R (x - j) + j + t`, i.e. `t` is the displacement of the joint
/// itself and `R` its global orientation change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl JointTransform {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0, 0.0, 0.0],
        }
    }

    /// Max deviation of `R^T R` from identity plus determinant error.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let mut max_dev: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let mut dot = 0.0;
                for k in 0..3 {
                    dot += r[k][a] * r[k][b];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                max_dev = max_dev.max((dot - target).abs());
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        max_dev.max((det - 1.0).abs())
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let mut dev: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let target = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((self.rotation[a][b] - target).abs());
            }
        }
        for c in 0..3 {
            dev = dev.max(self.translation[c].abs());
        }
        dev <= tol
    }

    pub fn apply(&self, point: [f64; 3], joint_rest: [f64; 3]) -> [f64; 3] {
        let d = sub3(point, joint_rest);
        let rd = mat3_mul_vec(&self.rotation, d);
        add3(add3(rd, joint_rest), self.translation)
    }
}

/// A rigged character in rest pose.
///
/// Ground-truth skinning and the apparel mask are only present for
/// synthetically generated characters; the skinning matrix covers all `N`
/// vertices (apparel rows drive pinned vertices in the physics oracle).
#[derive(Debug, Clone)]
pub struct RiggedCharacter {
    /// Rest-pose vertex positions in meters, N x 3.
    pub vertices: Vec<[f64; 3]>,
    /// Triangle faces, indices into `vertices`.
    pub faces: Vec<[usize; 3]>,
    /// Rest-pose joint positions, J x 3.
    pub joints: Vec<[f64; 3]>,
    /// Per-joint parent index; `None` for the single root.
    pub parents: Vec<Option<usize>>,
    /// Optional row-stochastic N x J skinning weights (row-major).
    pub gt_skinning: Option<Vec<f64>>,
    /// Optional per-vertex apparel flag (true = apparel).
    pub gt_apparel_mask: Option<Vec<bool>>,
}

impl RiggedCharacter {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Skeleton height: max minus min joint y coordinate in rest pose.
    pub fn skeleton_height(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in &self.joints {
            lo = lo.min(j[1]);
            hi = hi.max(j[1]);
        }
        if lo.is_finite() && hi.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// Validate the structural invariants; called by the scene loader.
    pub fn validate(&self) -> Result<(), GeomError> {
        let n = self.vertices.len();
        let j = self.joints.len();
        if n < 4 {
            return Err(GeomError::Invalid(format!("need at least 4 vertices, got {n}")));
        }
        if j < 1 {
            return Err(GeomError::Invalid("need at least one joint".into()));
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(GeomError::Invalid(format!(
                        "face {fi} references vertex {v} out of range (N = {n})"
                    )));
                }
            }
        }
        if self.parents.len() != j {
            return Err(GeomError::Invalid(format!(
                "parents length {} != joint count {j}",
                self.parents.len()
            )));
        }
        let roots = self.parents.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return Err(GeomError::Invalid(format!("expected one root joint, found {roots}")));
        }
        // A parent graph is a tree iff every non-root joint reaches the root
        // without revisiting itself.
        for start in 0..j {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = self.parents[cur] {
                if p >= j {
                    return Err(GeomError::Invalid(format!("joint {cur} has parent {p} out of range")));
                }
                cur = p;
                steps += 1;
                if steps > j {
                    return Err(GeomError::Invalid(format!("parent cycle involving joint {start}")));
                }
            }
        }
        if let Some(w) = &self.gt_skinning {
            if w.len() != n * j {
                return Err(GeomError::Invalid(format!(
                    "gt_skinning has {} entries, expected {}",
                    w.len(),
                    n * j
                )));
            }
            for row in 0..n {
                let sum: f64 = w[row * j..(row + 1) * j].iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(GeomError::Invalid(format!(
                        "gt_skinning row {row} sums to {sum}, expected 1"
                    )));
                }
            }
        }
        if let Some(m) = &self.gt_apparel_mask {
            if m.len() != n {
                return Err(GeomError::Invalid(format!(
                    "gt_apparel_mask has {} entries, expected {n}",
                    m.len()
                )));
            }
        }
        Ok(())
    }
}

/// A reference motion: per-frame joint transforms at a fixed frame rate.
#[derive(Debug, Clone)]
pub struct MotionClip {
    pub frames: Vec<Vec<JointTransform>>,
    pub fps: f64,
}

impl MotionClip {
    pub fn joint_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.len())
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Validate rotations are orthonormal, all frames agree on J, and frame
    /// zero is the rest pose.
    pub fn validate(&self) -> Result<(), GeomError> {
        let j = self.joint_count();
        if j == 0 {
            return Err(GeomError::Invalid("motion clip has no joints".into()));
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.len() != j {
                return Err(GeomError::Invalid(format!(
                    "frame {t} has {} joints, expected {j}",
                    frame.len()
                )));
            }
            for (ji, tf) in frame.iter().enumerate() {
                let err = tf.orthonormality_error();
                if err > 1e-6 {
                    return Err(GeomError::Invalid(format!(
                        "frame {t} joint {ji}: rotation not orthonormal (deviation {err:.3e})"
                    )));
                }
            }
        }
        if let Some(first) = self.frames.first() {
            for (ji, tf) in first.iter().enumerate() {
                if !tf.is_identity(1e-9) {
                    return Err(GeomError::Invalid(format!(
                        "frame 0 joint {ji} is not the rest pose"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-frame full-mesh vertex positions, used for ground truth animation
/// and predicted output alike.
#[derive(Debug, Clone)]
pub struct DeformationClip {
    pub frames: Vec<Vec<[f64; 3]>>,
}

impl DeformationClip {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}

pub fn mat3_mul_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            for jj in 0..3 {
                out[i][jj] += a[i][k] * b[k][jj];
            }
        }
    }
    out
}

/// Rotation about an arbitrary axis by `angle` radians (Rodrigues).
pub fn axis_angle_to_mat3(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let n = norm3(axis);
    if n < 1e-12 {
        return JointTransform::identity().rotation;
    }
    let [x, y, z] = scale3(axis, 1.0 / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Re-orthonormalize a rotation matrix via Gram-Schmidt on its rows.
pub fn orthonormalize(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut r0 = m[0];
    let n0 = norm3(r0).max(1e-300);
    r0 = scale3(r0, 1.0 / n0);
    let mut r1 = sub3(m[1], scale3(r0, dot3(m[1], r0)));
    let n1 = norm3(r1).max(1e-300);
    r1 = scale3(r1, 1.0 / n1);
    let r2 = [
        r0[1] * r1[2] - r0[2] * r1[1],
        r0[2] * r1[0] - r0[0] * r1[2],
        r0[0] * r1[1] - r0[1] * r1[0],
    ];
    [r0, r1, r2]
}
