//! Procedural rigged characters: a capsule-segment humanoid body with
//! welded apparel patches (skirt, cape, ponytail), ground-truth skinning,
//! apparel mask and pin rings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use drape_geom::types::{add3, dist3, norm3, scale3, sub3, RiggedCharacter};

use crate::error::SynthError;
use crate::skeleton::{parents, rest_joints, Proportions, CAPSULE_BONES};

/// Tunable knobs for character generation and the physics oracle.
#[derive(Debug, Clone)]
pub struct SynthCharacterSpec {
    /// Ring resolution around each body capsule.
    pub ring_segments: usize,
    /// Skirt patch resolution (rows down, columns around).
    pub skirt_rows: usize,
    pub skirt_cols: usize,
    /// Cape patch resolution (rows down, columns across).
    pub cape_rows: usize,
    pub cape_cols: usize,
    /// Ponytail strip resolution (rows down, columns across).
    pub tail_rows: usize,
    pub tail_cols: usize,
    /// Spring stiffness in frame units (dt^2 absorbed by the integrator).
    pub stiffness: f64,
    /// Velocity damping per substep, in [0, 1).
    pub damping: f64,
    /// Gravity in meters per frame squared.
    pub gravity: [f64; 3],
    /// Verlet substeps per frame.
    pub substeps: usize,
    /// Push free apparel vertices out of body capsules after each substep.
    pub pushout: bool,
}

impl Default for SynthCharacterSpec {
    fn default() -> Self {
        Self {
            ring_segments: 6,
            skirt_rows: 5,
            skirt_cols: 10,
            cape_rows: 5,
            cape_cols: 6,
            tail_rows: 6,
            tail_cols: 2,
            stiffness: 40.0,
            damping: 0.05,
            gravity: [0.0, -0.0109, 0.0],
            substeps: 4,
            pushout: true,
        }
    }
}

impl SynthCharacterSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.stiffness <= 0.0 {
            return Err(SynthError::InvalidSpec(format!("stiffness must be > 0, got {}", self.stiffness)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(SynthError::InvalidSpec(format!("damping must be in [0, 1), got {}", self.damping)));
        }
        if self.ring_segments < 3 {
            return Err(SynthError::InvalidSpec("ring_segments must be at least 3".into()));
        }
        if self.skirt_rows < 2 || self.skirt_cols < 3 || self.cape_rows < 2 || self.cape_cols < 2 || self.tail_rows < 2 || self.tail_cols < 2 {
            return Err(SynthError::InvalidSpec("apparel patches need at least 2x2 resolution".into()));
        }
        if self.substeps == 0 {
            return Err(SynthError::InvalidSpec("substeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// A body capsule: segment between two joints plus a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub joint_a: usize,
    pub joint_b: usize,
    pub radius: f64,
}

/// A generated character bundle: the rigged mesh plus generator metadata
/// the pipeline and oracle need.
#[derive(Debug, Clone)]
pub struct SynthCharacter {
    pub character: RiggedCharacter,
    pub capsules: Vec<Capsule>,
    /// Apparel vertices rigidly attached to the body (driven by LBS).
    pub pin_ring: Vec<usize>,
    /// Body-apparel welding edges, sorted index pairs.
    pub boundary_ring: Vec<(usize, usize)>,
    pub spec: SynthCharacterSpec,
    pub seed: u64,
}

/// Distance from a point to a segment, and the closest point parameter.
pub fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> (f64, f64) {
    let ab = sub3(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 <= 0.0 {
        0.0
    } else {
        let ap = sub3(p, a);
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    };
    let closest = add3(a, scale3(ab, t));
    (dist3(p, closest), t)
}

/// An orthonormal frame (u, v) perpendicular to direction `d`.
fn perpendicular_frame(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let n = norm3(d);
    let dir = if n > 1e-12 { scale3(d, 1.0 / n) } else { [0.0, 1.0, 0.0] };
    let pick = if dir[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let mut u = [
        dir[1] * pick[2] - dir[2] * pick[1],
        dir[2] * pick[0] - dir[0] * pick[2],
        dir[0] * pick[1] - dir[1] * pick[0],
    ];
    let un = norm3(u).max(1e-12);
    u = scale3(u, 1.0 / un);
    let v = [
        dir[1] * u[2] - dir[2] * u[1],
        dir[2] * u[0] - dir[0] * u[2],
        dir[0] * u[1] - dir[1] * u[0],
    ];
    (u, v)
}

struct MeshBuilder {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl MeshBuilder {
    fn push_vertex(&mut self, p: [f64; 3]) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    fn push_face(&mut self, a: usize, b: usize, c: usize) {
        self.faces.push([a, b, c]);
    }
}

/// Nearest body vertex to `p`, lowest index on ties.
fn nearest_vertex(vertices: &[[f64; 3]], limit: usize, p: [f64; 3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in vertices.iter().take(limit).enumerate() {
        let d = dist3(*v, p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Build a deterministic character for the given seed.
pub fn generate_character(spec: &SynthCharacterSpec, seed: u64) -> Result<SynthCharacter, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let prop = Proportions {
        torso: rng.gen_range(0.85..1.2),
        head: rng.gen_range(0.85..1.25),
        arm: rng.gen_range(0.8..1.25),
        leg: rng.gen_range(0.8..1.25),
    };
    let radius_scale: f64 = rng.gen_range(0.85..1.25);
    let skirt_flare: f64 = rng.gen_range(1.3..1.7);
    let skirt_length: f64 = rng.gen_range(0.26..0.36);
    let cape_length: f64 = rng.gen_range(0.34..0.46);
    let tail_length: f64 = rng.gen_range(0.22..0.34);

    let joints = rest_joints(&prop);
    let capsules: Vec<Capsule> = CAPSULE_BONES
        .iter()
        .map(|&(a, b, r)| Capsule { joint_a: a, joint_b: b, radius: r * radius_scale })
        .collect();

    let mut mesh = MeshBuilder { vertices: Vec::new(), faces: Vec::new() };

    // One shared vertex per joint that participates in a capsule.
    let mut joint_vertex = vec![usize::MAX; joints.len()];
    for cap in &capsules {
        for j in [cap.joint_a, cap.joint_b] {
            if joint_vertex[j] == usize::MAX {
                joint_vertex[j] = mesh.push_vertex(joints[j]);
            }
        }
    }

    // Two rings per capsule, fanned to the shared joint vertices. Sharing
    // joint vertices keeps the whole body submesh connected.
    let segs = spec.ring_segments;
    for cap in &capsules {
        let a = joints[cap.joint_a];
        let b = joints[cap.joint_b];
        let axis = sub3(b, a);
        let (u, v) = perpendicular_frame(axis);
        let mut rings = Vec::new();
        for t in [0.3, 0.7] {
            let center = add3(a, scale3(axis, t));
            let mut ring = Vec::with_capacity(segs);
            for k in 0..segs {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / segs as f64;
                let offset = add3(scale3(u, cap.radius * phi.cos()), scale3(v, cap.radius * phi.sin()));
                ring.push(mesh.push_vertex(add3(center, offset)));
            }
            rings.push(ring);
        }
        let va = joint_vertex[cap.joint_a];
        let vb = joint_vertex[cap.joint_b];
        for k in 0..segs {
            let k1 = (k + 1) % segs;
            mesh.push_face(va, rings[0][k], rings[0][k1]);
            mesh.push_face(rings[0][k], rings[1][k], rings[0][k1]);
            mesh.push_face(rings[0][k1], rings[1][k], rings[1][k1]);
            mesh.push_face(rings[1][k], vb, rings[1][k1]);
        }
    }
    let n_body = mesh.vertices.len();

    // --- Apparel patches ------------------------------------------------
    let mut pin_ring = Vec::new();
    let mut boundary_ring = Vec::new();

    let pelvis = joints[0];
    let hip_radius = capsules[0].radius.max(capsules[16].radius) + 0.06;

    // Skirt: a flared tube around the hips; top ring pinned.
    {
        let rows = spec.skirt_rows;
        let cols = spec.skirt_cols;
        let mut grid = vec![vec![0usize; cols]; rows];
        for (r, row) in grid.iter_mut().enumerate() {
            let t = r as f64 / (rows - 1) as f64;
            let radius = hip_radius * (1.0 + (skirt_flare - 1.0) * t);
            let y = pelvis[1] - 0.02 - skirt_length * t;
            for (c, slot) in row.iter_mut().enumerate() {
                let phi = 2.0 * std::f64::consts::PI * c as f64 / cols as f64;
                *slot = mesh.push_vertex([
                    pelvis[0] + radius * phi.cos(),
                    y,
                    pelvis[2] + radius * phi.sin(),
                ]);
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols {
                let c1 = (c + 1) % cols;
                mesh.push_face(grid[r][c], grid[r + 1][c], grid[r][c1]);
                mesh.push_face(grid[r][c1], grid[r + 1][c], grid[r + 1][c1]);
            }
        }
        // Weld the top ring to the nearest body vertices.
        for c in 0..cols {
            let c1 = (c + 1) % cols;
            let body_v = nearest_vertex(&mesh.vertices, n_body, mesh.vertices[grid[0][c]]);
            mesh.push_face(body_v, grid[0][c], grid[0][c1]);
        }
        pin_ring.extend_from_slice(&grid[0]);
    }

    // Cape: a rectangular sheet hanging from the shoulder blades.
    {
        let rows = spec.cape_rows;
        let cols = spec.cape_cols;
        let chest = joints[3];
        let back_z = chest[2] - capsules[2].radius - 0.03;
        let half_w = 0.18 * prop.torso;
        let mut grid = vec![vec![0usize; cols]; rows];
        for (r, row) in grid.iter_mut().enumerate() {
            let t = r as f64 / (rows - 1) as f64;
            let y = chest[1] + 0.08 - cape_length * t;
            let z = back_z - 0.05 * t;
            for (c, slot) in row.iter_mut().enumerate() {
                let s = c as f64 / (cols - 1) as f64 * 2.0 - 1.0;
                *slot = mesh.push_vertex([chest[0] + half_w * s, y, z]);
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols - 1 {
                mesh.push_face(grid[r][c], grid[r + 1][c], grid[r][c + 1]);
                mesh.push_face(grid[r][c + 1], grid[r + 1][c], grid[r + 1][c + 1]);
            }
        }
        for c in 0..cols {
            let body_v = nearest_vertex(&mesh.vertices, n_body, mesh.vertices[grid[0][c]]);
            let c1 = if c + 1 < cols { c + 1 } else { c - 1 };
            mesh.push_face(body_v, grid[0][c], grid[0][c1]);
        }
        pin_ring.extend_from_slice(&grid[0]);
    }

    // Ponytail: a thin strip from the back of the head.
    {
        let rows = spec.tail_rows;
        let cols = spec.tail_cols;
        let anchor = joints[36]; // head_back
        let half_w = 0.03;
        let mut grid = vec![vec![0usize; cols]; rows];
        for (r, row) in grid.iter_mut().enumerate() {
            let t = r as f64 / (rows - 1) as f64;
            let y = anchor[1] - tail_length * t;
            let z = anchor[2] - 0.03 - 0.04 * t;
            for (c, slot) in row.iter_mut().enumerate() {
                let s = if cols > 1 { c as f64 / (cols - 1) as f64 * 2.0 - 1.0 } else { 0.0 };
                *slot = mesh.push_vertex([anchor[0] + half_w * s, y, z]);
            }
        }
        for r in 0..rows - 1 {
            for c in 0..cols - 1 {
                mesh.push_face(grid[r][c], grid[r + 1][c], grid[r][c + 1]);
                mesh.push_face(grid[r][c + 1], grid[r + 1][c], grid[r + 1][c + 1]);
            }
        }
        for c in 0..cols {
            let body_v = nearest_vertex(&mesh.vertices, n_body, mesh.vertices[grid[0][c]]);
            let c1 = if c + 1 < cols { c + 1 } else { c - 1 };
            mesh.push_face(body_v, grid[0][c], grid[0][c1]);
        }
        pin_ring.extend_from_slice(&grid[0]);
    }

    let n_total = mesh.vertices.len();
    let mask: Vec<bool> = (0..n_total).map(|i| i >= n_body).collect();

    // Ground-truth skinning: nearest-two-capsules inverse-distance falloff,
    // weights assigned to the capsule's parent joint.
    let n_joints = joints.len();
    let mut skinning = vec![0.0; n_total * n_joints];
    for (i, &p) in mesh.vertices.iter().enumerate() {
        let mut best: [(f64, usize); 2] = [(f64::INFINITY, 0); 2];
        for cap in &capsules {
            let (d, _) = point_segment_distance(p, joints[cap.joint_a], joints[cap.joint_b]);
            if d < best[0].0 {
                best[1] = best[0];
                best[0] = (d, cap.joint_a);
            } else if d < best[1].0 && cap.joint_a != best[0].1 {
                best[1] = (d, cap.joint_a);
            }
        }
        let w0 = 1.0 / (best[0].0 + 0.01);
        let w1 = 1.0 / (best[1].0 + 0.01);
        let sum = w0 + w1;
        skinning[i * n_joints + best[0].1] += w0 / sum;
        skinning[i * n_joints + best[1].1] += w1 / sum;
    }

    let character = RiggedCharacter {
        vertices: std::mem::take(&mut mesh.vertices),
        faces: std::mem::take(&mut mesh.faces),
        joints,
        parents: parents(),
        gt_skinning: Some(skinning),
        gt_apparel_mask: Some(mask),
    };
    character.validate().map_err(|e| SynthError::Generation(e.to_string()))?;

    // The welding faces above are the only body-apparel connections, so the
    // boundary ring is exactly the mixed edge set.
    let mask_ref = character.gt_apparel_mask.as_ref().expect("mask just built");
    boundary_ring.extend(drape_geom::mesh::boundary_edges(&character, mask_ref));

    pin_ring.sort_unstable();

    let mut synth = SynthCharacter { character, capsules, pin_ring, boundary_ring, spec: spec.clone(), seed };
    pre_drape(&mut synth)?;
    Ok(synth)
}

/// Settle the apparel under gravity in the rest pose and store the draped
/// shape as the rest mesh. Two rounds so the rest lengths derived from the
/// stored mesh are themselves near equilibrium; garments then start each
/// clip draped instead of in the synthetic lattice shape.
fn pre_drape(synth: &mut SynthCharacter) -> Result<(), SynthError> {
    use drape_geom::types::{JointTransform, MotionClip};
    let n_joints = synth.character.joint_count();
    let static_clip = MotionClip {
        frames: vec![vec![JointTransform::identity(); n_joints]; 90],
        fps: 30.0,
    };
    for _ in 0..2 {
        let frames = crate::sim::simulate_full(synth, &static_clip)?;
        let settled = frames.last().expect("static clip has frames").clone();
        let mask = synth.character.gt_apparel_mask.clone().expect("mask present");
        for (i, &apparel) in mask.iter().enumerate() {
            if apparel {
                synth.character.vertices[i] = settled[i];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use drape_geom::compute_geodesic_matrix;

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SynthCharacterSpec::default();
        let a = generate_character(&spec, 42).unwrap();
        let b = generate_character(&spec, 42).unwrap();
        assert_eq!(a.character.vertices, b.character.vertices);
        assert_eq!(a.character.faces, b.character.faces);
        assert_eq!(a.character.joints, b.character.joints);
        assert_eq!(a.character.gt_skinning, b.character.gt_skinning);
        assert_eq!(a.pin_ring, b.pin_ring);
    }

    #[test]
    fn different_seeds_differ() {
        let spec = SynthCharacterSpec::default();
        let a = generate_character(&spec, 1).unwrap();
        let b = generate_character(&spec, 2).unwrap();
        assert_ne!(a.character.vertices, b.character.vertices);
    }

    #[test]
    fn mask_marks_exactly_the_patches() {
        let spec = SynthCharacterSpec::default();
        let c = generate_character(&spec, 7).unwrap();
        let mask = c.character.gt_apparel_mask.as_ref().unwrap();
        let n_apparel = mask.iter().filter(|&&m| m).count();
        let expected = spec.skirt_rows * spec.skirt_cols
            + spec.cape_rows * spec.cape_cols
            + spec.tail_rows * spec.tail_cols;
        assert_eq!(n_apparel, expected);
        // Apparel occupies a contiguous tail of the vertex order.
        let first_apparel = mask.iter().position(|&m| m).unwrap();
        assert!(mask[first_apparel..].iter().all(|&m| m));
    }

    #[test]
    fn body_submesh_is_connected() {
        let spec = SynthCharacterSpec::default();
        let c = generate_character(&spec, 3).unwrap();
        let body_mask: Vec<bool> =
            c.character.gt_apparel_mask.as_ref().unwrap().iter().map(|&m| !m).collect();
        let edges = drape_geom::mesh::mesh_edges(&c.character.faces);
        let (sel, inv) = drape_geom::mesh::compact_indices(&body_mask);
        let comps = drape_geom::mesh::connected_components(&sel, &inv, &edges);
        assert!(comps.iter().all(|&c| c == 0), "body submesh must be one component");
        // And the geodesic matrix is finite with mesh-scale distances.
        let g = compute_geodesic_matrix(&c.character, &body_mask).unwrap();
        assert!(g.distances.iter().all(|d| d.is_finite()));
        assert!(g.max_value() < 10.0);
    }

    #[test]
    fn pin_ring_is_on_the_boundary() {
        let spec = SynthCharacterSpec::default();
        let c = generate_character(&spec, 11).unwrap();
        let mask = c.character.gt_apparel_mask.as_ref().unwrap();
        for &p in &c.pin_ring {
            assert!(mask[p], "pin {p} must be an apparel vertex");
            let touches_body = c.boundary_ring.iter().any(|&(a, b)| a == p || b == p);
            assert!(touches_body, "pin {p} must touch the body");
        }
    }

    #[test]
    fn skinning_rows_are_stochastic() {
        let spec = SynthCharacterSpec::default();
        let c = generate_character(&spec, 5).unwrap();
        let w = c.character.gt_skinning.as_ref().unwrap();
        let j = c.character.joint_count();
        for row in 0..c.character.vertex_count() {
            let sum: f64 = w[row * j..(row + 1) * j].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = SynthCharacterSpec::default();
        spec.damping = 1.5;
        assert!(generate_character(&spec, 1).is_err());
    }
}
