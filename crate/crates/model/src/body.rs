//! Body deformation: per-joint spatial features fused by geodesic attention,
//! a point-set skinning predictor, differentiable linear blend skinning and
//! the body losses.

use drape_geom::geodesic::GeodesicMatrix;
use drape_geom::skinning::joint_displacement;
use drape_geom::types::JointTransform;
use drape_nn::{Axis, Dense, Mlp, ParameterStore, Tape, Tensor, Var};
use rand_chacha::ChaCha20Rng;

use crate::error::ModelError;
use crate::losses::{edge_length_deviation, mean_l1};

/// How per-joint features are fused into one vector per vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionVariant {
    /// Learned attention over geodesic distances.
    GeodesicAttention,
    /// Uniform weights; the distance matrix is ignored.
    Uniform,
    /// Concatenate the features of the k nearest joints by raw geodesic
    /// distance through a linear projection.
    NearestConcat,
}

/// Joints used by the nearest-concat fusion.
pub const NEAREST_K: usize = 4;

/// Per-joint feature width.
pub const FEATURE_DIM: usize = 64;

pub const BODY_PREFIX: &str = "body";

#[derive(Debug, Clone)]
pub struct BodyNet {
    pub variant: FusionVariant,
    pub n_joints: usize,
    joint_encoder: Mlp,
    distance_gate: Option<Mlp>,
    nearest_proj: Option<Dense>,
    skin_encoder: Dense,
    skin_decoder: Mlp,
}

impl BodyNet {
    pub fn register(
        store: &mut ParameterStore,
        rng: &mut ChaCha20Rng,
        n_joints: usize,
        variant: FusionVariant,
    ) -> Result<Self, ModelError> {
        let joint_encoder = Mlp::register(store, rng, &format!("{BODY_PREFIX}.pj"), &[4, 32, FEATURE_DIM])?;
        let distance_gate = match variant {
            FusionVariant::GeodesicAttention => {
                Some(Mlp::register(store, rng, &format!("{BODY_PREFIX}.gate"), &[1, 16, 1])?)
            }
            _ => None,
        };
        let nearest_proj = match variant {
            FusionVariant::NearestConcat => Some(Dense::register(
                store,
                rng,
                &format!("{BODY_PREFIX}.nearest"),
                NEAREST_K * FEATURE_DIM,
                FEATURE_DIM,
            )?),
            _ => None,
        };
        let skin_encoder = Dense::register(store, rng, &format!("{BODY_PREFIX}.enc"), FEATURE_DIM, 128)?;
        let skin_decoder =
            Mlp::register(store, rng, &format!("{BODY_PREFIX}.dec"), &[256, 128, 128, n_joints])?;
        Ok(Self { variant, n_joints, joint_encoder, distance_gate, nearest_proj, skin_encoder, skin_decoder })
    }

    pub fn bind(store: &ParameterStore, n_joints: usize, variant: FusionVariant) -> Result<Self, ModelError> {
        let joint_encoder = Mlp::bind(store, &format!("{BODY_PREFIX}.pj"), 2)?;
        let distance_gate = match variant {
            FusionVariant::GeodesicAttention => Some(Mlp::bind(store, &format!("{BODY_PREFIX}.gate"), 2)?),
            _ => None,
        };
        let nearest_proj = match variant {
            FusionVariant::NearestConcat => Some(Dense::bind(store, &format!("{BODY_PREFIX}.nearest"))?),
            _ => None,
        };
        let skin_encoder = Dense::bind(store, &format!("{BODY_PREFIX}.enc"))?;
        let skin_decoder = Mlp::bind(store, &format!("{BODY_PREFIX}.dec"), 3)?;
        Ok(Self { variant, n_joints, joint_encoder, distance_gate, nearest_proj, skin_encoder, skin_decoder })
    }

    /// Relative-offset inputs for every (vertex, joint) pair:
    /// `[dx, dy, dz, |d|]` stacked as an `(n_b * J) x 4` matrix.
    pub fn per_joint_inputs(vertices: &[[f64; 3]], joints: &[[f64; 3]]) -> Tensor {
        let mut data = Vec::with_capacity(vertices.len() * joints.len() * 4);
        for v in vertices {
            for j in joints {
                let d = [v[0] - j[0], v[1] - j[1], v[2] - j[2]];
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                data.extend_from_slice(&[d[0], d[1], d[2], norm]);
            }
        }
        Tensor::matrix(vertices.len() * joints.len(), 4, data).expect("per-joint inputs")
    }

    /// Geodesic distances normalized by character height, `(n_b * J) x 1`.
    pub fn normalized_distances(geodesics: &GeodesicMatrix, height: f64) -> Tensor {
        let scale = if height > 0.0 { 1.0 / height } else { 1.0 };
        Tensor::matrix(
            geodesics.n_body * geodesics.n_joints,
            1,
            geodesics.distances.iter().map(|&d| d * scale).collect(),
        )
        .expect("distance column")
    }

    /// Per-joint features `P` for already-encoded inputs.
    pub fn per_joint_features(&self, tape: &mut Tape, store: &ParameterStore, inputs: Var) -> Result<Var, ModelError> {
        Ok(self.joint_encoder.forward(tape, store, inputs)?)
    }

    /// Fuse per-joint features into one vector per vertex. For the attention
    /// variant this also returns the attention map (rows sum to one).
    pub fn fuse(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        features: Var,
        geodesics: Option<&GeodesicMatrix>,
        height: f64,
        n_body: usize,
    ) -> Result<(Var, Option<Var>), ModelError> {
        match self.variant {
            FusionVariant::GeodesicAttention => {
                let g = geodesics.ok_or_else(|| {
                    ModelError::Invalid("geodesic attention needs a distance matrix".into())
                })?;
                let gate = self.distance_gate.as_ref().expect("gate registered");
                let dist = tape.constant(Self::normalized_distances(g, height));
                let logits_flat = gate.forward(tape, store, dist)?;
                let logits = reshape(tape, logits_flat, n_body, self.n_joints)?;
                let attention = tape.softmax(logits, Axis::Cols);
                let fused = tape.blend_groups(features, attention)?;
                Ok((fused, Some(attention)))
            }
            FusionVariant::Uniform => {
                let weights = tape.constant(Tensor::matrix(
                    n_body,
                    self.n_joints,
                    vec![1.0 / self.n_joints as f64; n_body * self.n_joints],
                )?);
                let fused = tape.blend_groups(features, weights)?;
                Ok((fused, None))
            }
            FusionVariant::NearestConcat => {
                let g = geodesics.ok_or_else(|| {
                    ModelError::Invalid("nearest-joint fusion needs a distance matrix".into())
                })?;
                let mut rows = Vec::with_capacity(n_body * NEAREST_K);
                for i in 0..n_body {
                    let mut order: Vec<usize> = (0..self.n_joints).collect();
                    order.sort_by(|&a, &b| {
                        g.get(i, a).partial_cmp(&g.get(i, b)).unwrap().then(a.cmp(&b))
                    });
                    for &j in order.iter().take(NEAREST_K.min(self.n_joints)) {
                        rows.push(i * self.n_joints + j);
                    }
                    for _ in self.n_joints..NEAREST_K {
                        rows.push(i * self.n_joints + order[0]);
                    }
                }
                let gathered = tape.gather_rows(features, &rows)?;
                // (n_b * K) x D -> n_b x (K * D)
                let grouped = regroup_rows(tape, gathered, n_body, NEAREST_K)?;
                let proj = self.nearest_proj.as_ref().expect("projection registered");
                let fused = proj.forward(tape, store, grouped)?;
                Ok((fused, None))
            }
        }
    }

    /// Skinning weights from fused features: point-set encoder with pooled
    /// context, decoder to joint logits, softmax over joints.
    pub fn predict_skinning(&self, tape: &mut Tape, store: &ParameterStore, fused: Var) -> Result<Var, ModelError> {
        let h = self.skin_encoder.forward(tape, store, fused)?;
        let h = tape.relu(h);
        let n = tape.value(h).rows();
        let pooled = tape.max_pool(h, Axis::Rows);
        let context = tape.repeat_rows(pooled, n)?;
        let joined = tape.concat_cols(&[h, context])?;
        let logits = self.skin_decoder.forward(tape, store, joined)?;
        Ok(tape.softmax(logits, Axis::Cols))
    }

    /// Full forward: inputs to skinning weights for one character.
    pub fn skinning_for(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        vertices: &[[f64; 3]],
        joints: &[[f64; 3]],
        geodesics: Option<&GeodesicMatrix>,
        height: f64,
    ) -> Result<Var, ModelError> {
        let inputs = tape.constant(Self::per_joint_inputs(vertices, joints));
        let features = self.per_joint_features(tape, store, inputs)?;
        let (fused, _) = self.fuse(tape, store, features, geodesics, height, vertices.len())?;
        self.predict_skinning(tape, store, fused)
    }
}

/// Reshape an `(m * g) x 1` column into an `m x g` matrix on the tape.
fn reshape(tape: &mut Tape, flat: Var, m: usize, g: usize) -> Result<Var, ModelError> {
    // A column reshaped row-major is a gather-free relabel; emulate with
    // concat of gathered columns to keep gradients exact.
    let mut cols = Vec::with_capacity(g);
    for c in 0..g {
        let idx: Vec<usize> = (0..m).map(|r| r * g + c).collect();
        cols.push(tape.gather_rows(flat, &idx)?);
    }
    Ok(tape.concat_cols(&cols)?)
}

/// Regroup `(m * k)` rows of width `d` into `m` rows of width `k * d`.
fn regroup_rows(tape: &mut Tape, stacked: Var, m: usize, k: usize) -> Result<Var, ModelError> {
    let mut parts = Vec::with_capacity(k);
    for slot in 0..k {
        let idx: Vec<usize> = (0..m).map(|r| r * k + slot).collect();
        parts.push(tape.gather_rows(stacked, &idx)?);
    }
    Ok(tape.concat_cols(&parts)?)
}

/// Per-(vertex, joint) displacement entries for a frame, ready for
/// [`Tape::blend_groups`] with skinning weights: row `i * J + j` holds
/// `(R_j - I)(v_i - J_j) + t_j`.
pub fn lbs_displacements(vertices: &[[f64; 3]], joints: &[[f64; 3]], frame: &[JointTransform]) -> Tensor {
    let mut data = Vec::with_capacity(vertices.len() * joints.len() * 3);
    for &v in vertices {
        for (j, tf) in joints.iter().zip(frame) {
            let d = joint_displacement(tf, v, *j);
            data.extend_from_slice(&d);
        }
    }
    Tensor::matrix(vertices.len() * joints.len(), 3, data).expect("lbs displacements")
}

/// Differentiable LBS: rest positions plus weight-blended per-joint
/// displacements.
pub fn lbs_deform(
    tape: &mut Tape,
    weights: Var,
    rest: &[[f64; 3]],
    joints: &[[f64; 3]],
    frame: &[JointTransform],
) -> Result<Var, ModelError> {
    let disp = tape.constant(lbs_displacements(rest, joints, frame));
    let blended = tape.blend_groups(disp, weights)?;
    let base = tape.constant(Tensor::from_points(rest));
    Ok(tape.add(base, blended)?)
}

pub struct BodyLosses {
    pub vertex: Var,
    pub edge: Var,
    pub smoothness: Var,
    pub total: Var,
}

pub const LAMBDA_VERTEX: f64 = 1.0;
pub const LAMBDA_EDGE: f64 = 100.0;
pub const LAMBDA_SMOOTH: f64 = 0.01;

/// Vertex L1, edge-length preservation and skinning smoothness over body
/// edges, combined with the configured weights.
pub fn body_losses(
    tape: &mut Tape,
    deformed: Var,
    target: Var,
    rest: &[[f64; 3]],
    edges: &[(usize, usize)],
    weights: Var,
) -> Result<BodyLosses, ModelError> {
    let vertex = mean_l1(tape, deformed, target)?;
    let edge = edge_length_deviation(tape, deformed, rest, edges)?;

    let (src, dst): (Vec<usize>, Vec<usize>) = edges.iter().copied().unzip();
    let wi = tape.gather_rows(weights, &src)?;
    let wj = tape.gather_rows(weights, &dst)?;
    let diff = tape.sub(wi, wj)?;
    let norms = tape.row_norms(diff);
    let smoothness = tape.mean_all(norms);

    let sv = tape.scale(vertex, LAMBDA_VERTEX);
    let se = tape.scale(edge, LAMBDA_EDGE);
    let ss = tape.scale(smoothness, LAMBDA_SMOOTH);
    let partial = tape.add(sv, se)?;
    let total = tape.add(partial, ss)?;
    Ok(BodyLosses { vertex, edge, smoothness, total })
}
