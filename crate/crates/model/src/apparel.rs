//! Autoregressive apparel deformation: per-vertex displacement field over
//! historic states, refined by grouped edge convolutions on the apparel
//! graph.

use drape_geom::types::JointTransform;
use drape_nn::{Dense, Mlp, ParameterStore, Tape, Tensor, Var};
use rand_chacha::ChaCha20Rng;

use crate::error::ModelError;
use crate::losses::{edge_length_deviation, mean_l1};

/// Historic frames consumed per step.
pub const HISTORY_K: usize = 3;

/// Apparel network hyperparameters (the rest of the architecture is fixed).
#[derive(Debug, Clone, Copy)]
pub struct ApparelConfig {
    /// Width of the global motion feature appended to each vertex.
    pub motion_dim: usize,
    /// Number of stacked edge-convolution blocks.
    pub conv_blocks: usize,
    /// Hidden width of each block.
    pub hidden: usize,
}

impl Default for ApparelConfig {
    fn default() -> Self {
        Self { motion_dim: 32, conv_blocks: 3, hidden: 128 }
    }
}

/// Connectivity of the segmented apparel submesh, in compacted apparel
/// indexing. Neighborhoods never cross connected components; isolated
/// vertices get a self-loop so their features still pass through the
/// convolution.
#[derive(Debug, Clone)]
pub struct ApparelGraph {
    pub n_vertices: usize,
    /// Undirected edges in compacted indexing.
    pub edges: Vec<(usize, usize)>,
    /// Connected-component label per vertex.
    pub component_id: Vec<usize>,
    /// Directed convolution pairs: (center, neighbor).
    conv_center: Vec<usize>,
    conv_neighbor: Vec<usize>,
}

impl ApparelGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Self {
        let mask = vec![true; n_vertices];
        let (sel, inv) = drape_geom::mesh::compact_indices(&mask);
        let component_id = drape_geom::mesh::connected_components(&sel, &inv, &edges);

        let mut degree = vec![0usize; n_vertices];
        let mut conv_center = Vec::with_capacity(edges.len() * 2 + n_vertices);
        let mut conv_neighbor = Vec::with_capacity(edges.len() * 2 + n_vertices);
        for &(a, b) in &edges {
            conv_center.push(a);
            conv_neighbor.push(b);
            conv_center.push(b);
            conv_neighbor.push(a);
            degree[a] += 1;
            degree[b] += 1;
        }
        for (v, &d) in degree.iter().enumerate() {
            if d == 0 {
                conv_center.push(v);
                conv_neighbor.push(v);
            }
        }
        Self { n_vertices, edges, component_id, conv_center, conv_neighbor }
    }

    /// Build from a full-mesh apparel mask and mesh faces.
    pub fn from_mask(faces: &[[usize; 3]], mask: &[bool]) -> Self {
        let (_, inverse) = drape_geom::mesh::compact_indices(mask);
        let n = mask.iter().filter(|&&m| m).count();
        let edges = drape_geom::mesh::edges_within(&drape_geom::mesh::mesh_edges(faces), mask)
            .into_iter()
            .map(|(a, b)| (inverse[a], inverse[b]))
            .collect();
        Self::new(n, edges)
    }
}

pub const APPAREL_PREFIX: &str = "apparel";

#[derive(Debug, Clone)]
pub struct ApparelNet {
    pub config: ApparelConfig,
    pub n_joints: usize,
    motion_encoder: Mlp,
    conv_layers: Vec<Dense>,
    decoder: Mlp,
}

impl ApparelNet {
    pub fn register(
        store: &mut ParameterStore,
        rng: &mut ChaCha20Rng,
        n_joints: usize,
        config: ApparelConfig,
    ) -> Result<Self, ModelError> {
        let motion_encoder = Mlp::register(
            store,
            rng,
            &format!("{APPAREL_PREFIX}.motion"),
            &[n_joints * 12, 64, config.motion_dim],
        )?;
        let mut conv_layers = Vec::with_capacity(config.conv_blocks);
        let mut width = 9 + config.motion_dim;
        for b in 0..config.conv_blocks {
            conv_layers.push(Dense::register(
                store,
                rng,
                &format!("{APPAREL_PREFIX}.conv{b}"),
                2 * width,
                config.hidden,
            )?);
            width = config.hidden;
        }
        let decoder = Mlp::register(store, rng, &format!("{APPAREL_PREFIX}.dec"), &[config.hidden, 64, 3])?;
        Ok(Self { config, n_joints, motion_encoder, conv_layers, decoder })
    }

    pub fn bind(store: &ParameterStore, n_joints: usize, config: ApparelConfig) -> Result<Self, ModelError> {
        let motion_encoder = Mlp::bind(store, &format!("{APPAREL_PREFIX}.motion"), 2)?;
        let mut conv_layers = Vec::with_capacity(config.conv_blocks);
        for b in 0..config.conv_blocks {
            conv_layers.push(Dense::bind(store, &format!("{APPAREL_PREFIX}.conv{b}"))?);
        }
        let decoder = Mlp::bind(store, &format!("{APPAREL_PREFIX}.dec"), 2)?;
        Ok(Self { config, n_joints, motion_encoder, conv_layers, decoder })
    }

    /// Flatten one frame of joint transforms into a `1 x (12 J)` row.
    pub fn motion_row(frame: &[JointTransform]) -> Tensor {
        let mut data = Vec::with_capacity(frame.len() * 12);
        for tf in frame {
            for row in &tf.rotation {
                data.extend_from_slice(row);
            }
            data.extend_from_slice(&tf.translation);
        }
        Tensor::matrix(1, data.len(), data).expect("motion row")
    }

    /// Assemble per-vertex features from the last three apparel states and
    /// the current frame's motion: position (relative to the deformed root
    /// joint), velocity, acceleration, and the broadcast motion feature.
    pub fn assemble_features(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        history: &[Var],
        frame: &[JointTransform],
        root_rest: [f64; 3],
    ) -> Result<Var, ModelError> {
        if history.len() < HISTORY_K {
            return Err(ModelError::WarmupIncomplete { got: history.len(), need: HISTORY_K });
        }
        let (h1, h2, h3) = (history[0], history[1], history[2]);
        let n = tape.value(h1).rows();

        // Root joint position at the previous frame removes the global
        // translation nuisance from the position channel.
        let root = [
            root_rest[0] + frame[0].translation[0],
            root_rest[1] + frame[0].translation[1],
            root_rest[2] + frame[0].translation[2],
        ];
        let neg_root = tape.constant(Tensor::row(&[-root[0], -root[1], -root[2]]));
        let position = tape.add_row(h1, neg_root)?;

        let velocity = tape.sub(h1, h2)?;
        let twice_h2 = tape.scale(h2, 2.0);
        let diff = tape.sub(h1, twice_h2)?;
        let acceleration = tape.add(diff, h3)?;

        let motion_in = tape.constant(Self::motion_row(frame));
        let motion_feat = self.motion_encoder.forward(tape, store, motion_in)?;
        let motion_rep = tape.repeat_rows(motion_feat, n)?;

        Ok(tape.concat_cols(&[position, velocity, acceleration, motion_rep])?)
    }

    /// Stacked grouped edge convolutions:
    /// `H'_i = max_{j in N(i)} relu(W [H_i, H_j - H_i] + b)`.
    pub fn edge_conv_stack(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        features: Var,
        graph: &ApparelGraph,
    ) -> Result<Var, ModelError> {
        let mut h = features;
        for layer in &self.conv_layers {
            let center = tape.gather_rows(h, &graph.conv_center)?;
            let neighbor = tape.gather_rows(h, &graph.conv_neighbor)?;
            let diff = tape.sub(neighbor, center)?;
            let edge_feat = tape.concat_cols(&[center, diff])?;
            let mapped = layer.forward(tape, store, edge_feat)?;
            let mapped = tape.relu(mapped);
            h = tape.segment_max(mapped, &graph.conv_center, graph.n_vertices)?;
        }
        Ok(h)
    }

    /// One autoregressive step: predict the displacement and advance the
    /// newest state.
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        history: &[Var],
        frame: &[JointTransform],
        root_rest: [f64; 3],
        graph: &ApparelGraph,
    ) -> Result<Var, ModelError> {
        let features = self.assemble_features(tape, store, history, frame, root_rest)?;
        let refined = self.edge_conv_stack(tape, store, features, graph)?;
        let displacement = self.decoder.forward(tape, store, refined)?;
        Ok(tape.add(history[0], displacement)?)
    }

    /// Autoregressive rollout on one tape, keeping gradients through the
    /// whole recursion. `initial_history` is ordered newest first.
    pub fn rollout(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        initial_history: &[Tensor],
        frames: &[Vec<JointTransform>],
        root_rest: [f64; 3],
        graph: &ApparelGraph,
    ) -> Result<Vec<Var>, ModelError> {
        if initial_history.len() < HISTORY_K {
            return Err(ModelError::WarmupIncomplete { got: initial_history.len(), need: HISTORY_K });
        }
        let mut history: Vec<Var> =
            initial_history.iter().take(HISTORY_K).map(|t| tape.constant(t.clone())).collect();
        let mut outputs = Vec::with_capacity(frames.len());
        for (idx, frame) in frames.iter().enumerate() {
            let next = self.step(tape, store, &history, frame, root_rest, graph)?;
            if !tape.value(next).all_finite() {
                return Err(ModelError::RolloutDiverged { frame: idx });
            }
            history.rotate_right(1);
            history[0] = next;
            outputs.push(next);
        }
        Ok(outputs)
    }
}

pub struct ApparelLosses {
    pub vertex: Var,
    pub edge: Var,
    pub total: Var,
}

pub const LAMBDA_VERTEX: f64 = 1.0;
pub const LAMBDA_EDGE: f64 = 100.0;

/// Vertex L1 against ground truth plus apparel edge-length deviation.
pub fn apparel_losses(
    tape: &mut Tape,
    predicted: Var,
    target: Var,
    rest: &[[f64; 3]],
    edges: &[(usize, usize)],
) -> Result<ApparelLosses, ModelError> {
    let vertex = mean_l1(tape, predicted, target)?;
    let edge = edge_length_deviation(tape, predicted, rest, edges)?;
    let sv = tape.scale(vertex, LAMBDA_VERTEX);
    let se = tape.scale(edge, LAMBDA_EDGE);
    let total = tape.add(sv, se)?;
    Ok(ApparelLosses { vertex, edge, total })
}
