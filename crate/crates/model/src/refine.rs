//! Joint refinement: merge body and apparel outputs back into original
//! vertex order and predict a small per-vertex correction.

use drape_nn::{Mlp, ParameterStore, Tape, Tensor, Var};
use rand_chacha::ChaCha20Rng;

use crate::error::ModelError;
use crate::losses::{edge_length_deviation, mean_l1};
use crate::partition::Partition;

pub const REFINE_PREFIX: &str = "refine";

#[derive(Debug, Clone)]
pub struct RefineNet {
    mlp: Mlp,
}

impl RefineNet {
    pub fn register(store: &mut ParameterStore, rng: &mut ChaCha20Rng) -> Result<Self, ModelError> {
        Ok(Self { mlp: Mlp::register(store, rng, &format!("{REFINE_PREFIX}.mlp"), &[7, 64, 64, 3])? })
    }

    pub fn bind(store: &ParameterStore) -> Result<Self, ModelError> {
        Ok(Self { mlp: Mlp::bind(store, &format!("{REFINE_PREFIX}.mlp"), 3)? })
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.mlp.param_names()
    }

    /// Tile module outputs back into original vertex order and apply the
    /// refinement MLP over (position, apparel probability, one-ring mean).
    ///
    /// Returns `(refined, tiled, delta)`.
    pub fn joint_refine(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        body: Var,
        apparel: Var,
        partition: &Partition,
        probabilities: &[f64],
        adjacency: &[Vec<usize>],
    ) -> Result<(Var, Var, Var), ModelError> {
        let n = partition.len();
        if partition.tile_order.len() != n || n == 0 {
            return Err(ModelError::BadTileOrder { got: partition.tile_order.len(), expected: n });
        }
        if tape.value(body).rows() != partition.n_body()
            || tape.value(apparel).rows() != partition.n_apparel()
        {
            return Err(ModelError::Invalid(format!(
                "joint_refine got {}+{} rows for a {}+{} partition",
                tape.value(body).rows(),
                tape.value(apparel).rows(),
                partition.n_body(),
                partition.n_apparel()
            )));
        }
        let stacked = tape.concat_rows(&[body, apparel])?;
        let tiled = tape.gather_rows(stacked, &partition.tile_order)?;

        let probs = tape.constant(Tensor::matrix(n, 1, probabilities.to_vec())?);
        let ring = tape.neighbor_mean(tiled, adjacency)?;
        let features = tape.concat_cols(&[tiled, probs, ring])?;
        let delta = self.mlp.forward(tape, store, features)?;
        let refined = tape.add(tiled, delta)?;
        Ok((refined, tiled, delta))
    }
}

pub struct RefineLosses {
    pub vertex: Var,
    pub edge: Var,
    pub regularizer: Var,
    pub total: Var,
}

pub const LAMBDA_VERTEX: f64 = 1.0;
pub const LAMBDA_EDGE: f64 = 100.0;
pub const LAMBDA_REG: f64 = 0.01;

/// Full-mesh vertex and edge losses plus the squared-norm regularizer on
/// the refinement displacements.
pub fn refine_losses(
    tape: &mut Tape,
    refined: Var,
    target: Var,
    rest: &[[f64; 3]],
    all_edges: &[(usize, usize)],
    delta: Var,
) -> Result<RefineLosses, ModelError> {
    let vertex = mean_l1(tape, refined, target)?;
    let edge = edge_length_deviation(tape, refined, rest, all_edges)?;
    let n = tape.value(delta).rows() as f64;
    let sq = tape.mul_elem(delta, delta)?;
    let sum = tape.sum_all(sq);
    let regularizer = tape.scale(sum, 1.0 / n);

    let sv = tape.scale(vertex, LAMBDA_VERTEX);
    let se = tape.scale(edge, LAMBDA_EDGE);
    let sr = tape.scale(regularizer, LAMBDA_REG);
    let partial = tape.add(sv, se)?;
    let total = tape.add(partial, sr)?;
    Ok(RefineLosses { vertex, edge, regularizer, total })
}
