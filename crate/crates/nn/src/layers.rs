//! Dense layers and small MLP stacks shared by all networks.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::NnError;
use crate::params::ParameterStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Glorot-uniform initialization: uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rng: &mut ChaCha20Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::matrix(fan_in, fan_out, data).unwrap()
}

/// A dense layer bound to two named parameters.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: String,
    pub bias: String,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    /// Register fresh parameters under `prefix.w` / `prefix.b`.
    pub fn register(
        store: &mut ParameterStore,
        rng: &mut ChaCha20Rng,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self, NnError> {
        let weight = format!("{prefix}.w");
        let bias = format!("{prefix}.b");
        store.register(&weight, glorot_uniform(rng, in_dim, out_dim))?;
        store.register(&bias, Tensor::zeros(vec![1, out_dim]))?;
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    /// Bind to already-registered parameters (checkpoint load path).
    pub fn bind(store: &ParameterStore, prefix: &str) -> Result<Self, NnError> {
        let weight = format!("{prefix}.w");
        let bias = format!("{prefix}.b");
        let w = store.value(&weight)?;
        let shape = w.shape().to_vec();
        if shape.len() != 2 {
            return Err(NnError::Invalid(format!("dense weight '{weight}' has shape {shape:?}")));
        }
        store.value(&bias)?;
        Ok(Self { weight, bias, in_dim: shape[0], out_dim: shape[1] })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var, NnError> {
        let w = tape.param(store, &self.weight)?;
        let b = tape.param(store, &self.bias)?;
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }

    pub fn param_names(&self) -> [&str; 2] {
        [&self.weight, &self.bias]
    }
}

/// Dense stack with ReLU between layers and a linear final layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `widths` lists input plus every layer output, e.g. `[3, 64, 1]`.
    pub fn register(
        store: &mut ParameterStore,
        rng: &mut ChaCha20Rng,
        prefix: &str,
        widths: &[usize],
    ) -> Result<Self, NnError> {
        if widths.len() < 2 {
            return Err(NnError::Invalid("mlp needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for i in 0..widths.len() - 1 {
            layers.push(Dense::register(
                store,
                rng,
                &format!("{prefix}.{i}"),
                widths[i],
                widths[i + 1],
            )?);
        }
        Ok(Self { layers })
    }

    pub fn bind(store: &ParameterStore, prefix: &str, n_layers: usize) -> Result<Self, NnError> {
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            layers.push(Dense::bind(store, &format!("{prefix}.{i}"))?);
        }
        Ok(Self { layers })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var, NnError> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.layers.iter().flat_map(|l| l.param_names()).collect()
    }
}
