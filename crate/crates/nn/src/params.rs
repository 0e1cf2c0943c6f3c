//! Named trainable arrays with gradients and AdamW moment buffers.

use std::collections::HashMap;

use crate::error::NnError;
use crate::tensor::Tensor;

struct Slot {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Flat collection of named parameters. Iteration follows registration
/// order so training is deterministic.
#[derive(Default)]
pub struct ParameterStore {
    slots: Vec<Slot>,
    index: HashMap<String, usize>,
    step: u64,
}

/// Decoupled-weight-decay Adam settings.
#[derive(Debug, Clone, Copy)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, value: Tensor) -> Result<(), NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParameter(name.to_string()));
        }
        let shape = value.shape().to_vec();
        self.index.insert(name.to_string(), self.slots.len());
        self.slots.push(Slot {
            name: name.to_string(),
            value,
            grad: Tensor::zeros(shape.clone()),
            m: Tensor::zeros(shape.clone()),
            v: Tensor::zeros(shape),
        });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn set_step_count(&mut self, step: u64) {
        self.step = step;
    }

    fn slot(&self, name: &str) -> Result<&Slot, NnError> {
        self.index
            .get(name)
            .map(|&i| &self.slots[i])
            .ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    fn slot_mut(&mut self, name: &str) -> Result<&mut Slot, NnError> {
        let i = *self.index.get(name).ok_or_else(|| NnError::UnknownParameter(name.to_string()))?;
        Ok(&mut self.slots[i])
    }

    pub fn value(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(&self.slot(name)?.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor, NnError> {
        Ok(&mut self.slot_mut(name)?.value)
    }

    pub fn grad(&self, name: &str) -> Result<&Tensor, NnError> {
        Ok(&self.slot(name)?.grad)
    }

    pub fn accumulate_grad(&mut self, name: &str, delta: &Tensor) -> Result<(), NnError> {
        let slot = self.slot_mut(name)?;
        if slot.grad.shape() != delta.shape() {
            return Err(NnError::ShapeMismatch {
                op: "accumulate_grad",
                left: slot.grad.shape().to_vec(),
                right: delta.shape().to_vec(),
            });
        }
        crate::tensor::add_assign(&mut slot.grad, delta);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for slot in &mut self.slots {
            for g in slot.grad.data_mut() {
                *g = 0.0;
            }
        }
    }

    /// One AdamW update over all parameters. Parameters with non-finite
    /// gradients are skipped (their gradients reset to zero, a warning is
    /// logged). Errors if a parameter value turns non-finite.
    pub fn adamw_step(&mut self, cfg: &AdamWConfig) -> Result<(), NnError> {
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        for slot in &mut self.slots {
            if !slot.grad.all_finite() {
                log::warn!("non-finite gradient for '{}'; skipping its update", slot.name);
                for g in slot.grad.data_mut() {
                    *g = 0.0;
                }
                continue;
            }
            let n = slot.value.len();
            for i in 0..n {
                let g = slot.grad.data()[i];
                let m = cfg.beta1 * slot.m.data()[i] + (1.0 - cfg.beta1) * g;
                let v = cfg.beta2 * slot.v.data()[i] + (1.0 - cfg.beta2) * g * g;
                slot.m.data_mut()[i] = m;
                slot.v.data_mut()[i] = v;
                let m_hat = m / bias1;
                let v_hat = v / bias2;
                let w = slot.value.data()[i];
                slot.value.data_mut()[i] =
                    w - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps) - cfg.lr * cfg.weight_decay * w;
            }
            if !slot.value.all_finite() {
                return Err(NnError::NonFinite(format!("parameter '{}' after step", slot.name)));
            }
        }
        Ok(())
    }

    /// Iterate (name, value) pairs in registration order.
    pub fn iter_values(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.slots.iter().map(|s| (s.name.as_str(), &s.value))
    }

    /// Moment buffers, exposed for checkpointing.
    pub fn optimizer_state(&self, name: &str) -> Result<(&Tensor, &Tensor), NnError> {
        let slot = self.slot(name)?;
        Ok((&slot.m, &slot.v))
    }

    pub fn set_optimizer_state(&mut self, name: &str, m: Tensor, v: Tensor) -> Result<(), NnError> {
        let slot = self.slot_mut(name)?;
        if m.shape() != slot.value.shape() || v.shape() != slot.value.shape() {
            return Err(NnError::ShapeMismatch {
                op: "set_optimizer_state",
                left: slot.value.shape().to_vec(),
                right: m.shape().to_vec(),
            });
        }
        slot.m = m;
        slot.v = v;
        Ok(())
    }
}
