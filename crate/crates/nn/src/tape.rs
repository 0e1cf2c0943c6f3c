//! Reverse-mode differentiation over a recorded sequence of matrix
//! primitives.
//!
//! Every operation appends a node holding its output value and enough
//! bookkeeping to push gradients back to its parents. Gradients accumulate,
//! so a value consumed several times (shared MLPs, rollout recursions) needs
//! no special handling.

use std::collections::HashMap;

use crate::error::NnError;
use crate::params::ParameterStore;
use crate::tensor::{add_assign, matmul, matmul_at, matmul_bt, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Axis selector for reductions and softmax on matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    Scale(Var, f64),
    Matmul(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Softmax { input: Var, axis: Axis },
    Ln(Var),
    Clamp { input: Var, lo: f64, hi: f64 },
    Abs(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    RepeatRows { input: Var, count: usize },
    NeighborMean { input: Var, adjacency: Vec<Vec<usize>> },
    MaxPool { input: Var, axis: Axis, argmax: Vec<usize> },
    GatherRows { input: Var, indices: Vec<usize> },
    SegmentMax { input: Var, argmax: Vec<i64> },
    BlendGroups { values: Var, weights: Var },
    RowNorms(Var),
    SumAll(Var),
    MeanAll(Var),
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_vars: HashMap<String, Var>,
    backward_done: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, grad: None, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward pass w.r.t. `v`, if it received one.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Record a constant input (no parameter binding).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Record a named parameter leaf; repeated requests for the same name
    /// return the same node so gradients accumulate in one place.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<Var, NnError> {
        if let Some(&v) = self.param_vars.get(name) {
            return Ok(v);
        }
        let value = store.value(name)?.clone();
        let v = self.push(value, Op::Leaf);
        self.param_vars.insert(name.to_string(), v);
        Ok(v)
    }

    fn binary_same_shape(&mut self, op_name: &'static str, a: Var, b: Var) -> Result<(), NnError> {
        let (sa, sb) = (self.nodes[a.0].value.shape(), self.nodes[b.0].value.shape());
        if sa != sb {
            return Err(NnError::ShapeMismatch { op: op_name, left: sa.to_vec(), right: sb.to_vec() });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same_shape("add", a, b)?;
        let mut value = self.nodes[a.0].value.clone();
        add_assign(&mut value, &self.nodes[b.0].value);
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same_shape("sub", a, b)?;
        let bd = &self.nodes[b.0].value;
        let mut value = self.nodes[a.0].value.clone();
        for (x, y) in value.data_mut().iter_mut().zip(bd.data()) {
            *x -= y;
        }
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same_shape("mul_elem", a, b)?;
        let bd = &self.nodes[b.0].value;
        let mut value = self.nodes[a.0].value.clone();
        for (x, y) in value.data_mut().iter_mut().zip(bd.data()) {
            *x *= y;
        }
        Ok(self.push(value, Op::MulElem(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.nodes[a.0].value.map(|x| x * factor);
        self.push(value, Op::Scale(a, factor))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.cols() != vb.rows() {
            return Err(NnError::ShapeMismatch {
                op: "matmul",
                left: va.shape().to_vec(),
                right: vb.shape().to_vec(),
            });
        }
        let value = matmul(va, vb);
        Ok(self.push(value, Op::Matmul(a, b)))
    }

    /// Broadcast-add a `1 x n` row vector to every row of an `m x n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, NnError> {
        let (va, vr) = (&self.nodes[a.0].value, &self.nodes[row.0].value);
        if vr.rows() != 1 || va.cols() != vr.cols() {
            return Err(NnError::ShapeMismatch {
                op: "add_row",
                left: va.shape().to_vec(),
                right: vr.shape().to_vec(),
            });
        }
        let n = va.cols();
        let mut value = va.clone();
        for r in 0..va.rows() {
            let slice = &mut value.data_mut()[r * n..(r + 1) * n];
            for (x, y) in slice.iter_mut().zip(vr.data()) {
                *x += y;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(value, Op::Sigmoid(a))
    }

    /// Numerically-stable softmax along the given axis of a matrix.
    pub fn softmax(&mut self, a: Var, axis: Axis) -> Var {
        let va = &self.nodes[a.0].value;
        let (m, n) = (va.rows(), va.cols());
        let mut value = va.clone();
        match axis {
            Axis::Cols => {
                for r in 0..m {
                    let row = &mut value.data_mut()[r * n..(r + 1) * n];
                    softmax_slice(row);
                }
            }
            Axis::Rows => {
                for c in 0..n {
                    let mut col: Vec<f64> = (0..m).map(|r| value.get(r, c)).collect();
                    softmax_slice(&mut col);
                    for (r, &x) in col.iter().enumerate() {
                        value.set(r, c, x);
                    }
                }
            }
        }
        self.push(value, Op::Softmax { input: a, axis })
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(f64::ln);
        self.push(value, Op::Ln(a))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.nodes[a.0].value.map(|x| x.clamp(lo, hi));
        self.push(value, Op::Clamp { input: a, lo, hi })
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.map(f64::abs);
        self.push(value, Op::Abs(a))
    }

    /// Concatenate matrices with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(NnError::Invalid("concat_cols needs at least one input".into()));
        }
        let m = self.nodes[parts[0].0].value.rows();
        for &p in parts {
            if self.nodes[p.0].value.rows() != m {
                return Err(NnError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.nodes[parts[0].0].value.shape().to_vec(),
                    right: self.nodes[p.0].value.shape().to_vec(),
                });
            }
        }
        let total: usize = parts.iter().map(|&p| self.nodes[p.0].value.cols()).sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.nodes[p.0].value.row_slice(r));
            }
        }
        let value = Tensor::matrix(m, total, data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Stack matrices with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(NnError::Invalid("concat_rows needs at least one input".into()));
        }
        let n = self.nodes[parts[0].0].value.cols();
        let mut rows = 0;
        for &p in parts {
            if self.nodes[p.0].value.cols() != n {
                return Err(NnError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.nodes[parts[0].0].value.shape().to_vec(),
                    right: self.nodes[p.0].value.shape().to_vec(),
                });
            }
            rows += self.nodes[p.0].value.rows();
        }
        let mut data = Vec::with_capacity(rows * n);
        for &p in parts {
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        let value = Tensor::matrix(rows, n, data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Mean of neighbor rows per vertex; a vertex with no neighbors keeps
    /// its own row.
    pub fn neighbor_mean(&mut self, a: Var, adjacency: &[Vec<usize>]) -> Result<Var, NnError> {
        let va = &self.nodes[a.0].value;
        if adjacency.len() != va.rows() {
            return Err(NnError::Invalid(format!(
                "neighbor_mean got {} adjacency lists for {} rows",
                adjacency.len(),
                va.rows()
            )));
        }
        let n = va.cols();
        let mut data = vec![0.0; va.rows() * n];
        for (i, neighbors) in adjacency.iter().enumerate() {
            let out = &mut data[i * n..(i + 1) * n];
            if neighbors.is_empty() {
                out.copy_from_slice(va.row_slice(i));
                continue;
            }
            for &j in neighbors {
                for (o, &x) in out.iter_mut().zip(va.row_slice(j)) {
                    *o += x;
                }
            }
            let inv = 1.0 / neighbors.len() as f64;
            for o in out.iter_mut() {
                *o *= inv;
            }
        }
        let value = Tensor::matrix(va.rows(), n, data)?;
        Ok(self.push(value, Op::NeighborMean { input: a, adjacency: adjacency.to_vec() }))
    }

    /// Repeat a `1 x n` row `count` times.
    pub fn repeat_rows(&mut self, a: Var, count: usize) -> Result<Var, NnError> {
        let va = &self.nodes[a.0].value;
        if va.rows() != 1 {
            return Err(NnError::Invalid(format!(
                "repeat_rows needs a single-row input, got {:?}",
                va.shape()
            )));
        }
        let n = va.cols();
        let mut data = Vec::with_capacity(count * n);
        for _ in 0..count {
            data.extend_from_slice(va.data());
        }
        let value = Tensor::matrix(count, n, data)?;
        Ok(self.push(value, Op::RepeatRows { input: a, count }))
    }

    /// Max along an axis; ties resolve to the lowest index.
    pub fn max_pool(&mut self, a: Var, axis: Axis) -> Var {
        let va = &self.nodes[a.0].value;
        let (m, n) = (va.rows(), va.cols());
        let (value, argmax) = match axis {
            Axis::Rows => {
                // Max over rows: output 1 x n.
                let mut best = vec![f64::NEG_INFINITY; n];
                let mut arg = vec![0usize; n];
                for r in 0..m {
                    for c in 0..n {
                        let x = va.get(r, c);
                        if x > best[c] {
                            best[c] = x;
                            arg[c] = r;
                        }
                    }
                }
                (Tensor::matrix(1, n, best).unwrap(), arg)
            }
            Axis::Cols => {
                // Max over columns: output m x 1.
                let mut best = vec![f64::NEG_INFINITY; m];
                let mut arg = vec![0usize; m];
                for r in 0..m {
                    for (c, &x) in va.row_slice(r).iter().enumerate() {
                        if x > best[r] {
                            best[r] = x;
                            arg[r] = c;
                        }
                    }
                }
                (Tensor::matrix(m, 1, best).unwrap(), arg)
            }
        };
        self.push(value, Op::MaxPool { input: a, axis, argmax })
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, NnError> {
        let va = &self.nodes[a.0].value;
        let n = va.cols();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= va.rows() {
                return Err(NnError::Invalid(format!("gather_rows index {i} out of {} rows", va.rows())));
            }
            data.extend_from_slice(va.row_slice(i));
        }
        let value = Tensor::matrix(indices.len(), n, data)?;
        Ok(self.push(value, Op::GatherRows { input: a, indices: indices.to_vec() }))
    }

    /// Per-segment column-wise max: rows of `a` are grouped by `segments`
    /// (one group id per row, ids `< n_groups`). Empty groups produce zero
    /// rows; ties resolve to the lowest row index.
    pub fn segment_max(&mut self, a: Var, segments: &[usize], n_groups: usize) -> Result<Var, NnError> {
        let va = &self.nodes[a.0].value;
        if segments.len() != va.rows() {
            return Err(NnError::Invalid(format!(
                "segment_max got {} segment ids for {} rows",
                segments.len(),
                va.rows()
            )));
        }
        let n = va.cols();
        let mut best = vec![f64::NEG_INFINITY; n_groups * n];
        let mut arg = vec![-1i64; n_groups * n];
        for (r, &g) in segments.iter().enumerate() {
            if g >= n_groups {
                return Err(NnError::Invalid(format!("segment id {g} out of {n_groups} groups")));
            }
            for (c, &x) in va.row_slice(r).iter().enumerate() {
                let slot = g * n + c;
                if x > best[slot] {
                    best[slot] = x;
                    arg[slot] = r as i64;
                }
            }
        }
        for (b, a_) in best.iter_mut().zip(&arg) {
            if *a_ < 0 {
                *b = 0.0;
            }
        }
        let value = Tensor::matrix(n_groups, n, best)?;
        Ok(self.push(value, Op::SegmentMax { input: a, argmax: arg }))
    }

    /// Contract grouped values with per-group weights:
    /// `out[i] = sum_j weights[i, j] * values[i * g + j]`
    /// for `values: (m * g) x d` and `weights: m x g`.
    pub fn blend_groups(&mut self, values: Var, weights: Var) -> Result<Var, NnError> {
        let (vv, vw) = (&self.nodes[values.0].value, &self.nodes[weights.0].value);
        let (m, g) = (vw.rows(), vw.cols());
        if vv.rows() != m * g {
            return Err(NnError::ShapeMismatch {
                op: "blend_groups",
                left: vv.shape().to_vec(),
                right: vw.shape().to_vec(),
            });
        }
        let d = vv.cols();
        let mut data = vec![0.0; m * d];
        for i in 0..m {
            let out_row = &mut data[i * d..(i + 1) * d];
            for j in 0..g {
                let w = vw.get(i, j);
                if w == 0.0 {
                    continue;
                }
                let val_row = vv.row_slice(i * g + j);
                for (o, &x) in out_row.iter_mut().zip(val_row) {
                    *o += w * x;
                }
            }
        }
        let value = Tensor::matrix(m, d, data)?;
        Ok(self.push(value, Op::BlendGroups { values, weights }))
    }

    /// Euclidean norm of each row; gradient is zero for near-zero rows.
    pub fn row_norms(&mut self, a: Var) -> Var {
        let va = &self.nodes[a.0].value;
        let m = va.rows();
        let mut data = Vec::with_capacity(m);
        for r in 0..m {
            let s: f64 = va.row_slice(r).iter().map(|x| x * x).sum();
            data.push(s.sqrt());
        }
        let value = Tensor::matrix(m, 1, data).unwrap();
        self.push(value, Op::RowNorms(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let va = &self.nodes[a.0].value;
        let s: f64 = va.data().iter().sum();
        let value = Tensor::scalar(s / va.len() as f64);
        self.push(value, Op::MeanAll(a))
    }

    /// Reverse sweep from a scalar loss. Errors if called twice on one tape
    /// or if the loss is not a scalar.
    pub fn backward(&mut self, loss: Var) -> Result<(), NnError> {
        if self.backward_done {
            return Err(NnError::BackwardTwice);
        }
        self.backward_done = true;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NnError::Invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let grad_out = match self.nodes[idx].grad.take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(idx, &grad_out);
            self.nodes[idx].grad = Some(grad_out);
        }
        Ok(())
    }

    fn accumulate(&mut self, target: Var, delta: Tensor) {
        match &mut self.nodes[target.0].grad {
            Some(g) => add_assign(g, &delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, idx: usize, grad_out: &Tensor) {
        // Ops are matched by value; parents gather gradient contributions.
        let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(*a, grad_out.clone());
                self.accumulate(*b, grad_out.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(*a, grad_out.clone());
                self.accumulate(*b, grad_out.map(|x| -x));
            }
            Op::MulElem(a, b) => {
                let ga = {
                    let vb = &self.nodes[b.0].value;
                    let mut g = grad_out.clone();
                    for (x, y) in g.data_mut().iter_mut().zip(vb.data()) {
                        *x *= y;
                    }
                    g
                };
                let gb = {
                    let va = &self.nodes[a.0].value;
                    let mut g = grad_out.clone();
                    for (x, y) in g.data_mut().iter_mut().zip(va.data()) {
                        *x *= y;
                    }
                    g
                };
                self.accumulate(*a, ga);
                self.accumulate(*b, gb);
            }
            Op::Scale(a, factor) => {
                let f = *factor;
                self.accumulate(*a, grad_out.map(|x| x * f));
            }
            Op::Matmul(a, b) => {
                let ga = matmul_bt(grad_out, &self.nodes[b.0].value);
                let gb = matmul_at(&self.nodes[a.0].value, grad_out);
                self.accumulate(*a, ga);
                self.accumulate(*b, gb);
            }
            Op::AddRow(a, row) => {
                let n = grad_out.cols();
                let mut row_grad = vec![0.0; n];
                for r in 0..grad_out.rows() {
                    for (c, &g) in grad_out.row_slice(r).iter().enumerate() {
                        row_grad[c] += g;
                    }
                }
                self.accumulate(*a, grad_out.clone());
                self.accumulate(*row, Tensor::matrix(1, n, row_grad).unwrap());
            }
            Op::Relu(a) => {
                let va = &self.nodes[a.0].value;
                let mut g = grad_out.clone();
                for (x, &v) in g.data_mut().iter_mut().zip(va.data()) {
                    if v <= 0.0 {
                        *x = 0.0;
                    }
                }
                self.accumulate(*a, g);
            }
            Op::Sigmoid(a) => {
                let vy = &self.nodes[idx].value;
                let mut g = grad_out.clone();
                for (x, &y) in g.data_mut().iter_mut().zip(vy.data()) {
                    *x *= y * (1.0 - y);
                }
                self.accumulate(*a, g);
            }
            Op::Softmax { input, axis } => {
                let y = &self.nodes[idx].value;
                let (m, n) = (y.rows(), y.cols());
                let mut g = grad_out.clone();
                match axis {
                    Axis::Cols => {
                        for r in 0..m {
                            let yrow = y.row_slice(r);
                            let grow = &mut g.data_mut()[r * n..(r + 1) * n];
                            let dot: f64 = yrow.iter().zip(grow.iter()).map(|(a, b)| a * b).sum();
                            for (gi, &yi) in grow.iter_mut().zip(yrow) {
                                *gi = yi * (*gi - dot);
                            }
                        }
                    }
                    Axis::Rows => {
                        for c in 0..n {
                            let mut dot = 0.0;
                            for r in 0..m {
                                dot += y.get(r, c) * g.get(r, c);
                            }
                            for r in 0..m {
                                let yi = y.get(r, c);
                                let gi = g.get(r, c);
                                g.set(r, c, yi * (gi - dot));
                            }
                        }
                    }
                }
                self.accumulate(*input, g);
            }
            Op::Ln(a) => {
                let va = &self.nodes[a.0].value;
                let mut g = grad_out.clone();
                for (x, &v) in g.data_mut().iter_mut().zip(va.data()) {
                    *x /= v;
                }
                self.accumulate(*a, g);
            }
            Op::Clamp { input, lo, hi } => {
                let va = &self.nodes[input.0].value;
                let mut g = grad_out.clone();
                for (x, &v) in g.data_mut().iter_mut().zip(va.data()) {
                    if v <= *lo || v >= *hi {
                        *x = 0.0;
                    }
                }
                self.accumulate(*input, g);
            }
            Op::Abs(a) => {
                let va = &self.nodes[a.0].value;
                let mut g = grad_out.clone();
                for (x, &v) in g.data_mut().iter_mut().zip(va.data()) {
                    *x *= if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
                self.accumulate(*a, g);
            }
            Op::ConcatCols(parts) => {
                let m = grad_out.rows();
                let mut offset = 0;
                for &p in parts {
                    let pc = self.nodes[p.0].value.cols();
                    let mut data = Vec::with_capacity(m * pc);
                    for r in 0..m {
                        let row = grad_out.row_slice(r);
                        data.extend_from_slice(&row[offset..offset + pc]);
                    }
                    self.accumulate(p, Tensor::matrix(m, pc, data).unwrap());
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let n = grad_out.cols();
                let mut offset = 0;
                for &p in parts {
                    let pr = self.nodes[p.0].value.rows();
                    let mut data = Vec::with_capacity(pr * n);
                    for r in 0..pr {
                        data.extend_from_slice(grad_out.row_slice(offset + r));
                    }
                    self.accumulate(p, Tensor::matrix(pr, n, data).unwrap());
                    offset += pr;
                }
            }
            Op::NeighborMean { input, adjacency } => {
                let vi = &self.nodes[input.0].value;
                let n = vi.cols();
                let mut g = Tensor::zeros(vi.shape().to_vec());
                for (i, neighbors) in adjacency.iter().enumerate() {
                    let grow = grad_out.row_slice(i).to_vec();
                    if neighbors.is_empty() {
                        let slot = &mut g.data_mut()[i * n..(i + 1) * n];
                        for (x, &y) in slot.iter_mut().zip(&grow) {
                            *x += y;
                        }
                        continue;
                    }
                    let inv = 1.0 / neighbors.len() as f64;
                    for &j in neighbors {
                        let slot = &mut g.data_mut()[j * n..(j + 1) * n];
                        for (x, &y) in slot.iter_mut().zip(&grow) {
                            *x += y * inv;
                        }
                    }
                }
                self.accumulate(*input, g);
            }
            Op::RepeatRows { input, count } => {
                let n = grad_out.cols();
                let mut acc = vec![0.0; n];
                for r in 0..*count {
                    for (c, &g) in grad_out.row_slice(r).iter().enumerate() {
                        acc[c] += g;
                    }
                }
                self.accumulate(*input, Tensor::matrix(1, n, acc).unwrap());
            }
            Op::MaxPool { input, axis, argmax } => {
                let vi = &self.nodes[input.0].value;
                let mut g = Tensor::zeros(vi.shape().to_vec());
                match axis {
                    Axis::Rows => {
                        for (c, &r) in argmax.iter().enumerate() {
                            g.set(r, c, grad_out.get(0, c));
                        }
                    }
                    Axis::Cols => {
                        for (r, &c) in argmax.iter().enumerate() {
                            g.set(r, c, grad_out.get(r, 0));
                        }
                    }
                }
                self.accumulate(*input, g);
            }
            Op::GatherRows { input, indices } => {
                let vi = &self.nodes[input.0].value;
                let n = vi.cols();
                let mut g = Tensor::zeros(vi.shape().to_vec());
                for (r, &src) in indices.iter().enumerate() {
                    let grow = grad_out.row_slice(r);
                    let slot = &mut g.data_mut()[src * n..(src + 1) * n];
                    for (x, &y) in slot.iter_mut().zip(grow) {
                        *x += y;
                    }
                }
                self.accumulate(*input, g);
            }
            Op::SegmentMax { input, argmax } => {
                let vi = &self.nodes[input.0].value;
                let n = vi.cols();
                let mut g = Tensor::zeros(vi.shape().to_vec());
                for (slot, &src) in argmax.iter().enumerate() {
                    if src < 0 {
                        continue;
                    }
                    let group = slot / n;
                    let c = slot % n;
                    let cur = g.get(src as usize, c);
                    g.set(src as usize, c, cur + grad_out.get(group, c));
                }
                self.accumulate(*input, g);
            }
            Op::BlendGroups { values, weights } => {
                let vv = &self.nodes[values.0].value;
                let vw = &self.nodes[weights.0].value;
                let (m, g_) = (vw.rows(), vw.cols());
                let d = vv.cols();
                let mut gv = Tensor::zeros(vv.shape().to_vec());
                let mut gw = Tensor::zeros(vw.shape().to_vec());
                for i in 0..m {
                    let gout_row = grad_out.row_slice(i);
                    for j in 0..g_ {
                        let w = vw.get(i, j);
                        let val_row = vv.row_slice(i * g_ + j);
                        let gv_row = &mut gv.data_mut()[(i * g_ + j) * d..(i * g_ + j + 1) * d];
                        let mut dot = 0.0;
                        for ((gvx, &go), &vx) in gv_row.iter_mut().zip(gout_row).zip(val_row) {
                            *gvx += w * go;
                            dot += go * vx;
                        }
                        gw.set(i, j, gw.get(i, j) + dot);
                    }
                }
                self.accumulate(*values, gv);
                self.accumulate(*weights, gw);
            }
            Op::RowNorms(a) => {
                let va = &self.nodes[a.0].value;
                let (m, n) = (va.rows(), va.cols());
                let vy = &self.nodes[idx].value;
                let mut g = Tensor::zeros(va.shape().to_vec());
                for r in 0..m {
                    let norm = vy.get(r, 0);
                    if norm < 1e-12 {
                        continue;
                    }
                    let go = grad_out.get(r, 0) / norm;
                    let src = va.row_slice(r);
                    let dst = &mut g.data_mut()[r * n..(r + 1) * n];
                    for (x, &v) in dst.iter_mut().zip(src) {
                        *x = go * v;
                    }
                }
                self.accumulate(*a, g);
            }
            Op::SumAll(a) => {
                let shape = self.nodes[a.0].value.shape().to_vec();
                let g = grad_out.item();
                let len: usize = shape.iter().product();
                self.accumulate(*a, Tensor::new(shape, vec![g; len]).unwrap());
            }
            Op::MeanAll(a) => {
                let shape = self.nodes[a.0].value.shape().to_vec();
                let len: usize = shape.iter().product();
                let g = grad_out.item() / len as f64;
                self.accumulate(*a, Tensor::new(shape, vec![g; len]).unwrap());
            }
        }
        self.nodes[idx].op = op;
    }

    /// Add accumulated parameter-leaf gradients into the store.
    pub fn apply_param_grads(&self, store: &mut ParameterStore) -> Result<(), NnError> {
        for (name, var) in &self.param_vars {
            if let Some(g) = &self.nodes[var.0].grad {
                store.accumulate_grad(name, g)?;
            }
        }
        Ok(())
    }
}

fn softmax_slice(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}
