//! Dense row-major f64 tensors. Rank is arbitrary, but the tape operates on
//! matrices; scalars are 1x1.

use crate::error::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(NnError::Invalid(format!(
                "shape {shape:?} wants {expect} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![0.0; len] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1, 1], data: vec![value] }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn row(values: &[f64]) -> Self {
        Self { shape: vec![1, values.len()], data: values.to_vec() }
    }

    /// Build an `n x 3` matrix from point rows.
    pub fn from_points(points: &[[f64; 3]]) -> Self {
        let mut data = Vec::with_capacity(points.len() * 3);
        for p in points {
            data.extend_from_slice(p);
        }
        Self { shape: vec![points.len(), 3], data }
    }

    pub fn to_points(&self) -> Vec<[f64; 3]> {
        assert_eq!(self.cols(), 3, "to_points needs an n x 3 tensor");
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of a rank-2 tensor (rank-1 counts as a single row).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1..].iter().product(),
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let cols = self.cols();
        self.data[r * cols + c] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self, NnError> {
        Tensor::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// `acc += s` elementwise; shapes must already agree.
pub fn add_assign(acc: &mut Tensor, s: &Tensor) {
    debug_assert_eq!(acc.shape, s.shape);
    for (a, b) in acc.data.iter_mut().zip(&s.data) {
        *a += b;
    }
}

/// Row-major matrix product `(m x k) . (k x n)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    debug_assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    let ad = a.data();
    let bd = b.data();
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &bd[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor { shape: vec![m, n], data: out }
}

/// `a . b^T` for `(m x k) . (n x k)^T -> m x n`.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let (n, k2) = (b.rows(), b.cols());
    debug_assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = a.row_slice(i);
        for j in 0..n {
            let brow = b.row_slice(j);
            let mut acc = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out[i * n + j] = acc;
        }
    }
    Tensor { shape: vec![m, n], data: out }
}

/// `a^T . b` for `(k x m)^T . (k x n) -> m x n`.
pub fn matmul_at(a: &Tensor, b: &Tensor) -> Tensor {
    let (k, m) = (a.rows(), a.cols());
    let (k2, n) = (b.rows(), b.cols());
    debug_assert_eq!(k, k2);
    let mut out = vec![0.0; m * n];
    for kk in 0..k {
        let arow = a.row_slice(kk);
        let brow = b.row_slice(kk);
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor { shape: vec![m, n], data: out }
}
