use super::{DiffError, Result};

/// Dense row-major matrix of `f64`.
///
/// Every value in the crate is a matrix: a batch of vectors is `rows × dim`,
/// a single vector is `1 × dim` and a scalar is `1 × 1`. Broadcasting follows
/// the usual rule per axis: extents must be equal or one of them must be 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(DiffError::Invalid(format!(
                "shape [{rows}, {cols}] needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![value] }
    }

    /// A `1 × n` row vector.
    pub fn row(values: &[f64]) -> Self {
        Tensor { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    /// An `n × 1` column vector.
    pub fn column(values: &[f64]) -> Self {
        Tensor { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(DiffError::Invalid("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a `1 × 1` tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(DiffError::NotScalar(self.shape()));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Tensor { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|x| x * c)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// In-place `self += other` for equal shapes.
    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Tensor { rows: self.cols, cols: self.rows, data: out }
    }

    /// Rows selected by index, in the given order (indices may repeat).
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row_slice(i));
        }
        Tensor { rows: idx.len(), cols: self.cols, data }
    }

    /// Every row repeated `k` times consecutively: row `i` lands at `i*k..(i+1)*k`.
    pub fn repeat_rows(&self, k: usize) -> Tensor {
        let mut data = Vec::with_capacity(self.data.len() * k);
        for r in 0..self.rows {
            for _ in 0..k {
                data.extend_from_slice(self.row_slice(r));
            }
        }
        Tensor { rows: self.rows * k, cols: self.cols, data }
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let rows = parts.first().map_or(0, |t| t.rows);
        if parts.iter().any(|t| t.rows != rows) {
            let bad = parts.iter().find(|t| t.rows != rows).unwrap();
            return Err(DiffError::ShapeMismatch {
                op: "concat",
                lhs: parts[0].shape(),
                rhs: bad.shape(),
            });
        }
        let cols: usize = parts.iter().map(|t| t.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row_slice(r));
            }
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Column block `[start, start + width)` of every row.
    pub fn slice_cols(&self, start: usize, width: usize) -> Tensor {
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row_slice(r)[start..start + width]);
        }
        Tensor { rows: self.rows, cols: width, data }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(DiffError::ShapeMismatch { op: "matmul", lhs: self.shape(), rhs: other.shape() });
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        gemm(self, false, other, false, &mut out, 0.0);
        Ok(out)
    }

    /// Broadcast result shape of an elementwise binary op.
    pub fn broadcast_shape(a: [usize; 2], b: [usize; 2], op: &'static str) -> Result<[usize; 2]> {
        let axis = |x: usize, y: usize| {
            if x == y || y == 1 {
                Some(x)
            } else if x == 1 {
                Some(y)
            } else {
                None
            }
        };
        match (axis(a[0], b[0]), axis(a[1], b[1])) {
            (Some(r), Some(c)) => Ok([r, c]),
            _ => Err(DiffError::ShapeMismatch { op, lhs: a, rhs: b }),
        }
    }

    /// Elementwise `f(a, b)` with broadcasting.
    pub fn broadcast_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape() == other.shape() {
            return Ok(self.zip_map(other, f));
        }
        let [rows, cols] = Tensor::broadcast_shape(self.shape(), other.shape(), op)?;
        let (ars, acs) = (if self.rows == 1 { 0 } else { self.cols }, usize::from(self.cols != 1));
        let (brs, bcs) = (if other.rows == 1 { 0 } else { other.cols }, usize::from(other.cols != 1));
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(self.data[r * ars + c * acs], other.data[r * brs + c * bcs]));
            }
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Expand to `shape` by broadcasting (used for tangents of broadcast operands).
    pub fn expand_to(&self, shape: [usize; 2]) -> Result<Tensor> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let zeros = Tensor::zeros(shape[0], shape[1]);
        zeros.broadcast_with(self, "expand", |_, b| b)
    }

    /// Sum a broadcast-shaped gradient back down to `shape`.
    pub fn reduce_to(&self, shape: [usize; 2]) -> Tensor {
        if self.shape() == shape {
            return self.clone();
        }
        let mut out = Tensor::zeros(shape[0], shape[1]);
        let rs = if shape[0] == 1 { 0 } else { shape[1] };
        let cs = usize::from(shape[1] != 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[r * rs + c * cs] += self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `[1, cols]` column sums.
    pub fn sum_rows(&self) -> Tensor {
        self.reduce_to([1, self.cols])
    }

    /// `[rows, 1]` row sums.
    pub fn sum_cols(&self) -> Tensor {
        let data = (0..self.rows).map(|r| self.row_slice(r).iter().sum()).collect();
        Tensor { rows: self.rows, cols: 1, data }
    }
}

/// `out = beta * out + op(a) * op(b)` where `op` optionally transposes.
pub(crate) fn gemm(a: &Tensor, ta: bool, b: &Tensor, tb: bool, out: &mut Tensor, beta: f64) {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let n = if tb { b.rows } else { b.cols };
    debug_assert_eq!(if tb { b.cols } else { b.rows }, k);
    debug_assert_eq!(out.shape(), [m, n]);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in &mut out.data {
            *x *= beta;
        }
        return;
    }
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    // SAFETY: strides and extents describe exactly the buffers above, and
    // `out` does not alias `a` or `b` (it is borrowed mutably).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
