//! Dense n-mode tensors and small dense matrices.
//!
//! Storage is column-major everywhere: the first index varies fastest in a
//! tensor's flat data, and matrices are stored column by column. One global
//! convention keeps unfolding, folding and mode products consistent with each
//! other and prevents silent transposition bugs.
//!
//! Modes and index sets are 1-based in every public signature, matching the
//! usual mathematical convention for tensors. Raw matrix element access is
//! 0-based like any other Rust container.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("dimension mismatch: {context}")]
    DimMismatch { context: String },
    #[error("index {index} out of range [1, {bound}] in mode {mode}")]
    IndexOutOfRange {
        mode: usize,
        index: usize,
        bound: usize,
    },
    #[error("duplicate index {index} in mode {mode}")]
    DuplicateIndex { mode: usize, index: usize },
    #[error("tensor must have at least one mode and all dims >= 1")]
    EmptyDims,
}

/// Dense real tensor of order `n` with explicit dimensions.
///
/// `data.len() == dims.iter().product()`, first index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(
            !dims.is_empty() && dims.iter().all(|&d| d >= 1),
            "dims must be nonempty and positive"
        );
        let len = dims.iter().product();
        DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_data(dims: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        if dims.is_empty() || dims.iter().any(|&d| d < 1) {
            return Err(TensorError::EmptyDims);
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(TensorError::DimMismatch {
                context: format!("data length {} != product of dims {}", data.len(), len),
            });
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
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

    /// Column-major strides: stride of mode k (0-based) is `prod(dims[..k])`.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dims.len()];
        for k in 1..self.dims.len() {
            s[k] = s[k - 1] * self.dims[k - 1];
        }
        s
    }

    /// Flat offset of a 1-based multi-index.
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (m, (&i, &d)) in idx.iter().zip(&self.dims).enumerate() {
            debug_assert!(i >= 1 && i <= d, "index {i} out of range in mode {}", m + 1);
            off += (i - 1) * stride;
            stride *= d;
        }
        off
    }

    /// Entry at 1-based multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// Frobenius norm: sqrt of the sum of squared entries.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max-magnitude (infinity) norm.
    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Entrywise difference; dims must match.
    pub fn sub(&self, other: &DenseTensor) -> DenseTensor {
        assert_eq!(self.dims, other.dims, "tensor dims mismatch in sub");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseTensor {
            dims: self.dims.clone(),
            data,
        }
    }

    /// Entrywise sum; dims must match.
    pub fn add(&self, other: &DenseTensor) -> DenseTensor {
        assert_eq!(self.dims, other.dims, "tensor dims mismatch in add");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseTensor {
            dims: self.dims.clone(),
            data,
        }
    }
}

/// Dense matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix shape must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if rows < 1 || cols < 1 {
            return Err(TensorError::EmptyDims);
        }
        if data.len() != rows * cols {
            return Err(TensorError::DimMismatch {
                context: format!("data length {} != {rows}x{cols}", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Element at 0-based (row, col).
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r + c * self.rows]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r + c * self.rows] = value;
    }

    /// Contiguous 0-based column slice.
    #[inline]
    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Matrix product `self * other`.
    ///
    /// Deterministic accumulation: each output element sums its inner
    /// products in fixed ascending order, so selecting rows of `self` either
    /// before or after multiplication gives bit-identical values. Sampled
    /// block evaluation relies on this.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "inner dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        if self.rows == 1 {
            // Row-vector case: a plain dot per output column. Same terms in
            // the same k order as the general loop below, so the two paths
            // are bit-identical.
            for j in 0..other.cols {
                let b_col = other.col(j);
                let mut acc = 0.0f64;
                for (k, &b) in b_col.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    acc += self.data[k] * b;
                }
                out.data[j] = acc;
            }
            return out;
        }
        for j in 0..other.cols {
            let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.get(k, j);
                if b == 0.0 {
                    continue;
                }
                let a_col = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, &a) in out_col.iter_mut().zip(a_col) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Rows of `self` selected by 1-based indices, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for c in 0..self.cols {
            for (ri, &r) in rows.iter().enumerate() {
                out.set(ri, c, self.get(r - 1, c));
            }
        }
        out
    }

    /// Columns of `self` selected by 1-based indices, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for (ci, &c) in cols.iter().enumerate() {
            out.col_mut(ci).copy_from_slice(self.col(c - 1));
        }
        out
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Reinterpret as a 2-mode tensor (same column-major data).
    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor {
            dims: vec![self.rows, self.cols],
            data: self.data.clone(),
        }
    }

    /// Reinterpret a 2-mode tensor as a matrix.
    pub fn from_tensor(t: &DenseTensor) -> Result<Matrix, TensorError> {
        if t.order() != 2 {
            return Err(TensorError::DimMismatch {
                context: format!("expected 2-mode tensor, got order {}", t.order()),
            });
        }
        Ok(Matrix {
            rows: t.dims[0],
            cols: t.dims[1],
            data: t.data.clone(),
        })
    }
}

/// Bijection between full multi-indices and (row, column) positions of the
/// mode-k unfolding. The column of `(i_1..i_n)` is
/// `1 + sum_{m != k} (i_m - 1) * prod_{l < m, l != k} d_l` (all 1-based).
#[derive(Debug, Clone)]
pub struct MultiIndexMap {
    mode: usize,
    dims: Vec<usize>,
}

impl MultiIndexMap {
    /// `mode` is 1-based.
    pub fn new(mode: usize, dims: &[usize]) -> Result<Self, TensorError> {
        if mode < 1 || mode > dims.len() {
            return Err(TensorError::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        Ok(MultiIndexMap {
            mode,
            dims: dims.to_vec(),
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    /// Number of unfolding columns, `prod_{j != k} d_j`.
    pub fn n_cols(&self) -> usize {
        self.dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != self.mode - 1)
            .map(|(_, &d)| d)
            .product()
    }

    /// 1-based column index for a full 1-based multi-index (the mode-k entry
    /// is ignored).
    pub fn col_for(&self, idx: &[usize]) -> usize {
        let k0 = self.mode - 1;
        let mut col = 0usize;
        let mut stride = 1usize;
        for (m, (&i, &d)) in idx.iter().zip(&self.dims).enumerate() {
            if m == k0 {
                continue;
            }
            col += (i - 1) * stride;
            stride *= d;
        }
        col + 1
    }

    /// Full 1-based multi-index for a 1-based column; the mode-k slot is set
    /// to 1 and is meant to be varied by the caller.
    pub fn coords_for(&self, col: usize) -> Vec<usize> {
        let k0 = self.mode - 1;
        let mut rem = col - 1;
        let mut idx = vec![1usize; self.dims.len()];
        for (m, (slot, &d)) in idx.iter_mut().zip(&self.dims).enumerate() {
            if m == k0 {
                continue;
            }
            *slot = rem % d + 1;
            rem /= d;
        }
        idx
    }
}

/// Mode-k matricization: `d_k x prod_{j != k} d_j` matrix whose columns are
/// the mode-k fibers, ordered by [`MultiIndexMap`].
pub fn unfold(x: &DenseTensor, mode: usize) -> Result<Matrix, TensorError> {
    let n = x.order();
    if mode < 1 || mode > n {
        return Err(TensorError::ModeOutOfRange { mode, order: n });
    }
    let k0 = mode - 1;
    let d_k = x.dims[k0];
    let n_cols: usize = x.len() / d_k;
    // Mode-1 unfolding is a plain reshape under column-major order.
    if k0 == 0 {
        return Ok(Matrix {
            rows: d_k,
            cols: n_cols,
            data: x.data.clone(),
        });
    }
    let strides = x.strides();
    let mut out = vec![0.0f64; x.len()];
    // Odometer over the non-k modes; each step copies one mode-k fiber.
    let other: Vec<usize> = (0..n).filter(|&m| m != k0).collect();
    let mut counters = vec![0usize; other.len()];
    let fiber_stride = strides[k0];
    let mut in_base = 0usize;
    for col in 0..n_cols {
        let out_col = &mut out[col * d_k..(col + 1) * d_k];
        if fiber_stride == 1 {
            out_col.copy_from_slice(&x.data[in_base..in_base + d_k]);
        } else {
            let mut off = in_base;
            for o in out_col.iter_mut() {
                *o = x.data[off];
                off += fiber_stride;
            }
        }
        // Advance the odometer (earliest non-k mode fastest).
        for (c, &m) in counters.iter_mut().zip(&other) {
            *c += 1;
            in_base += strides[m];
            if *c < x.dims[m] {
                break;
            }
            in_base -= *c * strides[m];
            *c = 0;
        }
    }
    Ok(Matrix {
        rows: d_k,
        cols: n_cols,
        data: out,
    })
}

/// Inverse of [`unfold`]: `unfold(fold(M, k, dims), k) == M` exactly.
pub fn fold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<DenseTensor, TensorError> {
    let n = dims.len();
    if mode < 1 || mode > n {
        return Err(TensorError::ModeOutOfRange { mode, order: n });
    }
    let k0 = mode - 1;
    let total: usize = dims.iter().product();
    if m.rows != dims[k0] || m.rows * m.cols != total {
        return Err(TensorError::DimMismatch {
            context: format!(
                "matrix {}x{} does not match mode-{mode} unfolding of dims {dims:?}",
                m.rows, m.cols
            ),
        });
    }
    if k0 == 0 {
        return Ok(DenseTensor {
            dims: dims.to_vec(),
            data: m.data.clone(),
        });
    }
    let out_t = DenseTensor::zeros(dims);
    let strides = out_t.strides();
    let mut out = out_t.data;
    let d_k = dims[k0];
    let other: Vec<usize> = (0..n).filter(|&mm| mm != k0).collect();
    let mut counters = vec![0usize; other.len()];
    let fiber_stride = strides[k0];
    let mut out_base = 0usize;
    for col in 0..m.cols {
        let in_col = &m.data[col * d_k..(col + 1) * d_k];
        if fiber_stride == 1 {
            out[out_base..out_base + d_k].copy_from_slice(in_col);
        } else {
            let mut off = out_base;
            for &v in in_col {
                out[off] = v;
                off += fiber_stride;
            }
        }
        for (c, &mm) in counters.iter_mut().zip(&other) {
            *c += 1;
            out_base += strides[mm];
            if *c < dims[mm] {
                break;
            }
            out_base -= *c * strides[mm];
            *c = 0;
        }
    }
    Ok(DenseTensor {
        dims: dims.to_vec(),
        data: out,
    })
}

/// Mode-k product `Y = X x_k A`, satisfying `Y_(k) = A * X_(k)`.
///
/// `A` must have `d_k` columns; the result replaces `d_k` with `A`'s row
/// count.
pub fn mode_product(x: &DenseTensor, a: &Matrix, mode: usize) -> Result<DenseTensor, TensorError> {
    let n = x.order();
    if mode < 1 || mode > n {
        return Err(TensorError::ModeOutOfRange { mode, order: n });
    }
    if a.cols != x.dims[mode - 1] {
        return Err(TensorError::DimMismatch {
            context: format!(
                "mode-{mode} product: matrix has {} cols, tensor dim is {}",
                a.cols,
                x.dims[mode - 1]
            ),
        });
    }
    let unfolded = unfold(x, mode)?;
    let product = a.mul(&unfolded);
    let mut dims = x.dims.clone();
    dims[mode - 1] = a.rows;
    fold(&product, mode, &dims)
}

fn validate_index_sets(dims: &[usize], sets: &[Vec<usize>]) -> Result<(), TensorError> {
    if sets.len() != dims.len() {
        return Err(TensorError::DimMismatch {
            context: format!("{} index sets for order-{} tensor", sets.len(), dims.len()),
        });
    }
    for (m, (set, &d)) in sets.iter().zip(dims).enumerate() {
        let mut seen = vec![false; d];
        for &i in set {
            if i < 1 || i > d {
                return Err(TensorError::IndexOutOfRange {
                    mode: m + 1,
                    index: i,
                    bound: d,
                });
            }
            if seen[i - 1] {
                return Err(TensorError::DuplicateIndex {
                    mode: m + 1,
                    index: i,
                });
            }
            seen[i - 1] = true;
        }
    }
    Ok(())
}

/// Subtensor `X(I_1, ..., I_n)` with one 1-based index set per mode.
///
/// Entry `(a_1..a_n)` of the result is `X(I_1[a_1], ..., I_n[a_n])`.
pub fn subtensor(x: &DenseTensor, sets: &[Vec<usize>]) -> Result<DenseTensor, TensorError> {
    validate_index_sets(x.dims(), sets)?;
    if sets.iter().any(|s| s.is_empty()) {
        return Err(TensorError::EmptyDims);
    }
    let out_dims: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let strides = x.strides();
    // Precompute flat offsets contributed by each mode.
    let per_mode: Vec<Vec<usize>> = sets
        .iter()
        .enumerate()
        .map(|(m, set)| set.iter().map(|&i| (i - 1) * strides[m]).collect())
        .collect();
    let total: usize = out_dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut counters = vec![0usize; out_dims.len()];
    let mut base: usize = per_mode.iter().map(|offs| offs[0]).sum();
    for _ in 0..total {
        out.push(x.data[base]);
        for (m, c) in counters.iter_mut().enumerate() {
            *c += 1;
            if *c < out_dims[m] {
                base = base - per_mode[m][*c - 1] + per_mode[m][*c];
                break;
            }
            base = base - per_mode[m][*c - 1] + per_mode[m][0];
            *c = 0;
        }
    }
    Ok(DenseTensor {
        dims: out_dims,
        data: out,
    })
}

/// Columns `cols` (1-based) of the mode-k unfolding, gathered without
/// materializing the full unfolding.
pub fn gather_fiber_columns(
    x: &DenseTensor,
    mode: usize,
    cols: &[usize],
) -> Result<Matrix, TensorError> {
    let map = MultiIndexMap::new(mode, x.dims())?;
    let n_cols = map.n_cols();
    let k0 = mode - 1;
    let d_k = x.dims[k0];
    let strides = x.strides();
    let fiber_stride = strides[k0];
    let mut out = Matrix::zeros(d_k, cols.len());
    for (ci, &c) in cols.iter().enumerate() {
        if c < 1 || c > n_cols {
            return Err(TensorError::IndexOutOfRange {
                mode,
                index: c,
                bound: n_cols,
            });
        }
        let coords = map.coords_for(c);
        let mut base = 0usize;
        for (m, &i) in coords.iter().enumerate() {
            if m != k0 {
                base += (i - 1) * strides[m];
            }
        }
        let out_col = out.col_mut(ci);
        let mut off = base;
        for o in out_col.iter_mut() {
            *o = x.data[off];
            off += fiber_stride;
        }
    }
    Ok(out)
}

/// Flatten the first `k` modes into rows and the rest into columns.
///
/// Under column-major order this is a pure reshape of the data.
pub fn reshape_split(x: &DenseTensor, k: usize) -> Result<Matrix, TensorError> {
    let n = x.order();
    if k < 1 || k >= n {
        return Err(TensorError::ModeOutOfRange { mode: k, order: n });
    }
    let rows: usize = x.dims[..k].iter().product();
    let cols: usize = x.dims[k..].iter().product();
    Ok(Matrix {
        rows,
        cols,
        data: x.data.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_123(dims: &[usize]) -> DenseTensor {
        let len: usize = dims.iter().product();
        DenseTensor::from_data(dims, (1..=len).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn unfold_2x2x2_mode1() {
        // X_{i,j,k} = i + 2(j-1) + 4(k-1), values 1..8 in flat order.
        let x = tensor_123(&[2, 2, 2]);
        let m = unfold(&x, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        let row0: Vec<f64> = (0..4).map(|c| m.get(0, c)).collect();
        let row1: Vec<f64> = (0..4).map(|c| m.get(1, c)).collect();
        assert_eq!(row0, vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(row1, vec![2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn unfold_matches_formula_all_modes() {
        let x = tensor_123(&[3, 4, 5]);
        for mode in 1..=3 {
            let m = unfold(&x, mode).unwrap();
            let map = MultiIndexMap::new(mode, x.dims()).unwrap();
            for i1 in 1..=3 {
                for i2 in 1..=4 {
                    for i3 in 1..=5 {
                        let idx = [i1, i2, i3];
                        let col = map.col_for(&idx);
                        assert_eq!(m.get(idx[mode - 1] - 1, col - 1), x.get(&idx));
                    }
                }
            }
        }
    }

    #[test]
    fn unfold_one_mode_tensor() {
        let x = tensor_123(&[5]);
        let m = unfold(&x, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (5, 1));
        assert_eq!(m.data(), x.data());
    }

    #[test]
    fn fold_round_trips_exactly() {
        let x = tensor_123(&[3, 4, 5]);
        for mode in 1..=3 {
            let m = unfold(&x, mode).unwrap();
            let back = fold(&m, mode, x.dims()).unwrap();
            assert_eq!(back, x);
        }
        let x2 = tensor_123(&[4, 3, 2]);
        let back = fold(&unfold(&x2, 2).unwrap(), 2, x2.dims()).unwrap();
        assert_eq!(back, x2);
    }

    #[test]
    fn fold_rejects_shape_mismatch() {
        let m = Matrix::zeros(2, 4);
        assert!(fold(&m, 1, &[2, 2, 3]).is_err());
        assert!(fold(&m, 3, &[2, 2, 3]).is_err());
    }

    #[test]
    fn unfold_rejects_bad_mode() {
        let x = tensor_123(&[2, 2]);
        assert_eq!(
            unfold(&x, 0).unwrap_err(),
            TensorError::ModeOutOfRange { mode: 0, order: 2 }
        );
        assert!(unfold(&x, 3).is_err());
    }

    #[test]
    fn mode_product_identity() {
        let x = tensor_123(&[3, 4, 2]);
        for mode in 1..=3 {
            let id = Matrix::identity(x.dims()[mode - 1]);
            let y = mode_product(&x, &id, mode).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn mode_product_matches_matrix_product_n2() {
        let x = tensor_123(&[3, 2]);
        let a = Matrix::from_data(2, 3, vec![1.0, 0.5, -1.0, 2.0, 3.0, 0.0]).unwrap();
        let y = mode_product(&x, &a, 1).unwrap();
        let direct = a.mul(&Matrix::from_tensor(&x).unwrap());
        assert_eq!(y.data(), direct.data());
    }

    #[test]
    fn mode_product_brute_force_oracle() {
        // Elementwise definition: Y_{..j..} = sum_s X_{..s..} A_{j,s}.
        let mut rng = crate::seed::rng(42);
        use rand::Rng;
        let dims = [3usize, 4, 5];
        let x = DenseTensor::from_data(
            &dims,
            (0..60).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let a = Matrix::from_data(
            6,
            4,
            (0..24).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let y = mode_product(&x, &a, 2).unwrap();
        assert_eq!(y.dims(), &[3, 6, 5]);
        for i in 1..=3usize {
            for j in 1..=6usize {
                for k in 1..=5usize {
                    let mut want = 0.0;
                    for s in 1..=4usize {
                        want += x.get(&[i, s, k]) * a.get(j - 1, s - 1);
                    }
                    let got = y.get(&[i, j, k]);
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn mode_product_rejects_mismatch() {
        let x = tensor_123(&[3, 4]);
        let a = Matrix::zeros(2, 5);
        assert!(mode_product(&x, &a, 1).is_err());
    }

    #[test]
    fn subtensor_full_and_singleton() {
        let x = tensor_123(&[3, 3, 3]);
        let full = subtensor(
            &x,
            &[vec![1, 2, 3], vec![1, 2, 3], vec![1, 2, 3]],
        )
        .unwrap();
        assert_eq!(full, x);
        let single = subtensor(&x, &[vec![2], vec![3], vec![1]]).unwrap();
        assert_eq!(single.dims(), &[1, 1, 1]);
        assert_eq!(single.data()[0], x.get(&[2, 3, 1]));
    }

    #[test]
    fn subtensor_brute_force() {
        let x = tensor_123(&[3, 3, 3]);
        let sets = [vec![1usize, 3], vec![2usize], vec![1usize, 2]];
        let sub = subtensor(&x, &sets).unwrap();
        assert_eq!(sub.dims(), &[2, 1, 2]);
        for (a1, &i1) in sets[0].iter().enumerate() {
            for (a2, &i2) in sets[1].iter().enumerate() {
                for (a3, &i3) in sets[2].iter().enumerate() {
                    assert_eq!(
                        sub.get(&[a1 + 1, a2 + 1, a3 + 1]),
                        x.get(&[i1, i2, i3])
                    );
                }
            }
        }
    }

    #[test]
    fn subtensor_rejects_bad_indices() {
        let x = tensor_123(&[3, 3]);
        assert!(matches!(
            subtensor(&x, &[vec![1, 4], vec![1]]),
            Err(TensorError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            subtensor(&x, &[vec![1, 1], vec![1]]),
            Err(TensorError::DuplicateIndex { .. })
        ));
    }

    #[test]
    fn norms() {
        let ones = DenseTensor::from_data(&[2, 2], vec![1.0; 4]).unwrap();
        assert_eq!(ones.fro_norm(), 2.0);
        assert_eq!(ones.inf_norm(), 1.0);
        let mut basis = DenseTensor::zeros(&[3, 3, 3]);
        basis.set(&[2, 1, 3], 1.0);
        assert_eq!(basis.fro_norm(), 1.0);
        assert_eq!(basis.inf_norm(), 1.0);
        let mut rng = crate::seed::rng(3);
        use rand::Rng;
        let t = DenseTensor::from_data(
            &[4, 5],
            (0..20).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let sum_sq: f64 = t.data().iter().map(|v| v * v).sum();
        assert!((t.fro_norm().powi(2) - sum_sq).abs() <= 1e-12 * sum_sq.max(1.0));
    }

    #[test]
    fn gather_fiber_columns_matches_unfold() {
        let x = tensor_123(&[3, 4, 5]);
        for mode in 1..=3 {
            let m = unfold(&x, mode).unwrap();
            let cols: Vec<usize> = (1..=m.cols()).step_by(3).collect();
            let g = gather_fiber_columns(&x, mode, &cols).unwrap();
            for (ci, &c) in cols.iter().enumerate() {
                for r in 0..m.rows() {
                    assert_eq!(g.get(r, ci), m.get(r, c - 1));
                }
            }
        }
    }

    #[test]
    fn reshape_split_is_reshape() {
        let x = tensor_123(&[2, 3, 4]);
        let m = reshape_split(&x, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 12));
        assert_eq!(m.data(), x.data());
        let m2 = reshape_split(&x, 2).unwrap();
        assert_eq!((m2.rows(), m2.cols()), (6, 4));
        assert_eq!(m2.data(), x.data());
    }

    #[test]
    fn matrix_select_rows_cols() {
        let m = Matrix::from_data(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let r = m.select_rows(&[3, 1]);
        assert_eq!(r.data(), &[3.0, 1.0, 6.0, 4.0]);
        let c = m.select_cols(&[2]);
        assert_eq!(c.data(), &[4.0, 5.0, 6.0]);
    }
}
