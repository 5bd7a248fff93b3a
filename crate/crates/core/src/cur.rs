//! Tensor CUR models: construction from sampled indices, reconstruction,
//! cheap evaluation of sampled blocks, and conversion to HOSVD form.
//!
//! A model holds the core subtensor R = X(I_1..I_n), the fiber matrices
//! C_i = X_(i)(:, J_i), rank-r_i SVD factors of U_i = C_i(I_i,:), and the
//! cached mode maps C_i U_i^+. When every U_i has rank r_i and X has Tucker
//! rank (r_1..r_n), the reconstruction R x_1 (C_1 U_1^+) ... x_n (C_n U_n^+)
//! recovers X exactly.
//!
//! Reconstruction and block evaluation apply mode products in ascending mode
//! order with a fixed-order inner product, so evaluating a sampled block is
//! bit-identical to slicing the full reconstruction. Fiber-strategy fiber
//! evaluation is the exception: each fiber contracts the core down to a
//! vector first and applies the long mode last, which is what keeps its cost
//! near-linear in the mode dimension.

use crate::linalg::{self, LinalgError, TruncatedSvd};
use crate::sampling::{SampleIndices, Strategy};
use crate::tensor::{
    fold, gather_fiber_columns, mode_product, subtensor, unfold, DenseTensor, Matrix,
    MultiIndexMap, TensorError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("rank {rank} exceeds sample sizes (|I|={rows}, |J|={cols}) in mode {mode}")]
    RankVsSamples {
        mode: usize,
        rank: usize,
        rows: usize,
        cols: usize,
    },
}

/// CUR-form representation of a low-Tucker-rank tensor.
#[derive(Debug, Clone)]
pub struct CurModel {
    /// Core subtensor R = X(I_1, ..., I_n).
    pub core: DenseTensor,
    /// Fiber matrices C_i = X_(i)(:, J_i), one per mode.
    pub fibers: Vec<Matrix>,
    /// Rank-r_i SVD factors of U_i = C_i(I_i, :).
    pub pinv_factors: Vec<TruncatedSvd>,
    /// Cached mode maps C_i U_i^+ (d_i x |I_i|), applied by reconstruction.
    pub factors: Vec<Matrix>,
    pub indices: SampleIndices,
    pub ranks: Vec<usize>,
    pub dims: Vec<usize>,
}

impl CurModel {
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Retained smallest singular value per mode, `sigma_{r_i}(U_i)`.
    pub fn retained_sigmas(&self) -> Vec<f64> {
        self.pinv_factors
            .iter()
            .map(|t| *t.singulars.last().unwrap_or(&0.0))
            .collect()
    }

    /// Modes whose U_i looks rank-deficient: `sigma_{r_i} <= rel_tol * sigma_1`.
    pub fn deficient_modes(&self, rel_tol: f64) -> Vec<usize> {
        self.pinv_factors
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                let s1 = t.singulars.first().copied().unwrap_or(0.0);
                let sr = t.singulars.last().copied().unwrap_or(0.0);
                sr <= rel_tol * s1 || s1 == 0.0
            })
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Per-mode row selection for block evaluation.
#[derive(Debug, Clone, Copy)]
pub enum BlockSel<'a> {
    All,
    Rows(&'a [usize]),
}

/// Extract R, C_i and the truncated SVDs of C_i(I_i,:) from a tensor.
///
/// Rank deficiency (`sigma_{r_i} = 0`) is not an error; the tolerant
/// pseudo-inverse zeroes the offending directions and callers can inspect
/// [`CurModel::deficient_modes`].
pub fn cur_decompose(
    x: &DenseTensor,
    idx: &SampleIndices,
    ranks: &[usize],
) -> Result<CurModel, CurError> {
    let n = x.order();
    if idx.row_sets.len() != n || idx.col_sets.len() != n {
        return Err(TensorError::DimMismatch {
            context: format!(
                "order mismatch: tensor {n}, indices {}",
                idx.row_sets.len()
            ),
        }
        .into());
    }
    let core = subtensor(x, &idx.row_sets)?;
    let fibers = (1..=n)
        .map(|mode| gather_fiber_columns(x, mode, &idx.col_sets[mode - 1]))
        .collect::<Result<Vec<_>, _>>()?;
    model_from_blocks(core, fibers, idx, ranks, x.dims())
}

/// Assemble a model from already-extracted blocks: the core subtensor and
/// the per-mode fiber matrices of the tensor being approximated.
///
/// This is the constructor the solver uses; it never touches the original
/// tensor.
pub fn model_from_blocks(
    core: DenseTensor,
    fibers: Vec<Matrix>,
    idx: &SampleIndices,
    ranks: &[usize],
    dims: &[usize],
) -> Result<CurModel, CurError> {
    let n = dims.len();
    if ranks.len() != n || idx.row_sets.len() != n || fibers.len() != n {
        return Err(TensorError::DimMismatch {
            context: format!(
                "order mismatch: dims {n}, ranks {}, indices {}, fibers {}",
                ranks.len(),
                idx.row_sets.len(),
                fibers.len()
            ),
        }
        .into());
    }
    let core_dims: Vec<usize> = idx.row_sets.iter().map(|s| s.len()).collect();
    if core.dims() != core_dims.as_slice() {
        return Err(TensorError::DimMismatch {
            context: format!("core dims {:?} vs index sets {:?}", core.dims(), core_dims),
        }
        .into());
    }
    let mut pinv_factors = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    for mode in 1..=n {
        let rows = &idx.row_sets[mode - 1];
        let cols = &idx.col_sets[mode - 1];
        let r = ranks[mode - 1];
        let c_i = &fibers[mode - 1];
        if c_i.rows() != dims[mode - 1] || c_i.cols() != cols.len() {
            return Err(TensorError::DimMismatch {
                context: format!(
                    "fiber matrix {}x{} vs expected {}x{} in mode {mode}",
                    c_i.rows(),
                    c_i.cols(),
                    dims[mode - 1],
                    cols.len()
                ),
            }
            .into());
        }
        if r > rows.len().min(cols.len()) {
            return Err(CurError::RankVsSamples {
                mode,
                rank: r,
                rows: rows.len(),
                cols: cols.len(),
            });
        }
        let u_raw = c_i.select_rows(rows);
        let svd_r = linalg::truncated_svd(&u_raw, r)?;
        let factor = apply_pinv_right(c_i, &svd_r, u_raw.rows(), u_raw.cols());
        pinv_factors.push(svd_r);
        factors.push(factor);
    }
    Ok(CurModel {
        core,
        fibers,
        pinv_factors,
        factors,
        indices: idx.clone(),
        ranks: ranks.to_vec(),
        dims: dims.to_vec(),
    })
}

/// Assemble a model from stored components (deserialization path): the
/// truncated SVD factors are taken as given and only the cached mode maps
/// are recomputed.
pub fn model_from_parts(
    core: DenseTensor,
    fibers: Vec<Matrix>,
    pinv_factors: Vec<TruncatedSvd>,
    idx: &SampleIndices,
    ranks: &[usize],
    dims: &[usize],
) -> Result<CurModel, CurError> {
    let n = dims.len();
    if ranks.len() != n || fibers.len() != n || pinv_factors.len() != n {
        return Err(TensorError::DimMismatch {
            context: "component counts do not match tensor order".into(),
        }
        .into());
    }
    for mode in 1..=n {
        let rows = idx.row_sets[mode - 1].len();
        let cols = idx.col_sets[mode - 1].len();
        let c = &fibers[mode - 1];
        if c.rows() != dims[mode - 1] || c.cols() != cols {
            return Err(TensorError::DimMismatch {
                context: format!("fiber matrix shape inconsistent in mode {mode}"),
            }
            .into());
        }
        let t = &pinv_factors[mode - 1];
        if t.rank() != ranks[mode - 1] || t.left.rows() != rows || t.right.rows() != cols {
            return Err(TensorError::DimMismatch {
                context: format!("SVD factor shapes inconsistent in mode {mode}"),
            }
            .into());
        }
    }
    let factors = fibers
        .iter()
        .zip(&pinv_factors)
        .map(|(c, t)| apply_pinv_right(c, t, t.left.rows(), t.right.rows()))
        .collect();
    Ok(CurModel {
        core,
        fibers,
        pinv_factors,
        factors,
        indices: idx.clone(),
        ranks: ranks.to_vec(),
        dims: dims.to_vec(),
    })
}

/// `C * U^+` via the SVD factors of U, without materializing U^+:
/// `((C * right) * diag(1/sigma)) * left^T` with the default tolerant cutoff.
fn apply_pinv_right(c: &Matrix, svd_r: &TruncatedSvd, u_rows: usize, u_cols: usize) -> Matrix {
    let cutoff = linalg::default_pinv_tol(u_rows, u_cols) * svd_r.singulars.first().copied().unwrap_or(0.0);
    let mut t = c.mul(&svd_r.right);
    for (j, &s) in svd_r.singulars.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        for v in t.col_mut(j) {
            *v *= inv;
        }
    }
    t.mul(&svd_r.left.transpose())
}

/// Full reconstruction `R x_1 (C_1 U_1^+) x_2 ... x_n (C_n U_n^+)`.
pub fn cur_reconstruct(model: &CurModel) -> DenseTensor {
    let mut y = model.core.clone();
    for mode in 1..=model.order() {
        y = mode_product(&y, &model.factors[mode - 1], mode)
            .expect("model factors consistent with core dims");
    }
    y
}

/// Evaluate the reconstruction restricted to a row selection per mode,
/// without forming the full tensor. Bit-identical to slicing
/// [`cur_reconstruct`] output.
pub fn eval_block(model: &CurModel, sels: &[BlockSel]) -> DenseTensor {
    assert_eq!(sels.len(), model.order());
    let mut y = model.core.clone();
    for mode in 1..=model.order() {
        let factor = &model.factors[mode - 1];
        let sliced;
        let applied = match sels[mode - 1] {
            BlockSel::All => factor,
            BlockSel::Rows(rows) => {
                sliced = factor.select_rows(rows);
                &sliced
            }
        };
        y = mode_product(&y, applied, mode).expect("selection consistent with factor dims");
    }
    y
}

/// `L(I_1, ..., I_n)` for the reconstruction L, evaluated on the small core
/// by the row-restricted mode maps `C_i(I_i,:) U_i^+`.
pub fn cur_eval_core(model: &CurModel, target: &SampleIndices) -> DenseTensor {
    let sels: Vec<BlockSel> = target.row_sets.iter().map(|s| BlockSel::Rows(s)).collect();
    eval_block(model, &sels)
}

/// `L_(k)(:, J_k)` for the reconstruction L.
///
/// Chidori targets evaluate the whole block and unfold it; Fiber targets
/// contract the core to a vector per fiber and apply the mode-k map last.
pub fn cur_eval_fibers(model: &CurModel, mode: usize, target: &SampleIndices) -> Matrix {
    let n = model.order();
    assert!(mode >= 1 && mode <= n, "mode out of range");
    // A 1-mode model has a single unfolding column either way.
    if n == 1 {
        let block = eval_block(model, &[BlockSel::All]);
        return unfold(&block, mode).expect("mode validated");
    }
    match target.strategy {
        Strategy::Chidori => {
            let sels: Vec<BlockSel> = (1..=n)
                .map(|m| {
                    if m == mode {
                        BlockSel::All
                    } else {
                        BlockSel::Rows(&target.row_sets[m - 1])
                    }
                })
                .collect();
            let block = eval_block(model, &sels);
            unfold(&block, mode).expect("mode validated")
        }
        Strategy::Fiber => {
            let cols = &target.col_sets[mode - 1];
            let map = MultiIndexMap::new(mode, &model.dims).expect("mode validated");
            let d_k = model.dims[mode - 1];
            let mut out = Matrix::zeros(d_k, cols.len());
            // First contraction hoisted: the unfolding of the core along the
            // smallest non-k mode is shared by every fiber.
            let first = (1..=n).find(|&m| m != mode).expect("order >= 2");
            let core_unf = unfold(&model.core, first).expect("mode validated");
            let mut folded_dims: Vec<usize> = model.core.dims().to_vec();
            folded_dims[first - 1] = 1;
            for (ci, &c) in cols.iter().enumerate() {
                let coords = map.coords_for(c);
                let row = single_row(&model.factors[first - 1], coords[first - 1]);
                let contracted = row.mul(&core_unf);
                let mut v = fold(&contracted, first, &folded_dims).expect("shape consistent");
                for m in (first + 1)..=n {
                    if m == mode {
                        continue;
                    }
                    let row = single_row(&model.factors[m - 1], coords[m - 1]);
                    v = mode_product(&v, &row, m).expect("row consistent with core dims");
                }
                v = mode_product(&v, &model.factors[mode - 1], mode).expect("factor consistent");
                debug_assert_eq!(v.len(), d_k);
                out.col_mut(ci).copy_from_slice(v.data());
            }
            out
        }
    }
}

/// 1 x cols matrix holding the 1-based `row` of `m`.
fn single_row(m: &Matrix, row: usize) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for c in 0..m.cols() {
        out.set(0, c, m.get(row - 1, c));
    }
    out
}

/// Orthogonal Tucker form: core plus per-mode orthonormal factors.
#[derive(Debug, Clone)]
pub struct HosvdModel {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
}

impl HosvdModel {
    pub fn reconstruct(&self) -> DenseTensor {
        let mut y = self.core.clone();
        for mode in 1..=self.factors.len() {
            y = mode_product(&y, &self.factors[mode - 1], mode)
                .expect("factors consistent with core dims");
        }
        y
    }
}

/// Rank-(r_1..r_n) HOSVD: factors are leading left singular vectors of each
/// unfolding, core is the tensor contracted by their transposes.
pub fn hosvd(x: &DenseTensor, ranks: &[usize]) -> Result<HosvdModel, CurError> {
    let n = x.order();
    let mut factors = Vec::with_capacity(n);
    for mode in 1..=n {
        let unf = unfold(x, mode)?;
        let t = linalg::truncated_svd(&unf, ranks[mode - 1])?;
        factors.push(t.left);
    }
    let mut core = x.clone();
    for mode in 1..=n {
        core = mode_product(&core, &factors[mode - 1].transpose(), mode)?;
    }
    Ok(HosvdModel { core, factors })
}

/// Convert a CUR model to HOSVD form: QR-factor each mode map, push the
/// triangular parts into the core, then HOSVD the small core.
///
/// The output reconstructs identically to [`cur_reconstruct`] up to
/// floating-point roundoff.
pub fn cur_to_hosvd(model: &CurModel) -> Result<HosvdModel, CurError> {
    let n = model.order();
    let mut qs = Vec::with_capacity(n);
    let mut t1 = model.core.clone();
    for mode in 1..=n {
        let (q, r) = linalg::thin_qr(&model.factors[mode - 1])?;
        t1 = mode_product(&t1, &r, mode)?;
        qs.push(q);
    }
    let inner = hosvd(&t1, &model.ranks)?;
    let factors: Vec<Matrix> = qs
        .iter()
        .zip(&inner.factors)
        .map(|(q, v)| q.mul(v))
        .collect();
    Ok(HosvdModel {
        core: inner.core,
        factors,
    })
}
