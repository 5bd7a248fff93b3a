//! The alternating-projections solver: hard-threshold the outlier estimate
//! on sampled blocks, refit the low-rank estimate by tensor CUR, decay the
//! threshold geometrically, and stop on a sampled relative error.
//!
//! Per iteration, with current threshold zeta and sampled index sets
//! (I_1..I_n, J_1..J_n):
//!
//! 1. `S(I_1..I_n)   = HT_zeta((X - L)(I_1..I_n))` and
//!    `S_(i)(:, J_i) = HT_zeta((X - L)_(i)(:, J_i))` for every mode;
//! 2. rebuild the CUR model of `X - S` from those same blocks;
//! 3. measure `e = (|E(I..)|_F + sum_i |E_(i)(:,J_i)|_F) / (same for X)`
//!    with `E = X - L - S`.
//!
//! Only the sampled blocks of X are ever read. Fixed-sampling variants keep
//! one draw for the whole run and read each block exactly once; resampling
//! variants redraw per iteration.

use crate::cur::{self, CurModel};
use crate::sampling::{self, SampleIndices, SamplingConfig, SamplingError, Strategy};
use crate::tensor::{DenseTensor, Matrix, MultiIndexMap, TensorError};
use std::time::Instant;
use thiserror::Error;

/// Decay factor the reference experiments use for synthetic-style problems.
pub const GAMMA_SYNTHETIC: f64 = 0.7;
/// Decay factor suggested for harder, real-world-style problems.
pub const GAMMA_REAL_WORLD: f64 = 0.8;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite value in observed tensor at flat offset {offset}")]
    NonFiniteInput { offset: usize },
    #[error("degenerate input: sampled blocks of X are all zero")]
    Degenerate,
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Cur(#[from] cur::CurError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// The four solver variants: fixed vs. resampled indices crossed with Fiber
/// vs. Chidori column sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Fixed indices, Fiber columns.
    FF,
    /// Resampled indices, Fiber columns.
    RF,
    /// Fixed indices, Chidori columns.
    FC,
    /// Resampled indices, Chidori columns.
    RC,
}

impl Variant {
    pub fn resamples(&self) -> bool {
        matches!(self, Variant::RF | Variant::RC)
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            Variant::FF | Variant::RF => Strategy::Fiber,
            Variant::FC | Variant::RC => Strategy::Chidori,
        }
    }

    pub const ALL: [Variant; 4] = [Variant::FF, Variant::RF, Variant::FC, Variant::RC];
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::FF => "ff",
            Variant::RF => "rf",
            Variant::FC => "fc",
            Variant::RC => "rc",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ff" => Ok(Variant::FF),
            "rf" => Ok(Variant::RF),
            "fc" => Ok(Variant::FC),
            "rc" => Ok(Variant::RC),
            other => Err(format!("unknown variant `{other}` (expected ff|rf|fc|rc)")),
        }
    }
}

/// Initial threshold: explicit, or the max sampled magnitude of X.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta0 {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub ranks: Vec<usize>,
    pub variant: Variant,
    pub upsilon: f64,
    pub zeta0: Zeta0,
    pub gamma: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(ranks: &[usize]) -> Self {
        SolverConfig {
            ranks: ranks.to_vec(),
            variant: Variant::RC,
            upsilon: 3.0,
            zeta0: Zeta0::Auto,
            gamma: GAMMA_SYNTHETIC,
            eps: 1e-5,
            max_iters: 200,
            seed: 0,
        }
    }

    fn validate(&self, dims: &[usize]) -> Result<(), SolverError> {
        if self.ranks.len() != dims.len() {
            return Err(SolverError::Config(format!(
                "{} ranks for an order-{} tensor",
                self.ranks.len(),
                dims.len()
            )));
        }
        for (m, (&r, &d)) in self.ranks.iter().zip(dims).enumerate() {
            if r < 1 || r > d {
                return Err(SolverError::Config(format!(
                    "rank {r} infeasible for dim {d} in mode {}",
                    m + 1
                )));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.gamma) && self.gamma < 1.0) {
            return Err(SolverError::Config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !positive(self.eps) {
            return Err(SolverError::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if self.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be at least 1".into()));
        }
        if !positive(self.upsilon) {
            return Err(SolverError::Config(format!(
                "upsilon must be positive, got {}",
                self.upsilon
            )));
        }
        if let Zeta0::Fixed(z) = self.zeta0 {
            if !positive(z) {
                return Err(SolverError::Config(format!(
                    "explicit zeta0 must be positive, got {z}"
                )));
            }
        }
        Ok(())
    }

    fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            upsilon: self.upsilon,
            ranks: self.ranks.clone(),
            strategy: self.variant.strategy(),
            resample: self.variant.resamples(),
            seed: self.seed,
        }
    }
}

/// Entrywise hard threshold: keep entries with magnitude strictly above
/// `zeta`, zero the rest.
pub fn hard_threshold(t: &DenseTensor, zeta: f64) -> DenseTensor {
    assert!(zeta >= 0.0);
    let data = t.data().iter().map(|&v| ht_value(v, zeta)).collect();
    DenseTensor::from_data(t.dims(), data).expect("same dims")
}

/// Matrix form of [`hard_threshold`].
pub fn hard_threshold_matrix(m: &Matrix, zeta: f64) -> Matrix {
    assert!(zeta >= 0.0);
    let data = m.data().iter().map(|&v| ht_value(v, zeta)).collect();
    Matrix::from_data(m.rows(), m.cols(), data).expect("same shape")
}

#[inline]
fn ht_value(v: f64, zeta: f64) -> f64 {
    if v.abs() > zeta {
        v
    } else {
        0.0
    }
}

/// Sampled relative error: block norms of the residual over block norms of
/// the observation. Errors out when the observation blocks are all zero.
pub fn relative_error(
    e_core: &DenseTensor,
    e_fibers: &[Matrix],
    x_core: &DenseTensor,
    x_fibers: &[Matrix],
) -> Result<f64, SolverError> {
    let num = e_core.fro_norm() + e_fibers.iter().map(|m| m.fro_norm()).sum::<f64>();
    let den = x_core.fro_norm() + x_fibers.iter().map(|m| m.fro_norm()).sum::<f64>();
    if den == 0.0 {
        return Err(SolverError::Degenerate);
    }
    Ok(num / den)
}

/// Max magnitude of X over the sampled blocks, the run-time proxy for the
/// unobservable max magnitude of the low-rank part.
pub fn zeta0_auto(x: &DenseTensor, idx: &SampleIndices) -> f64 {
    let core = crate::tensor::subtensor(x, &idx.row_sets).expect("indices valid for x");
    let mut best = core.inf_norm();
    for mode in 1..=x.order() {
        let fib = crate::tensor::gather_fiber_columns(x, mode, &idx.col_sets[mode - 1])
            .expect("indices valid for x");
        best = best.max(fib.inf_norm());
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct IterRecord {
    pub k: usize,
    pub rel_err: f64,
    pub zeta: f64,
    pub millis: f64,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub warnings: Vec<String>,
    /// Total scalar reads from X (each block gather counts its size).
    pub entries_read: u64,
    /// Distinct flat positions of X touched over the whole solve.
    pub distinct_entries: u64,
}

impl SolverTrace {
    pub fn final_error(&self) -> f64 {
        self.records.last().map(|r| r.rel_err).unwrap_or(0.0)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// The outlier estimate on the sampled blocks (all the solver ever forms).
#[derive(Debug, Clone)]
pub struct SparseBlocks {
    pub core: DenseTensor,
    pub fibers: Vec<Matrix>,
    pub indices: SampleIndices,
}

#[derive(Debug)]
pub struct SolveOutput {
    pub model: CurModel,
    pub sparse: SparseBlocks,
    pub trace: SolverTrace,
}

/// Sampled blocks of one tensor at one draw of indices.
#[derive(Debug, Clone)]
struct Blocks {
    core: DenseTensor,
    fibers: Vec<Matrix>,
}

impl Blocks {
    fn zeros_like(other: &Blocks) -> Blocks {
        Blocks {
            core: DenseTensor::zeros(other.core.dims()),
            fibers: other
                .fibers
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    fn sub(&self, other: &Blocks) -> Blocks {
        Blocks {
            core: self.core.sub(&other.core),
            fibers: self
                .fibers
                .iter()
                .zip(&other.fibers)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    fn hard_threshold(&self, zeta: f64) -> Blocks {
        Blocks {
            core: hard_threshold(&self.core, zeta),
            fibers: self
                .fibers
                .iter()
                .map(|m| hard_threshold_matrix(m, zeta))
                .collect(),
        }
    }

    fn norm_sum(&self) -> f64 {
        self.core.fro_norm() + self.fibers.iter().map(|m| m.fro_norm()).sum::<f64>()
    }

    fn inf_norm(&self) -> f64 {
        self.fibers
            .iter()
            .fold(self.core.inf_norm(), |m, f| m.max(f.inf_norm()))
    }
}

/// Counting reader: every scalar fetched from X is tallied and its flat
/// position marked, so access frugality is checkable after a solve. Reads
/// also validate finiteness, which makes the non-finite-input check lazy:
/// entries the algorithm never touches are never inspected.
struct TensorReader<'a> {
    x: &'a DenseTensor,
    seen: Vec<u64>,
    events: u64,
}

impl<'a> TensorReader<'a> {
    fn new(x: &'a DenseTensor) -> Self {
        TensorReader {
            x,
            seen: vec![0u64; x.len().div_ceil(64)],
            events: 0,
        }
    }

    #[inline]
    fn read(&mut self, offset: usize) -> Result<f64, SolverError> {
        let v = self.x.data()[offset];
        if !v.is_finite() {
            return Err(SolverError::NonFiniteInput { offset });
        }
        self.seen[offset / 64] |= 1u64 << (offset % 64);
        self.events += 1;
        Ok(v)
    }

    fn distinct(&self) -> u64 {
        self.seen.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn gather_core(&mut self, row_sets: &[Vec<usize>]) -> Result<DenseTensor, SolverError> {
        let strides = tensor_strides(self.x.dims());
        let out_dims: Vec<usize> = row_sets.iter().map(|s| s.len()).collect();
        let per_mode: Vec<Vec<usize>> = row_sets
            .iter()
            .enumerate()
            .map(|(m, set)| set.iter().map(|&i| (i - 1) * strides[m]).collect())
            .collect();
        let total: usize = out_dims.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut counters = vec![0usize; out_dims.len()];
        let mut base: usize = per_mode.iter().map(|offs| offs[0]).sum();
        for _ in 0..total {
            out.push(self.read(base)?);
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
        Ok(DenseTensor::from_data(&out_dims, out).expect("sizes consistent"))
    }

    fn gather_fibers(&mut self, mode: usize, cols: &[usize]) -> Result<Matrix, SolverError> {
        let dims = self.x.dims();
        let map = MultiIndexMap::new(mode, dims)?;
        let strides = tensor_strides(dims);
        let k0 = mode - 1;
        let d_k = dims[k0];
        let mut out = Matrix::zeros(d_k, cols.len());
        for (ci, &c) in cols.iter().enumerate() {
            let coords = map.coords_for(c);
            let mut base = 0usize;
            for (m, &i) in coords.iter().enumerate() {
                if m != k0 {
                    base += (i - 1) * strides[m];
                }
            }
            for r in 0..d_k {
                let v = self.read(base + r * strides[k0])?;
                out.set(r, ci, v);
            }
        }
        Ok(out)
    }

    fn gather(&mut self, idx: &SampleIndices) -> Result<Blocks, SolverError> {
        let core = self.gather_core(&idx.row_sets)?;
        let fibers = (1..=self.x.order())
            .map(|mode| self.gather_fibers(mode, &idx.col_sets[mode - 1]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Blocks { core, fibers })
    }
}

fn tensor_strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in 1..dims.len() {
        s[k] = s[k - 1] * dims[k - 1];
    }
    s
}

/// Blocks of the model's reconstruction at the given index draw.
fn eval_blocks(model: &CurModel, idx: &SampleIndices) -> Blocks {
    let core = cur::cur_eval_core(model, idx);
    let fibers = (1..=model.order())
        .map(|mode| cur::cur_eval_fibers(model, mode, idx))
        .collect();
    Blocks { core, fibers }
}

/// Run the solver on an observed tensor.
///
/// Returns the CUR-form estimate of the low-rank part, the sampled blocks of
/// the outlier estimate, and the per-iteration trace.
pub fn solve(x: &DenseTensor, cfg: &SolverConfig) -> Result<SolveOutput, SolverError> {
    cfg.validate(x.dims())?;
    let dims = x.dims().to_vec();
    let scfg = cfg.sampling();
    let mut reader = TensorReader::new(x);

    let mut idx = sampling::draw_indices_at(&scfg, &dims, 0)?;
    let mut xb = reader.gather(&idx)?;
    let mut denom = xb.norm_sum();
    let mut zeta = match cfg.zeta0 {
        Zeta0::Auto => xb.inf_norm(),
        Zeta0::Fixed(z) => z,
    };

    let mut records: Vec<IterRecord> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut model: Option<CurModel> = None;
    let mut s_blocks = Blocks::zeros_like(&xb);
    // With L = S = 0 the residual blocks equal the observation blocks, so
    // the starting error is exactly 1 (or 0 for an all-zero sample).
    let mut err = if denom == 0.0 { 0.0 } else { 1.0 };
    let mut cached_lb: Option<Blocks> = None;
    let mut k = 0usize;
    let mut termination = Termination::Converged;

    while err > cfg.eps {
        if k >= cfg.max_iters {
            termination = Termination::MaxIters;
            break;
        }
        let t0 = Instant::now();
        if cfg.variant.resamples() && k > 0 {
            idx = sampling::draw_indices_at(&scfg, &dims, k as u64)?;
            xb = reader.gather(&idx)?;
            denom = xb.norm_sum();
            cached_lb = None;
            if denom == 0.0 {
                warnings.push(format!("iteration {}: resampled blocks are all zero", k + 1));
                break;
            }
        }
        zeta *= cfg.gamma;

        let lb = match (&model, cached_lb.take()) {
            (Some(_), Some(cached)) => cached,
            (Some(m), None) => eval_blocks(m, &idx),
            (None, _) => Blocks::zeros_like(&xb),
        };
        s_blocks = xb.sub(&lb).hard_threshold(zeta);

        let core_new = xb.core.sub(&s_blocks.core);
        let fibers_new: Vec<Matrix> = xb
            .fibers
            .iter()
            .zip(&s_blocks.fibers)
            .map(|(a, b)| a.sub(b))
            .collect();
        let new_model = cur::model_from_blocks(core_new, fibers_new, &idx, &cfg.ranks, &dims)?;
        let deficient = new_model.deficient_modes(1e-12);
        if !deficient.is_empty() {
            warnings.push(format!(
                "iteration {}: rank-deficient sample in modes {deficient:?}; \
                 proceeding with the tolerant pseudo-inverse",
                k + 1
            ));
        }

        let lb_new = eval_blocks(&new_model, &idx);
        let residual = xb.sub(&lb_new).sub(&s_blocks);
        err = if denom == 0.0 {
            0.0
        } else {
            residual.norm_sum() / denom
        };
        model = Some(new_model);
        if !cfg.variant.resamples() {
            cached_lb = Some(lb_new);
        }
        k += 1;
        records.push(IterRecord {
            k,
            rel_err: err,
            zeta,
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
        if !err.is_finite() {
            warnings.push(format!("iteration {k}: non-finite relative error"));
            termination = Termination::MaxIters;
            break;
        }
    }

    // Never-iterated path (all-zero sampled blocks): emit the zero model.
    let model = match model {
        Some(m) => m,
        None => cur::model_from_blocks(
            xb.core.clone(),
            xb.fibers.clone(),
            &idx,
            &cfg.ranks,
            &dims,
        )?,
    };
    Ok(SolveOutput {
        model,
        sparse: SparseBlocks {
            core: s_blocks.core,
            fibers: s_blocks.fibers,
            indices: idx,
        },
        trace: SolverTrace {
            records,
            termination,
            warnings,
            entries_read: reader.events,
            distinct_entries: reader.distinct(),
        },
    })
}

/// Diagnostic full outlier extraction `HT_zeta(X - L)` with L materialized
/// from the model. Touches every entry of X; not part of the sampled-access
/// contract.
pub fn extract_full_sparse(x: &DenseTensor, model: &CurModel, zeta: f64) -> DenseTensor {
    hard_threshold(&x.sub(&cur::cur_reconstruct(model)), zeta)
}
