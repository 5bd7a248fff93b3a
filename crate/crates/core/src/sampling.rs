//! Per-mode index sampling for Fiber and Chidori CUR.
//!
//! Row sets I_i are drawn uniformly without replacement from [d_i] with
//! |I_i| = ceil(upsilon * r_i * ln d_i), clamped to [r_i, d_i]. Fiber column
//! sets J_i are drawn the same way from the unfolding columns, independently
//! of the row sets; Chidori column sets are the linearization of the product
//! of the other modes' row sets.

use crate::seed;
use crate::tensor::{MultiIndexMap, TensorError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("rank {rank} invalid for dim {dim} in mode {mode}")]
    BadRank { mode: usize, rank: usize, dim: usize },
    #[error("sampling constant must be positive, got {0}")]
    BadUpsilon(f64),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// CUR column sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// J_i drawn independently of the row sets.
    Fiber,
    /// J_i is the product of the other modes' row sets.
    Chidori,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Fiber => write!(f, "fiber"),
            Strategy::Chidori => write!(f, "chidori"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fiber" => Ok(Strategy::Fiber),
            "chidori" => Ok(Strategy::Chidori),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// Per-mode index sets: rows I_i in [d_i] and unfolding columns J_i, all
/// 1-based, sorted, duplicate-free.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleIndices {
    pub row_sets: Vec<Vec<usize>>,
    pub col_sets: Vec<Vec<usize>>,
    pub strategy: Strategy,
}

impl SampleIndices {
    pub fn order(&self) -> usize {
        self.row_sets.len()
    }
}

/// Sampling hyperparameters.
#[derive(Debug, Clone)]
pub struct SamplingConfig {
    pub upsilon: f64,
    pub ranks: Vec<usize>,
    pub strategy: Strategy,
    pub resample: bool,
    pub seed: u64,
}

/// Target row/column sample counts per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizes {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

fn clamp_size(raw: f64, lo: usize, hi: usize) -> usize {
    (raw.ceil() as usize).clamp(lo.min(hi), hi)
}

/// Sample counts from the `|I_i| = ceil(upsilon * r_i * ln d_i)` rule,
/// clamped to `[r_i, d_i]`; Fiber columns use
/// `ceil(upsilon * r_i * ln prod_{j != i} d_j)`, Chidori columns are the
/// product of the other modes' row counts.
pub fn sample_sizes(
    dims: &[usize],
    ranks: &[usize],
    upsilon: f64,
    strategy: Strategy,
) -> Result<SampleSizes, SamplingError> {
    if upsilon <= 0.0 || !upsilon.is_finite() {
        return Err(SamplingError::BadUpsilon(upsilon));
    }
    if ranks.len() != dims.len() {
        return Err(TensorError::DimMismatch {
            context: format!("{} ranks for order-{} tensor", ranks.len(), dims.len()),
        }
        .into());
    }
    for (m, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
        if r < 1 || r > d {
            return Err(SamplingError::BadRank {
                mode: m + 1,
                rank: r,
                dim: d,
            });
        }
    }
    let rows: Vec<usize> = dims
        .iter()
        .zip(ranks)
        .map(|(&d, &r)| clamp_size(upsilon * r as f64 * (d as f64).ln(), r, d))
        .collect();
    let cols: Vec<usize> = match strategy {
        Strategy::Fiber => (0..dims.len())
            .map(|i| {
                let n_cols: usize = dims
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != i)
                    .map(|(_, &d)| d)
                    .product();
                clamp_size(
                    upsilon * ranks[i] as f64 * (n_cols as f64).ln(),
                    ranks[i],
                    n_cols,
                )
            })
            .collect(),
        Strategy::Chidori => (0..dims.len())
            .map(|i| {
                rows.iter()
                    .enumerate()
                    .filter(|&(m, _)| m != i)
                    .map(|(_, &s)| s)
                    .product()
            })
            .collect(),
    };
    Ok(SampleSizes { rows, cols })
}

/// Uniform sorted sample of `amount` distinct 1-based values from `[len]`.
fn sample_sorted(rng: &mut rand_chacha::ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, len, amount)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    picked.sort_unstable();
    picked
}

/// Column indices of the mode-k unfolding covering every combination of the
/// other modes' row sets, in the unfolding's column order (ascending when
/// the row sets are sorted).
pub fn chidori_columns(
    row_sets: &[Vec<usize>],
    mode: usize,
    dims: &[usize],
) -> Result<Vec<usize>, SamplingError> {
    let map = MultiIndexMap::new(mode, dims)?;
    let k0 = mode - 1;
    let other: Vec<usize> = (0..dims.len()).filter(|&m| m != k0).collect();
    let total: usize = other.iter().map(|&m| row_sets[m].len()).product();
    let mut cols = Vec::with_capacity(total);
    let mut counters = vec![0usize; other.len()];
    let mut idx = vec![1usize; dims.len()];
    for (&m, &c) in other.iter().zip(&counters) {
        idx[m] = row_sets[m][c];
    }
    for _ in 0..total {
        cols.push(map.col_for(&idx));
        for (ci, &m) in counters.iter_mut().zip(&other) {
            *ci += 1;
            if *ci < row_sets[m].len() {
                idx[m] = row_sets[m][*ci];
                break;
            }
            *ci = 0;
            idx[m] = row_sets[m][0];
        }
    }
    Ok(cols)
}

/// Draw index sets with explicit row counts (and column counts, for Fiber).
///
/// Deterministic in `seed_val`. Fiber column sets are drawn independently of
/// the row sets; Chidori column sets are constructed from the row sets.
pub fn draw_with_sizes(
    dims: &[usize],
    sizes: &SampleSizes,
    strategy: Strategy,
    seed_val: u64,
) -> Result<SampleIndices, SamplingError> {
    let n = dims.len();
    let mut row_sets = Vec::with_capacity(n);
    for (i, (&d, &amount)) in dims.iter().zip(&sizes.rows).enumerate() {
        let mut rng = seed::rng(seed::derive(seed_val, &[1, i as u64]));
        row_sets.push(sample_sorted(&mut rng, d, amount.min(d)));
    }
    let col_sets = match strategy {
        Strategy::Fiber => {
            let mut sets = Vec::with_capacity(n);
            for (i, &amount) in sizes.cols.iter().enumerate() {
                let n_cols: usize = dims
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != i)
                    .map(|(_, &d)| d)
                    .product();
                let mut rng = seed::rng(seed::derive(seed_val, &[2, i as u64]));
                sets.push(sample_sorted(&mut rng, n_cols, amount.min(n_cols)));
            }
            sets
        }
        Strategy::Chidori => (1..=n)
            .map(|mode| chidori_columns(&row_sets, mode, dims))
            .collect::<Result<Vec<_>, _>>()?,
    };
    Ok(SampleIndices {
        row_sets,
        col_sets,
        strategy,
    })
}

/// Draw index sets per the config's size rule, for iteration 0.
pub fn draw_indices(cfg: &SamplingConfig, dims: &[usize]) -> Result<SampleIndices, SamplingError> {
    draw_indices_at(cfg, dims, 0)
}

/// Draw index sets for a specific iteration of a resampling run; each
/// iteration gets an independent stream derived from the config seed.
pub fn draw_indices_at(
    cfg: &SamplingConfig,
    dims: &[usize],
    iteration: u64,
) -> Result<SampleIndices, SamplingError> {
    let sizes = sample_sizes(dims, &cfg.ranks, cfg.upsilon, cfg.strategy)?;
    draw_with_sizes(
        dims,
        &sizes,
        cfg.strategy,
        seed::derive(cfg.seed, &[0x5a3, iteration]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_match_formula() {
        // ceil(3 * 3 * ln 300) = 52 per mode.
        let s = sample_sizes(&[300, 300, 300], &[3, 3, 3], 3.0, Strategy::Fiber).unwrap();
        assert_eq!(s.rows, vec![52, 52, 52]);
        let expected_cols = (3.0_f64 * 3.0 * (300.0f64 * 300.0).ln()).ceil() as usize;
        assert_eq!(s.cols, vec![expected_cols; 3]);
    }

    #[test]
    fn sizes_clamp_to_dims() {
        let s = sample_sizes(&[10, 10], &[2, 2], 1e9, Strategy::Fiber).unwrap();
        assert_eq!(s.rows, vec![10, 10]);
        assert_eq!(s.cols, vec![10, 10]);
    }

    #[test]
    fn sizes_clamp_to_rank_below() {
        // ln(1) = 0 forces the lower clamp at r.
        let s = sample_sizes(&[1, 8], &[1, 2], 0.001, Strategy::Fiber).unwrap();
        assert_eq!(s.rows, vec![1, 2]);
    }

    #[test]
    fn chidori_col_count_is_product() {
        let s = sample_sizes(&[50, 50, 50], &[2, 2, 2], 1.5, Strategy::Chidori).unwrap();
        let r = s.rows[0];
        assert_eq!(s.cols, vec![r * r; 3]);
    }

    #[test]
    fn chidori_product_of_six() {
        let rows = vec![vec![1, 2, 3, 4, 5, 6]; 3];
        let cols = chidori_columns(&rows, 1, &[10, 10, 10]).unwrap();
        assert_eq!(cols.len(), 36);
    }

    #[test]
    fn chidori_matrix_case() {
        let rows = vec![vec![1, 2], vec![2]];
        let cols = chidori_columns(&rows, 1, &[3, 3]).unwrap();
        assert_eq!(cols, vec![2]);
    }

    #[test]
    fn chidori_enumerated_case() {
        // dims (3,3,3), I_2 = {1,3}, I_3 = {2}, mode 1:
        // col = 1 + (i_2 - 1) + 3 (i_3 - 1) -> {4, 6}.
        let rows = vec![vec![1, 2, 3], vec![1, 3], vec![2]];
        let cols = chidori_columns(&rows, 1, &[3, 3, 3]).unwrap();
        assert_eq!(cols, vec![4, 6]);
    }

    #[test]
    fn chidori_full_sets_cover_all_columns() {
        let rows = vec![vec![1, 2, 3], vec![1, 2], vec![1, 2]];
        let cols = chidori_columns(&rows, 2, &[3, 2, 2]).unwrap();
        assert_eq!(cols, (1..=6).collect::<Vec<_>>());
    }

    fn config(seed_val: u64) -> SamplingConfig {
        SamplingConfig {
            upsilon: 2.0,
            ranks: vec![2, 2, 2],
            strategy: Strategy::Fiber,
            resample: false,
            seed: seed_val,
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let dims = [30, 30, 30];
        let a = draw_indices(&config(9), &dims).unwrap();
        let b = draw_indices(&config(9), &dims).unwrap();
        assert_eq!(a, b);
        let c = draw_indices(&config(10), &dims).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draws_differ_across_iterations() {
        let dims = [30, 30, 30];
        let a = draw_indices_at(&config(9), &dims, 0).unwrap();
        let b = draw_indices_at(&config(9), &dims, 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn full_sizes_give_full_sets() {
        let dims = [6, 6];
        let sizes = SampleSizes {
            rows: vec![6, 6],
            cols: vec![6, 6],
        };
        let idx = draw_with_sizes(&dims, &sizes, Strategy::Fiber, 4).unwrap();
        assert_eq!(idx.row_sets[0], (1..=6).collect::<Vec<_>>());
        assert_eq!(idx.col_sets[1], (1..=6).collect::<Vec<_>>());
    }

    #[test]
    fn sets_are_sorted_and_in_range() {
        let dims = [40, 25, 30];
        let idx = draw_indices(&config(123), &dims).unwrap();
        for (m, set) in idx.row_sets.iter().enumerate() {
            assert!(set.windows(2).all(|w| w[0] < w[1]));
            assert!(set.iter().all(|&i| i >= 1 && i <= dims[m]));
        }
        for (m, set) in idx.col_sets.iter().enumerate() {
            let bound: usize = dims
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != m)
                .map(|(_, &d)| d)
                .product();
            assert!(set.windows(2).all(|w| w[0] < w[1]));
            assert!(set.iter().all(|&c| c >= 1 && c <= bound));
        }
    }

    #[test]
    fn marginal_inclusion_is_uniform() {
        // Each index should appear with frequency |I| / d over many draws.
        let d = 20usize;
        let amount = 5usize;
        let trials = 10_000usize;
        let mut counts = vec![0usize; d];
        for t in 0..trials {
            let mut rng = seed::rng(seed::derive(777, &[t as u64]));
            for i in sample_sorted(&mut rng, d, amount) {
                counts[i - 1] += 1;
            }
        }
        let p = amount as f64 / d as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 3.0 * se,
                "index {} frequency {freq} vs {p} (3 SE = {})",
                i + 1,
                3.0 * se
            );
        }
    }
}
