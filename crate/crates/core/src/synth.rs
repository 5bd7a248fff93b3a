//! Synthetic problem generation and sparsity characterization.
//!
//! Low-rank components come from a Gaussian core multiplied by Gaussian
//! factor matrices; outliers from a uniform random support with uniform
//! values. The sparsity side implements the tensor (slice-wise) and matrix
//! (row/column-wise) sparsity checks, and a Monte-Carlo verifier for the
//! Bernoulli-tensor sparsity bounds.

use crate::seed;
use crate::tensor::{reshape_split, DenseTensor, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::{self, Write};

/// A planted low-rank-plus-sparse problem: `x = lstar + sstar` entrywise.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub x: DenseTensor,
    pub lstar: DenseTensor,
    pub sstar: DenseTensor,
    pub ranks: Vec<usize>,
    pub alpha: f64,
    pub seed: u64,
}

/// Random Tucker-rank-(r_1..r_n) tensor: standard-normal core of dims
/// (r_1..r_n) multiplied along each mode by a standard-normal d_i x r_i
/// factor.
pub fn gen_lowrank(dims: &[usize], ranks: &[usize], seed_val: u64) -> DenseTensor {
    assert_eq!(dims.len(), ranks.len());
    assert!(ranks.iter().zip(dims).all(|(&r, &d)| r >= 1 && r <= d));
    let mut rng = seed::rng(seed::derive(seed_val, &[0x10]));
    let core_len: usize = ranks.iter().product();
    let core = DenseTensor::from_data(
        ranks,
        (0..core_len).map(|_| rng.sample(StandardNormal)).collect(),
    )
    .unwrap();
    let mut y = core;
    for (mode, (&d, &r)) in dims.iter().zip(ranks).enumerate() {
        let mut frng = seed::rng(seed::derive(seed_val, &[0x11, mode as u64]));
        let factor = Matrix::from_data(
            d,
            r,
            (0..d * r).map(|_| frng.sample(StandardNormal)).collect(),
        )
        .unwrap();
        y = crate::tensor::mode_product(&y, &factor, mode + 1).unwrap();
    }
    y
}

/// Sparse outlier tensor: `floor(alpha * prod dims)` support entries drawn
/// uniformly without replacement, values i.i.d. uniform on
/// `[-amplitude, amplitude]` (never exactly zero when amplitude > 0).
pub fn gen_outliers(dims: &[usize], alpha: f64, amplitude: f64, seed_val: u64) -> DenseTensor {
    assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0, 1]");
    assert!(amplitude >= 0.0);
    let total: usize = dims.iter().product();
    let nnz = (alpha * total as f64).floor() as usize;
    let mut out = DenseTensor::zeros(dims);
    if nnz == 0 {
        return out;
    }
    let mut rng = seed::rng(seed::derive(seed_val, &[0x20]));
    let support = rand::seq::index::sample(&mut rng, total, nnz);
    let data = out.data_mut();
    for pos in support {
        let v = if amplitude == 0.0 {
            0.0
        } else {
            loop {
                let v: f64 = rng.random_range(-amplitude..amplitude);
                if v != 0.0 {
                    break v;
                }
            }
        };
        data[pos] = v;
    }
    out
}

/// Bernoulli indicator tensor: each entry independently 1 with probability
/// `alpha / 2`, else 0.
pub fn gen_bernoulli(dims: &[usize], alpha: f64, seed_val: u64) -> DenseTensor {
    assert!((0.0..=2.0).contains(&alpha), "alpha must be in [0, 2]");
    let p = alpha / 2.0;
    let mut rng = seed::rng(seed::derive(seed_val, &[0x30]));
    let total: usize = dims.iter().product();
    let data = (0..total)
        .map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
        .collect();
    DenseTensor::from_data(dims, data).unwrap()
}

/// Generate a full planted instance with outlier amplitude set to the mean
/// absolute entry of the low-rank component.
///
/// The stored outlier tensor is `x - lstar` rather than the raw draw, which
/// makes `x = lstar + sstar` hold bit for bit; the two differ only by the
/// rounding of the addition and share the same support.
pub fn gen_instance(dims: &[usize], ranks: &[usize], alpha: f64, seed_val: u64) -> SyntheticInstance {
    let lstar = gen_lowrank(dims, ranks, seed_val);
    let amplitude = lstar.data().iter().map(|v| v.abs()).sum::<f64>() / lstar.len() as f64;
    let raw = gen_outliers(dims, alpha, amplitude, seed_val);
    let x = lstar.add(&raw);
    let sstar = x.sub(&lstar);
    SyntheticInstance {
        x,
        lstar,
        sstar,
        ranks: ranks.to_vec(),
        alpha,
        seed: seed_val,
    }
}

/// Slice-wise tensor sparsity verdict.
#[derive(Debug, Clone)]
pub struct TSparsityCheck {
    pub alpha: f64,
    pub is_sparse: bool,
    /// Worst slice occupancy (nonzero fraction) per mode.
    pub max_slice_occupancy: Vec<f64>,
}

/// Row/column matrix sparsity verdict.
#[derive(Debug, Clone)]
pub struct MSparsityCheck {
    pub alpha: f64,
    pub is_sparse: bool,
    pub max_row_occupancy: f64,
    pub max_col_occupancy: f64,
}

/// Combined report: slice-wise verdict plus one row/column verdict per
/// balanced unfolding split.
#[derive(Debug, Clone)]
pub struct SparsityReport {
    pub alpha_tested: f64,
    pub t_sparse: TSparsityCheck,
    /// (split k, verdict) for the d^k x d^(n-k) flattenings, k = 1..n-1.
    pub m_sparse: Vec<(usize, MSparsityCheck)>,
}

/// True iff every mode-j slice of `s` has nonzero fraction at most `alpha`,
/// for every mode.
pub fn check_t_sparsity(s: &DenseTensor, alpha: f64) -> TSparsityCheck {
    let n = s.order();
    let dims = s.dims().to_vec();
    let mut counts: Vec<Vec<usize>> = dims.iter().map(|&d| vec![0usize; d]).collect();
    let mut idx = vec![0usize; n];
    for &v in s.data() {
        if v != 0.0 {
            for (j, &i) in idx.iter().enumerate() {
                counts[j][i] += 1;
            }
        }
        for (j, c) in idx.iter_mut().enumerate() {
            *c += 1;
            if *c < dims[j] {
                break;
            }
            *c = 0;
        }
    }
    let total = s.len();
    let mut max_occ = Vec::with_capacity(n);
    let mut ok = true;
    for (j, per_slice) in counts.iter().enumerate() {
        let slice_size = (total / dims[j]) as f64;
        let worst = per_slice.iter().copied().max().unwrap_or(0) as f64 / slice_size;
        if worst > alpha {
            ok = false;
        }
        max_occ.push(worst);
    }
    TSparsityCheck {
        alpha,
        is_sparse: ok,
        max_slice_occupancy: max_occ,
    }
}

/// True iff every column of `m` has nonzero fraction at most `alpha` and
/// every row likewise.
pub fn check_m_sparsity(m: &Matrix, alpha: f64) -> MSparsityCheck {
    let (rows, cols) = (m.rows(), m.cols());
    let mut row_counts = vec![0usize; rows];
    let mut max_col_occ = 0.0f64;
    for c in 0..cols {
        let mut col_nnz = 0usize;
        for (r, &v) in m.col(c).iter().enumerate() {
            if v != 0.0 {
                col_nnz += 1;
                row_counts[r] += 1;
            }
        }
        max_col_occ = max_col_occ.max(col_nnz as f64 / rows as f64);
    }
    let max_row_occ = row_counts.iter().copied().max().unwrap_or(0) as f64 / cols as f64;
    MSparsityCheck {
        alpha,
        is_sparse: max_col_occ <= alpha && max_row_occ <= alpha,
        max_row_occupancy: max_row_occ,
        max_col_occupancy: max_col_occ,
    }
}

/// Full sparsity report for a tensor: slice-wise check plus the row/column
/// check of every balanced flattening.
pub fn sparsity_report(s: &DenseTensor, alpha: f64) -> SparsityReport {
    let t = check_t_sparsity(s, alpha);
    let m = (1..s.order())
        .map(|k| {
            let flat = reshape_split(s, k).expect("k in range");
            (k, check_m_sparsity(&flat, alpha))
        })
        .collect();
    SparsityReport {
        alpha_tested: alpha,
        t_sparse: t,
        m_sparse: m,
    }
}

/// Per-trial outcome of the Monte-Carlo verifier.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub t_sparse: bool,
    pub m_sparse: Vec<bool>,
}

/// Monte-Carlo verification of the Bernoulli sparsity bounds.
#[derive(Debug, Clone)]
pub struct SparsityBoundsReport {
    pub dims: Vec<usize>,
    pub alpha: f64,
    pub trials: usize,
    /// Lhs and rhs of the applicability condition
    /// `alpha d > 2 n ln d / (ln 4 - 1)`.
    pub condition_lhs: f64,
    pub condition_rhs: f64,
    pub condition_holds: bool,
    pub t_sparse_fraction: f64,
    /// (split k, fraction of trials whose flattening was matrix-sparse).
    pub m_sparse_fractions: Vec<(usize, f64)>,
    /// Analytic lower bound `1 - n d^(1 - n d^(n-2))` when the condition
    /// holds and the tensor is cubic.
    pub t_bound: Option<f64>,
    /// Analytic bounds `1 - d^(k - n d^(n-k-1)) - d^(n-k - n d^(k-1))`.
    pub m_bounds: Option<Vec<(usize, f64)>>,
    pub per_trial: Vec<TrialOutcome>,
}

/// Draw `trials` Bernoulli(alpha/2) tensors and report how often they are
/// slice-sparse and how often each balanced flattening is row/column-sparse,
/// alongside the analytic bounds when applicable.
pub fn verify_sparsity_bounds(
    dims: &[usize],
    alpha: f64,
    trials: usize,
    seed_val: u64,
) -> SparsityBoundsReport {
    let n = dims.len();
    let cubic = dims.windows(2).all(|w| w[0] == w[1]);
    let d = dims[0] as f64;
    let condition_lhs = alpha * d;
    let condition_rhs = 2.0 * n as f64 * d.ln() / (4.0f64.ln() - 1.0);
    let condition_holds = cubic && condition_lhs > condition_rhs;

    let mut per_trial = Vec::with_capacity(trials);
    let mut t_hits = 0usize;
    let mut m_hits = vec![0usize; n.saturating_sub(1)];
    for trial in 0..trials {
        let s = gen_bernoulli(dims, alpha, seed::derive(seed_val, &[0x40, trial as u64]));
        let t_ok = check_t_sparsity(&s, alpha).is_sparse;
        if t_ok {
            t_hits += 1;
        }
        let mut m_ok = Vec::with_capacity(n - 1);
        for k in 1..n {
            let flat = reshape_split(&s, k).expect("k in range");
            let ok = check_m_sparsity(&flat, alpha).is_sparse;
            if ok {
                m_hits[k - 1] += 1;
            }
            m_ok.push(ok);
        }
        per_trial.push(TrialOutcome {
            trial,
            t_sparse: t_ok,
            m_sparse: m_ok,
        });
    }

    let nf = n as f64;
    let (t_bound, m_bounds) = if condition_holds {
        let t_b = 1.0 - nf * d.powf(1.0 - nf * d.powf(nf - 2.0));
        let m_b = (1..n)
            .map(|k| {
                let kf = k as f64;
                let b = 1.0 - d.powf(kf - nf * d.powf(nf - kf - 1.0))
                    - d.powf(nf - kf - nf * d.powf(kf - 1.0));
                (k, b)
            })
            .collect();
        (Some(t_b), Some(m_b))
    } else {
        (None, None)
    };

    SparsityBoundsReport {
        dims: dims.to_vec(),
        alpha,
        trials,
        condition_lhs,
        condition_rhs,
        condition_holds,
        t_sparse_fraction: t_hits as f64 / trials.max(1) as f64,
        m_sparse_fractions: (1..n)
            .map(|k| (k, m_hits[k - 1] as f64 / trials.max(1) as f64))
            .collect(),
        t_bound,
        m_bounds,
        per_trial,
    }
}

/// CSV serialization: one row per trial, then frequency and bound rows.
pub fn write_sparsity_bounds_csv<W: Write>(report: &SparsityBoundsReport, w: &mut W) -> io::Result<()> {
    writeln!(
        w,
        "# sparsity-mc dims={:?} alpha={} trials={} condition_lhs={:.6} condition_rhs={:.6} condition_holds={}",
        report.dims, report.alpha, report.trials, report.condition_lhs, report.condition_rhs,
        report.condition_holds
    )?;
    let n = report.dims.len();
    let mut header = String::from("trial,t_sparse");
    for k in 1..n {
        header.push_str(&format!(",m_sparse_k{k}"));
    }
    writeln!(w, "{header}")?;
    for t in &report.per_trial {
        let mut line = format!("{},{}", t.trial, u8::from(t.t_sparse));
        for &ok in &t.m_sparse {
            line.push_str(&format!(",{}", u8::from(ok)));
        }
        writeln!(w, "{line}")?;
    }
    let mut freq = format!("frequency,{}", report.t_sparse_fraction);
    for &(_, f) in &report.m_sparse_fractions {
        freq.push_str(&format!(",{f}"));
    }
    writeln!(w, "{freq}")?;
    let mut bound = String::from("bound");
    match (&report.t_bound, &report.m_bounds) {
        (Some(tb), Some(mbs)) => {
            bound.push_str(&format!(",{tb}"));
            for &(_, b) in mbs {
                bound.push_str(&format!(",{b}"));
            }
        }
        _ => {
            bound.push_str(",n/a");
            for _ in 1..n {
                bound.push_str(",n/a");
            }
        }
    }
    writeln!(w, "{bound}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::unfold;

    #[test]
    fn lowrank_has_requested_dims_and_is_deterministic() {
        let a = gen_lowrank(&[6, 5, 4], &[2, 2, 2], 3);
        assert_eq!(a.dims(), &[6, 5, 4]);
        let b = gen_lowrank(&[6, 5, 4], &[2, 2, 2], 3);
        assert_eq!(a, b);
        assert_ne!(a, gen_lowrank(&[6, 5, 4], &[2, 2, 2], 4));
    }

    #[test]
    fn lowrank_unfoldings_have_numerical_rank_r() {
        let ranks = [2usize, 3, 2];
        let x = gen_lowrank(&[10, 9, 8], &ranks, 11);
        for mode in 1..=3usize {
            let unf = unfold(&x, mode).unwrap();
            let (_, sigma, _) = crate::linalg::svd(&unf);
            let r = ranks[mode - 1];
            assert!(sigma[r - 1] > 1e-10 * sigma[0]);
            assert!(
                sigma[r] <= 1e-10 * sigma[0],
                "mode {mode}: sigma_{} = {} vs sigma_1 = {}",
                r + 1,
                sigma[r],
                sigma[0]
            );
        }
    }

    #[test]
    fn outliers_zero_alpha() {
        let s = gen_outliers(&[5, 5, 5], 0.0, 1.0, 1);
        assert_eq!(s.fro_norm(), 0.0);
    }

    #[test]
    fn outliers_support_size_and_amplitude() {
        let s = gen_outliers(&[10, 10, 10], 0.2, 0.7, 5);
        let nnz = s.data().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nnz, 200);
        assert!(s.data().iter().all(|&v| v.abs() <= 0.7));
    }

    #[test]
    fn outlier_support_is_uniform() {
        let dims = [4usize, 4];
        let total = 16usize;
        let nnz = 4usize;
        let trials = 8000usize;
        let mut counts = vec![0usize; total];
        for t in 0..trials {
            let s = gen_outliers(&dims, 0.25, 1.0, seed::derive(99, &[t as u64]));
            for (i, &v) in s.data().iter().enumerate() {
                if v != 0.0 {
                    counts[i] += 1;
                }
            }
        }
        let p = nnz as f64 / total as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        for &c in &counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - p).abs() <= 3.0 * se, "{freq} vs {p}");
        }
    }

    #[test]
    fn bernoulli_density_and_reproducibility() {
        assert_eq!(gen_bernoulli(&[10, 10], 0.0, 3).fro_norm(), 0.0);
        let dims = [40usize, 40, 40];
        let alpha = 0.5f64;
        let s = gen_bernoulli(&dims, alpha, 7);
        assert_eq!(s, gen_bernoulli(&dims, alpha, 7));
        let total = 64_000f64;
        let p = alpha / 2.0;
        let density = s.data().iter().filter(|&&v| v != 0.0).count() as f64 / total;
        let se = (p * (1.0 - p) / total).sqrt();
        assert!((density - p).abs() <= 3.0 * se, "{density} vs {p}");
    }

    #[test]
    fn instance_is_exact_sum() {
        let inst = gen_instance(&[8, 8, 8], &[2, 2, 2], 0.1, 13);
        let diff = inst.x.sub(&inst.lstar).sub(&inst.sstar);
        assert_eq!(diff.fro_norm(), 0.0);
        let nnz = inst.sstar.data().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nnz, (0.1f64 * 512.0).floor() as usize);
    }

    #[test]
    fn t_sparsity_trivial_cases() {
        let zero = DenseTensor::zeros(&[4, 4, 4]);
        assert!(check_t_sparsity(&zero, 0.0).is_sparse);
        let ones = DenseTensor::from_data(&[3, 3, 3], vec![1.0; 27]).unwrap();
        assert!(check_t_sparsity(&ones, 1.0).is_sparse);
        assert!(!check_t_sparsity(&ones, 0.99).is_sparse);
    }

    /// Single-fiber tensor S(:, 1, 1) = 1 of side d.
    fn fiber_tensor(d: usize) -> DenseTensor {
        let mut s = DenseTensor::zeros(&[d, d, d]);
        for i in 1..=d {
            s.set(&[i, 1, 1], 1.0);
        }
        s
    }

    #[test]
    fn fiber_construction_is_t_sparse_but_not_m_sparse() {
        for d in [10usize, 50] {
            let alpha = 1.0 / d as f64;
            let s = fiber_tensor(d);
            let t = check_t_sparsity(&s, alpha);
            assert!(t.is_sparse, "d={d}");
            // Worst slice holds the whole fiber: occupancy d / d^2.
            assert!((t.max_slice_occupancy[1] - alpha).abs() <= 1e-15);
            let unf = unfold(&s, 1).unwrap();
            let m = check_m_sparsity(&unf, alpha);
            assert!(!m.is_sparse, "d={d}");
            assert_eq!(m.max_col_occupancy, 1.0);
            // The all-ones column only passes at alpha = 1.
            assert!(!check_m_sparsity(&unf, 0.999).is_sparse);
            assert!(check_m_sparsity(&unf, 1.0).is_sparse);
        }
    }

    #[test]
    fn combined_report_covers_all_splits() {
        let s = fiber_tensor(10);
        let report = sparsity_report(&s, 0.1);
        assert_eq!(report.alpha_tested, 0.1);
        assert!(report.t_sparse.is_sparse);
        assert_eq!(report.m_sparse.len(), 2);
        // The 10x100 flattening holds the all-ones column; the 100x10 one
        // spreads the fiber across rows and stays sparse at alpha = 0.1.
        assert!(!report.m_sparse[0].1.is_sparse);
        assert!(report.m_sparse[1].1.is_sparse);
    }

    #[test]
    fn m_sparsity_trivial_cases() {
        let zero = Matrix::zeros(4, 4);
        assert!(check_m_sparsity(&zero, 0.0).is_sparse);
        let id = Matrix::identity(8);
        assert!(check_m_sparsity(&id, 1.0 / 8.0).is_sparse);
        assert!(!check_m_sparsity(&id, 0.124).is_sparse);
    }

    #[test]
    fn t_and_m_agree_for_matrices() {
        for trial in 0..20u64 {
            let s = gen_bernoulli(&[7, 9], 0.6, trial);
            let as_matrix = Matrix::from_tensor(&s).unwrap();
            for alpha in [0.1, 0.3, 0.5] {
                assert_eq!(
                    check_t_sparsity(&s, alpha).is_sparse,
                    check_m_sparsity(&as_matrix, alpha).is_sparse,
                    "trial {trial} alpha {alpha}"
                );
            }
        }
    }

    #[test]
    fn bounds_report_zero_alpha_is_trivially_sparse() {
        let report = verify_sparsity_bounds(&[10, 10, 10], 0.0, 5, 1);
        assert!(!report.condition_holds);
        assert_eq!(report.t_sparse_fraction, 1.0);
        assert!(report.t_bound.is_none());
    }

    #[test]
    fn bounds_report_small_scale() {
        // d = 60, n = 3, alpha = 1.2: condition 72 > 63.6... holds.
        let report = verify_sparsity_bounds(&[60, 60, 60], 1.2, 20, 2);
        assert!(report.condition_holds);
        assert_eq!(report.t_sparse_fraction, 1.0);
        let tb = report.t_bound.unwrap();
        assert!(tb > 0.999999);
        let mut buf = Vec::new();
        write_sparsity_bounds_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# sparsity-mc"));
        assert!(text.contains("trial,t_sparse,m_sparse_k1,m_sparse_k2"));
        assert!(text.contains("frequency,1"));
        assert!(text.contains("bound,"));
        // Header comment + column header + trials + frequency + bound.
        assert_eq!(text.lines().count(), 2 + 20 + 2);
    }
}
