//! Small dense linear-algebra kernels: truncated SVD, pseudo-inverse from
//! SVD factors, thin QR.
//!
//! The SVD is a QR-preconditioned one-sided Jacobi: factor the (possibly
//! transposed) input as Q*R with Householder reflections, run cyclic
//! one-sided Jacobi on the small square R, and recombine. Jacobi on the
//! square factor keeps singular values accurate to machine precision for the
//! matrix sizes this crate handles.

use crate::tensor::Matrix;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("rank {rank} exceeds min dimension {min_dim} of a {rows}x{cols} matrix")]
    RankTooLarge {
        rank: usize,
        min_dim: usize,
        rows: usize,
        cols: usize,
    },
    #[error("thin QR needs rows >= cols, got {rows}x{cols}")]
    QrShape { rows: usize, cols: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
}

/// Rank-r SVD factors: `left * diag(singulars) * right^T` approximates the
/// decomposed matrix.
///
/// `left` is m x r and `right` is p x r, both with orthonormal columns;
/// `singulars` is nonincreasing and nonnegative.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub left: Matrix,
    pub singulars: Vec<f64>,
    pub right: Matrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    /// `left * diag(singulars) * right^T`.
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.left.clone();
        for (j, &s) in self.singulars.iter().enumerate() {
            for v in scaled.col_mut(j) {
                *v *= s;
            }
        }
        scaled.mul(&self.right.transpose())
    }
}

/// Default pseudo-inverse cutoff: `max(rows, cols) * machine epsilon`,
/// relative to the largest singular value.
pub fn default_pinv_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Best rank-r approximation factors of `m` in the Frobenius norm.
///
/// Singular values match the top r of a full SVD; ties are broken
/// arbitrarily. Fails if `r` exceeds `min(rows, cols)` or is zero.
pub fn truncated_svd(m: &Matrix, r: usize) -> Result<TruncatedSvd, LinalgError> {
    if r == 0 {
        return Err(LinalgError::ZeroRank);
    }
    let min_dim = m.rows().min(m.cols());
    if r > min_dim {
        return Err(LinalgError::RankTooLarge {
            rank: r,
            min_dim,
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let (left, singulars, right) = svd(m);
    let keep: Vec<usize> = (1..=r).collect();
    Ok(TruncatedSvd {
        left: left.select_cols(&keep),
        singulars: singulars[..r].to_vec(),
        right: right.select_cols(&keep),
    })
}

/// Full thin SVD `(U, sigma, V)` with `q = min(rows, cols)` columns,
/// singular values sorted nonincreasing.
pub fn svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if m.rows() >= m.cols() {
        svd_tall(m)
    } else {
        let (u, s, v) = svd_tall(&m.transpose());
        (v, s, u)
    }
}

fn svd_tall(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let p = m.cols();
    let (q_fac, r_fac) = householder_qr(m);
    let (mut w, mut sigma, mut v) = jacobi_svd_square(&r_fac);
    sort_svd(&mut w, &mut sigma, &mut v);
    let u = q_fac.mul(&w);
    let u = complete_zero_columns(u, &sigma);
    debug_assert_eq!(u.cols(), p);
    (u, sigma, v)
}

/// One-sided Jacobi SVD of a square matrix: orthogonalize the columns of `a`
/// by plane rotations accumulated into `v`; singular values are the final
/// column norms and `u` the normalized columns.
fn jacobi_svd_square(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let n = a.cols();
    let mut b = a.clone();
    let mut v = Matrix::identity(n);
    let tol = 1e-15;
    let max_sweeps = 40;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for j in 0..n {
            for l in (j + 1)..n {
                let (mut ajj, mut all, mut ajl) = (0.0f64, 0.0f64, 0.0f64);
                {
                    let (cj, cl) = (b.col(j), b.col(l));
                    for (x, y) in cj.iter().zip(cl) {
                        ajj += x * x;
                        all += y * y;
                        ajl += x * y;
                    }
                }
                if ajl.abs() <= tol * (ajj * all).sqrt() || ajl == 0.0 {
                    continue;
                }
                rotated = true;
                let tau = (all - ajj) / (2.0 * ajl);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut b, j, l, cs, sn);
                rotate_columns(&mut v, j, l, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![0.0f64; n];
    let mut u = Matrix::zeros(b.rows(), n);
    for (j, s) in sigma.iter_mut().enumerate() {
        let norm = b.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
        *s = norm;
        if norm > 0.0 {
            let (bc, uc) = (b.col(j), u.col_mut(j));
            for (o, &x) in uc.iter_mut().zip(bc) {
                *o = x / norm;
            }
        }
    }
    (u, sigma, v)
}

fn rotate_columns(m: &mut Matrix, j: usize, l: usize, cs: f64, sn: f64) {
    let rows = m.rows();
    let (jo, lo) = (j * rows, l * rows);
    let data = m.data_mut();
    for i in 0..rows {
        let x = data[jo + i];
        let y = data[lo + i];
        data[jo + i] = cs * x - sn * y;
        data[lo + i] = sn * x + cs * y;
    }
}

fn sort_svd(u: &mut Matrix, sigma: &mut [f64], v: &mut Matrix) {
    let n = sigma.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let perm: Vec<usize> = order.iter().map(|&o| o + 1).collect();
    *u = u.select_cols(&perm);
    *v = v.select_cols(&perm);
    let sorted: Vec<f64> = order.iter().map(|&o| sigma[o]).collect();
    sigma.copy_from_slice(&sorted);
}

/// Replace exactly-zero left-singular columns (zero singular value) with an
/// orthonormal completion so the factor keeps orthonormal columns.
fn complete_zero_columns(mut u: Matrix, sigma: &[f64]) -> Matrix {
    let rows = u.rows();
    for (j, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            continue;
        }
        'candidates: for cand in 0..rows {
            let mut col = vec![0.0f64; rows];
            col[cand] = 1.0;
            for other in 0..u.cols() {
                if other == j {
                    continue;
                }
                let oc = u.col(other);
                let dot: f64 = oc.iter().zip(&col).map(|(a, b)| a * b).sum();
                for (c, &o) in col.iter_mut().zip(oc) {
                    *c -= dot * o;
                }
            }
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for (dst, &c) in u.col_mut(j).iter_mut().zip(&col) {
                    *dst = c / norm;
                }
                break 'candidates;
            }
        }
    }
    u
}

/// `right * diag(1/s_j for s_j > tol * s_1, else 0) * left^T`.
///
/// For an exact-rank-r input this is the Moore-Penrose pseudo-inverse of the
/// rank-r approximation. All-zero singular values yield the zero matrix.
pub fn pinv_from_svd(t: &TruncatedSvd, tol: f64) -> Matrix {
    let cutoff = tol * t.singulars.first().copied().unwrap_or(0.0);
    let mut scaled = t.right.clone();
    for (j, &s) in t.singulars.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        for v in scaled.col_mut(j) {
            *v *= inv;
        }
    }
    scaled.mul(&t.left.transpose())
}

/// Thin Householder QR: `m = Q * R` with `Q` (rows x cols) orthonormal and
/// `R` (cols x cols) upper triangular. Requires rows >= cols.
pub fn thin_qr(m: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    if m.rows() < m.cols() {
        return Err(LinalgError::QrShape {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let (q, r) = householder_qr(m);
    Ok((q, r))
}

/// Householder QR for rows >= cols; returns thin Q and square R.
fn householder_qr(m: &Matrix) -> (Matrix, Matrix) {
    let rows = m.rows();
    let cols = m.cols();
    let mut a = m.clone();
    // Householder vectors overwrite the lower triangle of `a`; betas kept
    // separately.
    let mut betas = vec![0.0f64; cols];
    for (k, b) in betas.iter_mut().enumerate() {
        let (beta, alpha) = make_householder(&mut a, k);
        *b = beta;
        a.set(k, k, alpha);
        if beta != 0.0 {
            apply_householder_right_cols(&mut a, k, beta);
        }
    }
    // R is the upper triangle.
    let mut r = Matrix::zeros(cols, cols);
    for c in 0..cols {
        for rr in 0..=c.min(cols - 1) {
            if rr <= c {
                r.set(rr, c, a.get(rr, c));
            }
        }
    }
    // Accumulate thin Q by applying the reflectors to the first `cols`
    // columns of the identity, in reverse order.
    let mut q = Matrix::zeros(rows, cols);
    for j in 0..cols {
        q.set(j, j, 1.0);
    }
    for k in (0..cols).rev() {
        let beta = betas[k];
        if beta == 0.0 {
            continue;
        }
        let v_tail = &a.col(k)[(k + 1)..rows].to_vec();
        for j in 0..cols {
            // w = beta * v^T q_j ; q_j -= w v, with v = [1, a[k+1.., k]].
            let qc = q.col_mut(j);
            let mut w = qc[k];
            for (&vi, &qi) in v_tail.iter().zip(&qc[(k + 1)..rows]) {
                w += vi * qi;
            }
            w *= beta;
            qc[k] -= w;
            for (qi, &vi) in qc[(k + 1)..rows].iter_mut().zip(v_tail) {
                *qi -= w * vi;
            }
        }
    }
    (q, r)
}

/// Build the Householder reflector for column k; stores v below the diagonal
/// (normalized to v[k] = 1) and returns (beta, new diagonal value).
fn make_householder(a: &mut Matrix, k: usize) -> (f64, f64) {
    let rows = a.rows();
    let col = &mut a.col_mut(k)[k..rows];
    let norm_sq: f64 = col.iter().map(|v| v * v).sum();
    let norm = norm_sq.sqrt();
    let akk = col[0];
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let alpha = if akk >= 0.0 { -norm } else { norm };
    let v0 = akk - alpha;
    if v0 == 0.0 {
        return (0.0, alpha);
    }
    for v in &mut col[1..] {
        *v /= v0;
    }
    let beta = -v0 / alpha;
    (beta, alpha)
}

/// Apply the reflector stored in column k to columns k+1..cols.
fn apply_householder_right_cols(a: &mut Matrix, k: usize, beta: f64) {
    let rows = a.rows();
    let cols = a.cols();
    let (head, tail) = a.data_mut().split_at_mut((k + 1) * rows);
    let v_tail = &head[k * rows + k + 1..k * rows + rows];
    for j in 0..(cols - k - 1) {
        let col_j = &mut tail[j * rows..(j + 1) * rows];
        let mut w = col_j[k];
        for (&vi, &xi) in v_tail.iter().zip(&col_j[(k + 1)..rows]) {
            w += vi * xi;
        }
        w *= beta;
        col_j[k] -= w;
        for (xi, &vi) in col_j[(k + 1)..rows].iter_mut().zip(v_tail) {
            *xi -= w * vi;
        }
    }
}
