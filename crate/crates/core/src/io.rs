//! On-disk formats: the `.rtt` binary tensor file and the CUR model
//! directory.
//!
//! `.rtt` layout: magic bytes `RTT1`, a u8 mode count n, n little-endian u64
//! dims, then the entries as little-endian f64 in column-major order.
//! Readers reject wrong magic and truncated payloads, reporting the failing
//! byte offset.

use crate::cur::{self, CurModel};
use crate::linalg::TruncatedSvd;
use crate::sampling::{SampleIndices, Strategy};
use crate::tensor::{DenseTensor, Matrix};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const RTT_MAGIC: [u8; 4] = *b"RTT1";

#[derive(Debug, Error)]
pub enum RttError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic bytes at offset 0 (expected RTT1)")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated payload at byte offset {offset} (expected {expected} more bytes)")]
    Truncated {
        path: PathBuf,
        offset: u64,
        expected: u64,
    },
    #[error("{path}: invalid header: {reason}")]
    BadHeader { path: PathBuf, reason: String },
}

impl RttError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RttError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn write_rtt(path: &Path, t: &DenseTensor) -> Result<(), RttError> {
    let file = File::create(path).map_err(|e| RttError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |bytes: &[u8]| w.write_all(bytes).map_err(|e| RttError::io(path, e));
    emit(&RTT_MAGIC)?;
    emit(&[t.order() as u8])?;
    for &d in t.dims() {
        emit(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        emit(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| RttError::io(path, e))
}

pub fn read_rtt(path: &Path) -> Result<DenseTensor, RttError> {
    let file = File::open(path).map_err(|e| RttError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut offset = 0u64;
    let mut take = |buf: &mut [u8], offset: &mut u64| -> Result<(), RttError> {
        let mut filled = 0usize;
        while filled < buf.len() {
            let n = r
                .read(&mut buf[filled..])
                .map_err(|e| RttError::io(path, e))?;
            if n == 0 {
                return Err(RttError::Truncated {
                    path: path.to_path_buf(),
                    offset: *offset + filled as u64,
                    expected: (buf.len() - filled) as u64,
                });
            }
            filled += n;
        }
        *offset += buf.len() as u64;
        Ok(())
    };

    let mut magic = [0u8; 4];
    take(&mut magic, &mut offset)?;
    if magic != RTT_MAGIC {
        return Err(RttError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let mut nbuf = [0u8; 1];
    take(&mut nbuf, &mut offset)?;
    let n = nbuf[0] as usize;
    if n == 0 {
        return Err(RttError::BadHeader {
            path: path.to_path_buf(),
            reason: "mode count is zero".into(),
        });
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let mut dbuf = [0u8; 8];
        take(&mut dbuf, &mut offset)?;
        let d = u64::from_le_bytes(dbuf);
        if d == 0 {
            return Err(RttError::BadHeader {
                path: path.to_path_buf(),
                reason: "zero dimension".into(),
            });
        }
        dims.push(d as usize);
    }
    let total: usize = dims.iter().product();
    let mut data = Vec::with_capacity(total);
    let mut vbuf = [0u8; 8];
    for _ in 0..total {
        take(&mut vbuf, &mut offset)?;
        data.push(f64::from_le_bytes(vbuf));
    }
    DenseTensor::from_data(&dims, data).map_err(|e| RttError::BadHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Write a matrix as a 2-mode `.rtt` tensor.
pub fn write_rtt_matrix(path: &Path, m: &Matrix) -> Result<(), RttError> {
    write_rtt(path, &m.to_tensor())
}

pub fn read_rtt_matrix(path: &Path) -> Result<Matrix, RttError> {
    let t = read_rtt(path)?;
    Matrix::from_tensor(&t).map_err(|e| RttError::BadHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Error)]
pub enum ModelDirError {
    #[error(transparent)]
    Rtt(#[from] RttError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest error in {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("model directory inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Cur(#[from] cur::CurError),
}

/// Serialize a model as a directory: `core.rtt`, per-mode `c{i}.rtt` fiber
/// matrices, per-mode `svd{i}_{u,s,v}.rtt` factor triplets, and a plain-text
/// `manifest.txt` with dims, ranks, strategy and index sets.
pub fn save_model(dir: &Path, model: &CurModel) -> Result<(), ModelDirError> {
    std::fs::create_dir_all(dir).map_err(|e| ModelDirError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    write_rtt(&dir.join("core.rtt"), &model.core)?;
    for (i, fiber) in model.fibers.iter().enumerate() {
        write_rtt_matrix(&dir.join(format!("c{}.rtt", i + 1)), fiber)?;
    }
    for (i, svd) in model.pinv_factors.iter().enumerate() {
        write_rtt_matrix(&dir.join(format!("svd{}_u.rtt", i + 1)), &svd.left)?;
        let s = DenseTensor::from_data(&[svd.singulars.len()], svd.singulars.clone())
            .expect("nonempty singulars");
        write_rtt(&dir.join(format!("svd{}_s.rtt", i + 1)), &s)?;
        write_rtt_matrix(&dir.join(format!("svd{}_v.rtt", i + 1)), &svd.right)?;
    }
    let manifest_path = dir.join("manifest.txt");
    let mut out = String::new();
    out.push_str(&format!("dims = {}\n", join_usizes(&model.dims)));
    out.push_str(&format!("ranks = {}\n", join_usizes(&model.ranks)));
    out.push_str(&format!("strategy = {}\n", model.indices.strategy));
    for (i, rows) in model.indices.row_sets.iter().enumerate() {
        out.push_str(&format!("rows{} = {}\n", i + 1, join_usizes(rows)));
    }
    for (i, cols) in model.indices.col_sets.iter().enumerate() {
        out.push_str(&format!("cols{} = {}\n", i + 1, join_usizes(cols)));
    }
    std::fs::write(&manifest_path, out).map_err(|e| ModelDirError::Io {
        path: manifest_path,
        source: e,
    })
}

fn join_usizes(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn manifest_err(path: &Path, reason: impl Into<String>) -> ModelDirError {
    ModelDirError::Manifest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Load a model directory written by [`save_model`], validating that the
/// manifest and the tensor files agree.
pub fn load_model(dir: &Path) -> Result<CurModel, ModelDirError> {
    let manifest_path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| ModelDirError::Io {
        path: manifest_path.clone(),
        source: e,
    })?;
    let mut dims: Option<Vec<usize>> = None;
    let mut ranks: Option<Vec<usize>> = None;
    let mut strategy: Option<Strategy> = None;
    let mut rows: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut cols: Vec<(usize, Vec<usize>)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| manifest_err(&manifest_path, format!("bad line `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let parse_list = |v: &str| -> Result<Vec<usize>, ModelDirError> {
            v.split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>()
                        .map_err(|_| manifest_err(&manifest_path, format!("bad integer `{tok}`")))
                })
                .collect()
        };
        if key == "dims" {
            dims = Some(parse_list(value)?);
        } else if key == "ranks" {
            ranks = Some(parse_list(value)?);
        } else if key == "strategy" {
            strategy = Some(
                value
                    .parse()
                    .map_err(|e: String| manifest_err(&manifest_path, e))?,
            );
        } else if let Some(i) = key.strip_prefix("rows") {
            let i: usize = i
                .parse()
                .map_err(|_| manifest_err(&manifest_path, format!("bad key `{key}`")))?;
            rows.push((i, parse_list(value)?));
        } else if let Some(i) = key.strip_prefix("cols") {
            let i: usize = i
                .parse()
                .map_err(|_| manifest_err(&manifest_path, format!("bad key `{key}`")))?;
            cols.push((i, parse_list(value)?));
        } else {
            return Err(manifest_err(&manifest_path, format!("unknown key `{key}`")));
        }
    }
    let dims = dims.ok_or_else(|| manifest_err(&manifest_path, "missing dims"))?;
    let ranks = ranks.ok_or_else(|| manifest_err(&manifest_path, "missing ranks"))?;
    let strategy = strategy.ok_or_else(|| manifest_err(&manifest_path, "missing strategy"))?;
    let n = dims.len();
    if ranks.len() != n || rows.len() != n || cols.len() != n {
        return Err(manifest_err(
            &manifest_path,
            format!(
                "order mismatch: dims {n}, ranks {}, rows {}, cols {}",
                ranks.len(),
                rows.len(),
                cols.len()
            ),
        ));
    }
    rows.sort_by_key(|&(i, _)| i);
    cols.sort_by_key(|&(i, _)| i);
    let idx = SampleIndices {
        row_sets: rows.into_iter().map(|(_, v)| v).collect(),
        col_sets: cols.into_iter().map(|(_, v)| v).collect(),
        strategy,
    };

    let core = read_rtt(&dir.join("core.rtt"))?;
    let expected_core: Vec<usize> = idx.row_sets.iter().map(|s| s.len()).collect();
    if core.dims() != expected_core.as_slice() {
        return Err(ModelDirError::Inconsistent(format!(
            "core dims {:?} do not match manifest index sets {:?}",
            core.dims(),
            expected_core
        )));
    }
    let mut fibers = Vec::with_capacity(n);
    let mut pinv_factors = Vec::with_capacity(n);
    for i in 1..=n {
        let c = read_rtt_matrix(&dir.join(format!("c{i}.rtt")))?;
        if c.rows() != dims[i - 1] || c.cols() != idx.col_sets[i - 1].len() {
            return Err(ModelDirError::Inconsistent(format!(
                "c{i} shape {}x{} does not match manifest ({} x {})",
                c.rows(),
                c.cols(),
                dims[i - 1],
                idx.col_sets[i - 1].len()
            )));
        }
        let left = read_rtt_matrix(&dir.join(format!("svd{i}_u.rtt")))?;
        let s = read_rtt(&dir.join(format!("svd{i}_s.rtt")))?;
        let right = read_rtt_matrix(&dir.join(format!("svd{i}_v.rtt")))?;
        let r = ranks[i - 1];
        if s.order() != 1 || s.len() != r || left.cols() != r || right.cols() != r {
            return Err(ModelDirError::Inconsistent(format!(
                "svd{i} factors do not carry exactly rank {r}"
            )));
        }
        if left.rows() != idx.row_sets[i - 1].len() || right.rows() != idx.col_sets[i - 1].len() {
            return Err(ModelDirError::Inconsistent(format!(
                "svd{i} factor shapes do not match index sets"
            )));
        }
        fibers.push(c);
        pinv_factors.push(TruncatedSvd {
            left,
            singulars: s.into_data(),
            right,
        });
    }
    Ok(cur::model_from_parts(
        core,
        fibers,
        pinv_factors,
        &idx,
        &ranks,
        &dims,
    )?)
}
