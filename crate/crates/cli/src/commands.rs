//! Subcommand implementations. Each returns a structured error that the
//! binary maps to a single machine-parseable stderr line and a nonzero exit.

use crate::harness::{
    run_phase_grid, run_runtime_bench, write_phase_csv, write_runtime_csv, PhaseGridSpec,
    RuntimeSpec,
};
use crate::logging;
use rtcur_core::cur::{cur_reconstruct, cur_to_hosvd};
use rtcur_core::io::{load_model, read_rtt, save_model, write_rtt, write_rtt_matrix};
use rtcur_core::solver::{solve, SolverConfig, Termination};
use rtcur_core::synth::{gen_instance, verify_sparsity_bounds, write_sparsity_bounds_csv};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Rtt(#[from] rtcur_core::io::RttError),
    #[error("{0}")]
    ModelDir(#[from] rtcur_core::io::ModelDirError),
    #[error("{0}")]
    Solver(#[from] rtcur_core::solver::SolverError),
    #[error("{0}")]
    Cur(#[from] rtcur_core::cur::CurError),
    #[error("config error: {0}")]
    Config(String),
    #[error("conversion parity check failed: relative gap {gap:e} exceeds {tol:e}")]
    ConversionParity { gap: f64, tol: f64 },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Stable machine-readable error kind for the stderr contract.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Rtt(_) => "io",
            CliError::ModelDir(_) => "model",
            CliError::Solver(rtcur_core::solver::SolverError::Config(_)) => "config",
            CliError::Solver(rtcur_core::solver::SolverError::NonFiniteInput { .. }) => "input",
            CliError::Solver(_) => "solver",
            CliError::Cur(_) => "solver",
            CliError::Config(_) => "config",
            CliError::ConversionParity { .. } => "conversion",
            CliError::Io { .. } => "io",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// `solve`: read a tensor, run the solver, write the model directory, a
/// trace CSV and a plain-text summary.
pub fn cmd_solve(input: &Path, out_dir: &Path, cfg: &SolverConfig) -> Result<(), CliError> {
    let x = read_rtt(input)?;
    logging::info(format!(
        "solving {} (dims {:?}) with variant {}",
        input.display(),
        x.dims(),
        cfg.variant
    ));
    let out = solve(&x, cfg)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    save_model(&out_dir.join("model"), &out.model)?;

    let trace_path = out_dir.join("trace.csv");
    let mut w = create(&trace_path)?;
    writeln!(
        w,
        "# rtcur solve input={} variant={} rank={} upsilon={} gamma={} zeta0={} eps={} \
         max_iters={} seed={}",
        input.display(),
        cfg.variant,
        cfg.ranks
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(","),
        cfg.upsilon,
        cfg.gamma,
        match cfg.zeta0 {
            rtcur_core::solver::Zeta0::Auto => "auto".to_string(),
            rtcur_core::solver::Zeta0::Fixed(z) => z.to_string(),
        },
        cfg.eps,
        cfg.max_iters,
        cfg.seed
    )
    .map_err(io_err(&trace_path))?;
    writeln!(w, "k,e_k,zeta_k,millis").map_err(io_err(&trace_path))?;
    for r in &out.trace.records {
        writeln!(w, "{},{:e},{:e},{:.3}", r.k, r.rel_err, r.zeta, r.millis)
            .map_err(io_err(&trace_path))?;
    }
    w.flush().map_err(io_err(&trace_path))?;

    let summary_path = out_dir.join("summary.txt");
    let converged = out.trace.termination == Termination::Converged;
    let mut s = String::new();
    s.push_str(&format!("variant = {}\n", cfg.variant));
    s.push_str(&format!("converged = {converged}\n"));
    s.push_str(&format!("iterations = {}\n", out.trace.iterations()));
    s.push_str(&format!("final_e = {:e}\n", out.trace.final_error()));
    s.push_str(&format!("entries_read = {}\n", out.trace.entries_read));
    s.push_str(&format!(
        "distinct_entries_read = {}\n",
        out.trace.distinct_entries
    ));
    for warning in &out.trace.warnings {
        s.push_str(&format!("warning = {warning}\n"));
    }
    std::fs::write(&summary_path, s).map_err(io_err(&summary_path))?;
    println!(
        "solve: variant={} converged={} iterations={} final_e={:e} entries_read={}",
        cfg.variant,
        converged,
        out.trace.iterations(),
        out.trace.final_error(),
        out.trace.entries_read
    );
    Ok(())
}

/// `synth`: write a planted instance as x.rtt, lstar.rtt, sstar.rtt.
pub fn cmd_synth(
    dims: &[usize],
    ranks: &[usize],
    alpha: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    if ranks.len() != dims.len() {
        return Err(CliError::Config(format!(
            "{} ranks for {} dims",
            ranks.len(),
            dims.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    for (m, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
        if r < 1 || r > d {
            return Err(CliError::Config(format!(
                "rank {r} infeasible for dim {d} in mode {}",
                m + 1
            )));
        }
    }
    let inst = gen_instance(dims, ranks, alpha, seed);
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_rtt(&out_dir.join("x.rtt"), &inst.x)?;
    write_rtt(&out_dir.join("lstar.rtt"), &inst.lstar)?;
    write_rtt(&out_dir.join("sstar.rtt"), &inst.sstar)?;
    let nnz = inst.sstar.data().iter().filter(|&&v| v != 0.0).count();
    println!(
        "synth: dims={dims:?} ranks={ranks:?} alpha={alpha} seed={seed} outlier_nnz={nnz}"
    );
    Ok(())
}

/// `phase`: run the (alpha, upsilon) success grid and write one CSV row per
/// trial.
pub fn cmd_phase(spec: &PhaseGridSpec, jobs: usize, out: &Path) -> Result<(), CliError> {
    spec.validate().map_err(CliError::Config)?;
    let results = run_phase_grid(spec, jobs);
    let mut w = create(out)?;
    write_phase_csv(spec, &results, &mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;
    let successes = results.iter().filter(|r| r.success).count();
    println!(
        "phase: {} rows written to {} ({} successes)",
        results.len(),
        out.display(),
        successes
    );
    Ok(())
}

/// `runtime`: run the dimension sweep and write one aggregate row per
/// (d, variant).
pub fn cmd_runtime(spec: &RuntimeSpec, out: &Path) -> Result<(), CliError> {
    if spec.dims_list.is_empty() || spec.variants.is_empty() {
        return Err(CliError::Config(
            "runtime sweep needs at least one dimension and one variant".into(),
        ));
    }
    if spec.trials < 1 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let rows = run_runtime_bench(spec);
    let mut w = create(out)?;
    write_runtime_csv(spec, &rows, &mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;
    println!("runtime: {} aggregate rows written to {}", rows.len(), out.display());
    Ok(())
}

const CONVERT_PARITY_TOL: f64 = 1e-9;

/// `convert`: load a model directory, convert to HOSVD, verify that the two
/// reconstructions agree before writing anything.
pub fn cmd_convert(model_dir: &Path, out_dir: &Path) -> Result<(), CliError> {
    let model = load_model(model_dir)?;
    let hosvd = cur_to_hosvd(&model)?;
    let cur_recon = cur_reconstruct(&model);
    let gap = hosvd.reconstruct().sub(&cur_recon).fro_norm();
    let scale = cur_recon.fro_norm().max(f64::MIN_POSITIVE);
    if gap / scale > CONVERT_PARITY_TOL {
        return Err(CliError::ConversionParity {
            gap: gap / scale,
            tol: CONVERT_PARITY_TOL,
        });
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_rtt(&out_dir.join("core.rtt"), &hosvd.core)?;
    for (i, f) in hosvd.factors.iter().enumerate() {
        write_rtt_matrix(&out_dir.join(format!("factor{}.rtt", i + 1)), f)?;
    }
    println!(
        "convert: core {:?} and {} factors written to {}",
        hosvd.core.dims(),
        hosvd.factors.len(),
        out_dir.display()
    );
    Ok(())
}

/// `sparsity`: Monte-Carlo verification of the Bernoulli sparsity bounds.
pub fn cmd_sparsity(
    d: usize,
    n: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::Config("order must be at least 2".into()));
    }
    if !(0.0..=2.0).contains(&alpha) {
        return Err(CliError::Config(format!("alpha {alpha} outside [0, 2]")));
    }
    let dims = vec![d; n];
    let report = verify_sparsity_bounds(&dims, alpha, trials, seed);
    let mut w = create(out)?;
    write_sparsity_bounds_csv(&report, &mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;
    println!(
        "sparsity: t_sparse_fraction={} condition_holds={} bound={}",
        report.t_sparse_fraction,
        report.condition_holds,
        report
            .t_bound
            .map(|b| b.to_string())
            .unwrap_or_else(|| "n/a".into()),
    );
    Ok(())
}
