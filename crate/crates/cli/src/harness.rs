//! Experiment harnesses: phase-transition grids over (alpha, upsilon) and
//! runtime-vs-dimension sweeps.
//!
//! Grid trials run concurrently on independently derived seeds; results are
//! collected in input order, so the output is identical for any worker
//! count. Runtime sweeps run serially for timing fidelity.

use crate::logging;
use rayon::prelude::*;
use rtcur_core::cur::cur_reconstruct;
use rtcur_core::seed;
use rtcur_core::solver::{solve, SolverConfig, Termination, Variant, Zeta0};
use rtcur_core::synth::gen_instance;
use std::io::{self, Write};

/// Phase-transition protocol: for each (alpha, upsilon) cell, solve `trials`
/// fresh planted instances and score recovery of the low-rank part.
#[derive(Debug, Clone)]
pub struct PhaseGridSpec {
    pub d: usize,
    pub n: usize,
    pub r: usize,
    pub alpha_grid: Vec<f64>,
    pub upsilon_grid: Vec<f64>,
    pub trials: usize,
    pub variant: Variant,
    pub gamma: f64,
    pub eps: f64,
    pub success_threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl PhaseGridSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.alpha_grid.is_empty() || self.upsilon_grid.is_empty() {
            return Err("alpha and upsilon grids must be nonempty".into());
        }
        if self.trials < 1 {
            return Err("trials must be at least 1".into());
        }
        if self.r < 1 || self.r > self.d {
            return Err(format!("rank {} infeasible for d {}", self.r, self.d));
        }
        Ok(())
    }
}

/// One solved trial of one grid cell.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub alpha: f64,
    pub upsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub rel_err: f64,
    pub iterations: usize,
    pub converged: bool,
    pub millis: f64,
    /// Per-iteration error ratios e(k+1)/e(k), for convergence-rate checks.
    pub error_ratios: Vec<f64>,
}

fn run_phase_trial(spec: &PhaseGridSpec, ai: usize, ui: usize, trial: usize) -> ExperimentResult {
    let alpha = spec.alpha_grid[ai];
    let upsilon = spec.upsilon_grid[ui];
    let instance_seed = seed::derive(spec.seed, &[ai as u64, ui as u64, trial as u64]);
    let dims = vec![spec.d; spec.n];
    let ranks = vec![spec.r; spec.n];
    let inst = gen_instance(&dims, &ranks, alpha, instance_seed);
    let cfg = SolverConfig {
        ranks,
        variant: spec.variant,
        upsilon,
        zeta0: Zeta0::Auto,
        gamma: spec.gamma,
        eps: spec.eps,
        max_iters: spec.max_iters,
        seed: seed::derive(instance_seed, &[0xbe]),
    };
    let t0 = std::time::Instant::now();
    let out = solve(&inst.x, &cfg).expect("feasible config");
    let millis = t0.elapsed().as_secs_f64() * 1e3;
    let recon = cur_reconstruct(&out.model);
    let rel_err = recon.sub(&inst.lstar).fro_norm() / inst.lstar.fro_norm();
    let errs: Vec<f64> = out.trace.records.iter().map(|r| r.rel_err).collect();
    let error_ratios = errs
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    ExperimentResult {
        alpha,
        upsilon,
        trial,
        seed: instance_seed,
        success: rel_err.is_finite() && rel_err <= spec.success_threshold,
        rel_err,
        iterations: out.trace.iterations(),
        converged: out.trace.termination == Termination::Converged,
        millis,
        error_ratios,
    }
}

/// Run every (alpha, upsilon, trial) combination on up to `jobs` workers.
/// Row order and content are independent of `jobs`.
pub fn run_phase_grid(spec: &PhaseGridSpec, jobs: usize) -> Vec<ExperimentResult> {
    let mut work = Vec::new();
    for ai in 0..spec.alpha_grid.len() {
        for ui in 0..spec.upsilon_grid.len() {
            for trial in 0..spec.trials {
                work.push((ai, ui, trial));
            }
        }
    }
    logging::info(format!(
        "phase grid: {} cells x {} trials = {} solves",
        spec.alpha_grid.len() * spec.upsilon_grid.len(),
        spec.trials,
        work.len()
    ));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        work.par_iter()
            .map(|&(ai, ui, trial)| {
                let r = run_phase_trial(spec, ai, ui, trial);
                logging::debug(format!(
                    "cell alpha={} upsilon={} trial={}: success={} rel_err={:.3e} iters={}",
                    r.alpha, r.upsilon, r.trial, r.success, r.rel_err, r.iterations
                ));
                r
            })
            .collect()
    })
}

/// Success rate per grid cell, row-major over (alpha, upsilon).
pub fn success_rates(spec: &PhaseGridSpec, results: &[ExperimentResult]) -> Vec<Vec<f64>> {
    let mut rates = vec![vec![0.0f64; spec.upsilon_grid.len()]; spec.alpha_grid.len()];
    for r in results {
        let ai = spec.alpha_grid.iter().position(|&a| a == r.alpha).unwrap();
        let ui = spec.upsilon_grid.iter().position(|&u| u == r.upsilon).unwrap();
        if r.success {
            rates[ai][ui] += 1.0;
        }
    }
    for row in &mut rates {
        for v in row.iter_mut() {
            *v /= spec.trials as f64;
        }
    }
    rates
}

pub fn write_phase_csv<W: Write>(
    spec: &PhaseGridSpec,
    results: &[ExperimentResult],
    w: &mut W,
) -> io::Result<()> {
    writeln!(
        w,
        "# rtcur phase d={} n={} r={} variant={} gamma={} eps={} success_threshold={} \
         max_iters={} trials={} seed={} alpha_grid={} upsilon_grid={}",
        spec.d,
        spec.n,
        spec.r,
        spec.variant,
        spec.gamma,
        spec.eps,
        spec.success_threshold,
        spec.max_iters,
        spec.trials,
        spec.seed,
        join_f64(&spec.alpha_grid),
        join_f64(&spec.upsilon_grid),
    )?;
    writeln!(w, "alpha,upsilon,trial,seed,success,rel_err,iterations,converged,millis")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{:e},{},{},{:.3}",
            r.alpha,
            r.upsilon,
            r.trial,
            r.seed,
            u8::from(r.success),
            r.rel_err,
            r.iterations,
            u8::from(r.converged),
            r.millis
        )?;
    }
    Ok(())
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Runtime-vs-dimension protocol: cubic tensors, fixed rank and corruption,
/// one shared instance per (d, trial) so variants are timed on matched data.
#[derive(Debug, Clone)]
pub struct RuntimeSpec {
    pub dims_list: Vec<usize>,
    pub n: usize,
    pub r: usize,
    pub variants: Vec<Variant>,
    pub trials: usize,
    pub alpha: f64,
    pub upsilon: f64,
    pub gamma: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub seed: u64,
}

/// Aggregate timings for one (d, variant) pair.
#[derive(Debug, Clone)]
pub struct RuntimeRow {
    pub d: usize,
    pub variant: Variant,
    pub trials: usize,
    pub mean_millis: f64,
    pub std_millis: f64,
    pub mean_iterations: f64,
    pub mean_iter_millis: f64,
    pub per_trial_millis: Vec<f64>,
}

/// Run the sweep serially (timing fidelity beats parallel throughput here).
pub fn run_runtime_bench(spec: &RuntimeSpec) -> Vec<RuntimeRow> {
    let mut rows = Vec::new();
    for &d in &spec.dims_list {
        let dims = vec![d; spec.n];
        let ranks = vec![spec.r; spec.n];
        let mut per_variant: Vec<(Vec<f64>, Vec<usize>)> =
            vec![(Vec::new(), Vec::new()); spec.variants.len()];
        for trial in 0..spec.trials {
            let instance_seed = seed::derive(spec.seed, &[d as u64, trial as u64]);
            let inst = gen_instance(&dims, &ranks, spec.alpha, instance_seed);
            for (vi, &variant) in spec.variants.iter().enumerate() {
                let cfg = SolverConfig {
                    ranks: ranks.clone(),
                    variant,
                    upsilon: spec.upsilon,
                    zeta0: Zeta0::Auto,
                    gamma: spec.gamma,
                    eps: spec.eps,
                    max_iters: spec.max_iters,
                    seed: seed::derive(instance_seed, &[vi as u64]),
                };
                let t0 = std::time::Instant::now();
                let out = solve(&inst.x, &cfg).expect("feasible config");
                let millis = t0.elapsed().as_secs_f64() * 1e3;
                per_variant[vi].0.push(millis);
                per_variant[vi].1.push(out.trace.iterations());
                logging::debug(format!(
                    "runtime d={d} variant={variant} trial={trial}: {millis:.1} ms, {} iters",
                    out.trace.iterations()
                ));
            }
        }
        for (vi, &variant) in spec.variants.iter().enumerate() {
            let (times, iters) = &per_variant[vi];
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
                / times.len().max(1) as f64;
            let total_iters: usize = iters.iter().sum();
            rows.push(RuntimeRow {
                d,
                variant,
                trials: spec.trials,
                mean_millis: mean,
                std_millis: var.sqrt(),
                mean_iterations: total_iters as f64 / iters.len() as f64,
                mean_iter_millis: times.iter().sum::<f64>() / total_iters.max(1) as f64,
                per_trial_millis: times.clone(),
            });
        }
    }
    rows
}

pub fn write_runtime_csv<W: Write>(
    spec: &RuntimeSpec,
    rows: &[RuntimeRow],
    w: &mut W,
) -> io::Result<()> {
    writeln!(
        w,
        "# rtcur runtime n={} r={} alpha={} upsilon={} gamma={} eps={} max_iters={} trials={} \
         seed={} variants={} dims={}",
        spec.n,
        spec.r,
        spec.alpha,
        spec.upsilon,
        spec.gamma,
        spec.eps,
        spec.max_iters,
        spec.trials,
        spec.seed,
        spec.variants
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
        spec.dims_list
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )?;
    writeln!(
        w,
        "d,variant,trials,mean_millis,std_millis,mean_iterations,mean_iter_millis"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.3},{:.3},{:.2},{:.4}",
            r.d,
            r.variant,
            r.trials,
            r.mean_millis,
            r.std_millis,
            r.mean_iterations,
            r.mean_iter_millis
        )?;
    }
    Ok(())
}

/// Least-squares slope of ln(time) against ln(d).
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
