//! `rtcur` binary: solve, synth, phase, runtime, convert, sparsity.

use clap::{Args, Parser, Subcommand};
use rtcur_cli::commands::{self, CliError};
use rtcur_cli::harness::{PhaseGridSpec, RuntimeSpec};
use rtcur_core::solver::{SolverConfig, Variant, Zeta0};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rtcur",
    about = "Robust tensor CUR decompositions: split a tensor into a low-Tucker-rank part \
             (in CUR form) and a sparse outlier part",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_zeta0(s: &str) -> Result<Zeta0, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Zeta0::Auto);
    }
    s.parse::<f64>()
        .map(Zeta0::Fixed)
        .map_err(|_| format!("zeta0 must be `auto` or a number, got `{s}`"))
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Target Tucker rank, one entry per mode.
    #[arg(long, value_delimiter = ',', required = true)]
    rank: Vec<usize>,
    /// Solver variant: fixed/resampled indices x fiber/chidori columns.
    #[arg(long, default_value = "rc")]
    variant: Variant,
    /// Sampling constant scaling the index-set sizes.
    #[arg(long, default_value_t = 3.0)]
    upsilon: f64,
    /// Threshold decay factor in (0, 1).
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    /// Initial threshold: `auto` (max sampled magnitude) or a number.
    #[arg(long, default_value = "auto", value_parser = parse_zeta0)]
    zeta0: Zeta0,
    /// Stopping tolerance on the sampled relative error.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverFlags {
    fn to_config(&self) -> SolverConfig {
        SolverConfig {
            ranks: self.rank.clone(),
            variant: self.variant,
            upsilon: self.upsilon,
            zeta0: self.zeta0,
            gamma: self.gamma,
            eps: self.eps,
            max_iters: self.max_iters,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a tensor robust PCA problem from an .rtt file.
    Solve {
        /// Input tensor (.rtt).
        input: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
        /// Output directory (model/, trace.csv, summary.txt).
        #[arg(long, default_value = "rtcur-out")]
        out: PathBuf,
    },
    /// Generate a planted low-rank-plus-sparse instance.
    Synth {
        /// Tensor dimensions, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Tucker rank, one entry per mode.
        #[arg(long, value_delimiter = ',', required = true)]
        rank: Vec<usize>,
        /// Outlier fraction in [0, 1].
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (x.rtt, lstar.rtt, sstar.rtt).
        #[arg(long, default_value = "rtcur-synth")]
        out: PathBuf,
    },
    /// Phase-transition grid over corruption rate and sampling constant.
    Phase {
        #[arg(long, default_value_t = 100)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.15,0.3,0.45")]
        alpha_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1.5,2.5,3.5,4.5")]
        upsilon_grid: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value = "rc")]
        variant: Variant,
        #[arg(long, default_value_t = 0.7)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Success threshold on the full low-rank recovery error.
        #[arg(long, default_value_t = 1e-3)]
        success_threshold: f64,
        #[arg(long, default_value_t = 60)]
        max_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for trials (output independent of this).
        #[arg(long, default_value_t = 2)]
        jobs: usize,
        #[arg(long, default_value = "phase.csv")]
        out: PathBuf,
    },
    /// Runtime-vs-dimension sweep on planted instances.
    Runtime {
        /// Cubic tensor sides to sweep, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
        dims_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        /// Variants to time, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "ff,rf,fc,rc")]
        variants: Vec<Variant>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0.2)]
        alpha: f64,
        #[arg(long, default_value_t = 3.0)]
        upsilon: f64,
        #[arg(long, default_value_t = 0.7)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runtime.csv")]
        out: PathBuf,
    },
    /// Convert a solved model directory to HOSVD factor files.
    Convert {
        /// Model directory written by `solve`.
        model: PathBuf,
        #[arg(long, default_value = "rtcur-hosvd")]
        out: PathBuf,
    },
    /// Monte-Carlo check of the Bernoulli outlier sparsity bounds.
    Sparsity {
        #[arg(long, default_value_t = 200)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "sparsity.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { input, flags, out } => commands::cmd_solve(&input, &out, &flags.to_config()),
        Command::Synth {
            dims,
            rank,
            alpha,
            seed,
            out,
        } => commands::cmd_synth(&dims, &rank, alpha, seed, &out),
        Command::Phase {
            d,
            n,
            r,
            alpha_grid,
            upsilon_grid,
            trials,
            variant,
            gamma,
            eps,
            success_threshold,
            max_iters,
            seed,
            jobs,
            out,
        } => {
            let spec = PhaseGridSpec {
                d,
                n,
                r,
                alpha_grid,
                upsilon_grid,
                trials,
                variant,
                gamma,
                eps,
                success_threshold,
                max_iters,
                seed,
            };
            commands::cmd_phase(&spec, jobs, &out)
        }
        Command::Runtime {
            dims_list,
            n,
            r,
            variants,
            trials,
            alpha,
            upsilon,
            gamma,
            eps,
            max_iters,
            seed,
            out,
        } => {
            let spec = RuntimeSpec {
                dims_list,
                n,
                r,
                variants,
                trials,
                alpha,
                upsilon,
                gamma,
                eps,
                max_iters,
                seed,
            };
            commands::cmd_runtime(&spec, &out)
        }
        Command::Convert { model, out } => commands::cmd_convert(&model, &out),
        Command::Sparsity {
            d,
            n,
            alpha,
            trials,
            seed,
            out,
        } => commands::cmd_sparsity(d, n, alpha, trials, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail = e.to_string().replace('"', "'").replace('\n', " ");
            eprintln!("error kind={} detail=\"{detail}\"", e.kind());
            ExitCode::FAILURE
        }
    }
}
