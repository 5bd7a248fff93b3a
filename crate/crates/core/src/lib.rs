//! Robust tensor CUR decompositions for tensor robust principal component
//! analysis.
//!
//! Given an observation `X = L + S` with `L` of low Tucker rank and `S`
//! sparse, the solver recovers `L` in tensor CUR form and `S` on the sampled
//! blocks by alternating hard thresholding with CUR refits on a decaying
//! threshold schedule. Four variants cross fixed vs. resampled index draws
//! with Fiber vs. Chidori column sampling.

pub mod cur;
pub mod io;
pub mod linalg;
pub mod sampling;
pub mod seed;
pub mod solver;
pub mod synth;
pub mod tensor;

pub use cur::{cur_decompose, cur_reconstruct, cur_to_hosvd, CurModel, HosvdModel};
pub use sampling::{sample_sizes, SampleIndices, SamplingConfig, Strategy};
pub use solver::{hard_threshold, solve, SolveOutput, SolverConfig, SolverTrace, Variant, Zeta0};
pub use synth::{gen_bernoulli, gen_instance, gen_lowrank, gen_outliers, SyntheticInstance};
pub use tensor::{fold, mode_product, subtensor, unfold, DenseTensor, Matrix};
