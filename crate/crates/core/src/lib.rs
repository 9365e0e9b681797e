//! Kernelized multi-view subspace clustering with a tensor nuclear norm
//! regularizer on the stacked self-representation matrices.
//!
//! The pipeline: per-view Gram matrices ([`kernel`]), an ADMM solver whose
//! subproblems are all closed-form ([`solver`]), t-SVD based tensor
//! operations ([`tensor`]), spectral clustering of the learned affinity
//! ([`spectral`]) and the usual clustering criteria ([`metrics`]).
//! [`pipeline`] wires these to CSV datasets and result files.

pub mod error;
pub mod kernel;
pub mod metrics;
pub mod pipeline;
pub mod solver;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use kernel::{factor_kernel, gram_matrix, h_value, KernelFactor, KernelSpec};
pub use metrics::{evaluate_runs, MetricsReport, MetricsSummary};
pub use solver::{solve, SolveOutcome, SolveTrace, SolverConfig, SolverState};
pub use spectral::{build_affinity, spectral_cluster, AffinityMatrix, ClusterAssignment};
pub use tensor::{
    dft_mode3, idft_mode3, rotate, tnn, tnn_prox, tsvd, unrotate, SpectralSlices, Tensor3,
};
