//! Sparse identification of nonlinear dynamics (SINDy) with two
//! interchangeable residual objectives.
//!
//! The classic SINDy pipeline regresses observed derivatives onto a
//! dictionary of candidate terms and keeps a sparse subset. This crate
//! implements that pipeline twice over:
//!
//! * an L2 objective solved by sequentially-thresholded least squares
//!   ([`sparse_regression::stlsq`]), and
//! * an L∞ (minimax) objective solved by particle swarm optimization over
//!   magnitude-gated supports ([`sparse_regression::linf_sparse_solve`]),
//!   with an exact Chebyshev linear-program fit
//!   ([`sparse_regression::linf_fit_fixed_support`]) for the inner problem
//!   and an exhaustive small-instance oracle for validation.
//!
//! Around the solvers sits everything needed to benchmark them on chaotic
//! systems: fixed-step RK4 simulation of Lorenz/Chen ([`dynamics`]),
//! derivative estimation by three routes ([`differentiation`]), a
//! multivariate monomial dictionary ([`dictionary`]), reconstruction-error
//! metrics ([`metrics`]) and a declarative experiment harness with CSV and
//! markdown table emission ([`harness`]).
//!
//! Reproducibility: every stochastic component takes an explicit 64-bit
//! seed. The project-wide generator is ChaCha8 (`rand_chacha`) and Gaussian
//! draws use the ziggurat sampler from `rand_distr`; identical seeds give
//! bitwise-identical results regardless of thread count.

pub mod dictionary;
pub mod differentiation;
pub mod dynamics;
pub mod harness;
pub mod metrics;
pub mod pso;
pub mod sparse_regression;

pub use dictionary::{build_dictionary, term_label, DictionaryMatrix, TermSpec};
pub use differentiation::{
    central_difference, error_stats, measured_derivative, polynomial_derivative,
    ApproxErrorStats, DerivativeSeries,
};
pub use dynamics::{
    add_state_noise, chen_rhs, integrate, lorenz_rhs, NoiseSpec, SystemSpec, Trajectory,
};
pub use metrics::{reconstruct, rmse_per_dim, std_per_dim, ResultRecord};
pub use pso::{pso_minimize, PsoConfig, PsoDiagnostics};
pub use sparse_regression::{
    exhaustive_sparse_oracle, least_squares, linf_fit_fixed_support, linf_sparse_solve, residual,
    stlsq, CoefficientsDocument, ObjectiveKind, SparseCoefficients,
};
