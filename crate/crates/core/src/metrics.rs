//! Reconstruction from identified coefficients and the benchmark's error
//! indicators.
//!
//! "Reconstruction error" here means: integrate the identified model as an
//! ODE from the reconstruction initial state, with the same integrator and
//! step as the ground truth, and compare against the noise-free true
//! trajectory over the whole horizon. RMSE is the root mean square of the
//! per-sample error signal; STD is that signal's population standard
//! deviation about its mean, so std ≤ rmse always (rmse² = mean² + std²).

use crate::dictionary::TermSpec;
use crate::dynamics::{self, DynamicsError, SystemSpec, Trajectory};
use crate::sparse_regression::{ObjectiveKind, SparseCoefficients};
use serde::Serialize;
use thiserror::Error;

/// Reconstructed states are clipped to this magnitude when a model diverges,
/// keeping sweep metrics finite; the record is flagged instead.
pub const DIVERGENCE_CLIP: f64 = 1e6;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectories do not overlap")]
    EmptyOverlap,
    #[error("time steps differ: {0} vs {1}")]
    TimeStepMismatch(f64, f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Per-sub-system result of one scenario replicate.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub scenario_id: String,
    pub replicate: usize,
    pub objective_kind: ObjectiveKind,
    /// Root-mean-square reconstruction error per state dimension.
    pub rmse: Vec<f64>,
    /// Standard deviation of the reconstruction error per state dimension.
    pub std: Vec<f64>,
    /// The identified model blew up and its states were clipped.
    pub diverged: bool,
    /// Trajectories had unequal lengths and were truncated to overlap.
    pub truncated: bool,
    /// Pipeline failure, if any; metrics fields are empty in that case.
    pub error: Option<String>,
    /// Echo of the solver settings that produced this record.
    pub settings: String,
    pub noise_seed: u64,
    pub solver_seed: u64,
}

/// Turn per-dimension fits into an ODE right-hand side.
///
/// The right-hand side of dimension k is the dot product of that
/// dimension's coefficients with the dictionary terms evaluated at the
/// current state, accumulated in term order over the support.
pub fn model_system(coeffs: &[SparseCoefficients], terms: &[TermSpec]) -> SystemSpec {
    let d = coeffs.len();
    let table: Vec<Vec<(f64, TermSpec)>> = coeffs
        .iter()
        .map(|c| {
            c.support
                .iter()
                .map(|&j| (c.xi[j], terms[j].clone()))
                .collect()
        })
        .collect();
    SystemSpec::custom(d, vec![], move |state, _, out| {
        for (k, row) in table.iter().enumerate() {
            let mut acc = 0.0;
            for (w, term) in row {
                acc += w * term.eval(state);
            }
            out[k] = acc;
        }
    })
}

/// Integrate the identified model from `x0` over `[0, t_end]` at step `dt`.
pub fn reconstruct(
    coeffs: &[SparseCoefficients],
    terms: &[TermSpec],
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Trajectory, MetricsError> {
    check_model(coeffs, terms)?;
    Ok(dynamics::integrate(&model_system(coeffs, terms), x0, dt, t_end)?)
}

/// [`reconstruct`] that never aborts: states are clipped to
/// [`DIVERGENCE_CLIP`] and the flag reports whether that happened.
pub fn reconstruct_saturating(
    coeffs: &[SparseCoefficients],
    terms: &[TermSpec],
    x0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<(Trajectory, bool), MetricsError> {
    check_model(coeffs, terms)?;
    Ok(dynamics::integrate_saturating(
        &model_system(coeffs, terms),
        x0,
        dt,
        t_end,
        DIVERGENCE_CLIP,
    )?)
}

fn check_model(coeffs: &[SparseCoefficients], terms: &[TermSpec]) -> Result<(), MetricsError> {
    for c in coeffs {
        if c.xi.len() != terms.len() {
            return Err(MetricsError::DimensionMismatch(c.xi.len(), terms.len()));
        }
    }
    Ok(())
}

/// RMSE and error-spread per dimension, over the common sample prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMetrics {
    pub rmse: Vec<f64>,
    pub std: Vec<f64>,
    pub truncated: bool,
}

/// Componentwise reconstruction-error metrics between two trajectories on
/// the same time grid. Unequal lengths are truncated to the common prefix
/// and flagged.
pub fn error_metrics(truth: &Trajectory, recon: &Trajectory) -> Result<ErrorMetrics, MetricsError> {
    if (truth.dt() - recon.dt()).abs() > 1e-12 * truth.dt().max(recon.dt()) {
        return Err(MetricsError::TimeStepMismatch(truth.dt(), recon.dt()));
    }
    if truth.dim() != recon.dim() {
        return Err(MetricsError::DimensionMismatch(truth.dim(), recon.dim()));
    }
    let n = truth.len().min(recon.len());
    if n == 0 {
        return Err(MetricsError::EmptyOverlap);
    }
    let d = truth.dim();
    let count = n as f64;
    let mut rmse = vec![0.0; d];
    let mut std = vec![0.0; d];
    for k in 0..d {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let e = truth.values()[(i, k)] - recon.values()[(i, k)];
            sum += e;
            sum_sq += e * e;
        }
        let mean = sum / count;
        rmse[k] = (sum_sq / count).sqrt();
        let mut spread = 0.0;
        for i in 0..n {
            let e = truth.values()[(i, k)] - recon.values()[(i, k)];
            spread += (e - mean) * (e - mean);
        }
        std[k] = (spread / count).sqrt();
    }
    Ok(ErrorMetrics {
        rmse,
        std,
        truncated: truth.len() != recon.len(),
    })
}

/// Per-dimension root-mean-square error between two trajectories.
pub fn rmse_per_dim(truth: &Trajectory, recon: &Trajectory) -> Result<Vec<f64>, MetricsError> {
    Ok(error_metrics(truth, recon)?.rmse)
}

/// Per-dimension population standard deviation of the error signal.
pub fn std_per_dim(truth: &Trajectory, recon: &Trajectory) -> Result<Vec<f64>, MetricsError> {
    Ok(error_metrics(truth, recon)?.std)
}
