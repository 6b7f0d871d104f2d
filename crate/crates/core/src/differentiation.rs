//! Derivative estimates from trajectory data.
//!
//! Three routes, matching the benchmark scenarios: directly measured
//! derivatives plus Gaussian noise, second-order central differences, and
//! local least-squares polynomial fits (Savitzky-Golay style). Estimators
//! that cannot produce values at the trajectory ends drop those samples
//! rather than falling back to one-sided rules, so the error model stays
//! homogeneous across rows — one bad endpoint row would otherwise dominate
//! a minimax fit. Consumers align state rows to `valid_range`.

use crate::dynamics::{NoiseSpec, SystemSpec, Trajectory};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DifferentiationError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Estimated derivatives over a contiguous sub-range of a source trajectory.
///
/// `valid_range = (first, last)` are inclusive indices into the source; the
/// series holds `last - first + 1` rows aligned with those samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSeries {
    times: Vec<f64>,
    values: DMatrix<f64>,
    valid_range: (usize, usize),
}

impl DerivativeSeries {
    fn new(times: Vec<f64>, values: DMatrix<f64>, valid_range: (usize, usize)) -> Self {
        debug_assert_eq!(times.len(), values.nrows());
        debug_assert_eq!(times.len(), valid_range.1 - valid_range.0 + 1);
        DerivativeSeries {
            times,
            values,
            valid_range,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn valid_range(&self) -> (usize, usize) {
        self.valid_range
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Write CSV with header `t,dx1,...,dxd` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for j in 0..self.dim() {
            write!(w, ",dx{}", j + 1)?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{:.16e}", self.times[i])?;
            for j in 0..self.dim() {
                write!(w, ",{:.16e}", self.values[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Componentwise statistics of the approximation error e = est − truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxErrorStats {
    pub max_abs: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Evaluate the true right-hand side at every sample and add N(0, sigma²)
/// noise per entry. Covers the full trajectory.
pub fn measured_derivative(
    system: &SystemSpec,
    traj: &Trajectory,
    noise: &NoiseSpec,
) -> DerivativeSeries {
    let n = traj.len();
    let d = traj.dim();
    let mut values = DMatrix::zeros(n, d);
    let mut state = vec![0.0; d];
    let mut deriv = vec![0.0; d];
    for i in 0..n {
        for (j, s) in state.iter_mut().enumerate() {
            *s = traj.values()[(i, j)];
        }
        system.eval(&state, &mut deriv);
        for (j, v) in deriv.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    if noise.sigma != 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for i in 0..n {
            for j in 0..d {
                let draw: f64 = StandardNormal.sample(&mut rng);
                values[(i, j)] += noise.sigma * draw;
            }
        }
    }
    DerivativeSeries::new(traj.times().to_vec(), values, (0, n - 1))
}

/// Second-order central difference on interior samples; endpoints dropped.
pub fn central_difference(traj: &Trajectory) -> Result<DerivativeSeries, DifferentiationError> {
    let n = traj.len();
    if n < 3 {
        return Err(DifferentiationError::InsufficientData(format!(
            "central difference needs at least 3 samples, got {n}"
        )));
    }
    let d = traj.dim();
    let inv_2dt = 1.0 / (2.0 * traj.dt());
    let mut values = DMatrix::zeros(n - 2, d);
    for i in 1..n - 1 {
        for j in 0..d {
            values[(i - 1, j)] = (traj.values()[(i + 1, j)] - traj.values()[(i - 1, j)]) * inv_2dt;
        }
    }
    Ok(DerivativeSeries::new(
        traj.times()[1..n - 1].to_vec(),
        values,
        (1, n - 2),
    ))
}

/// Derivative filter weights for a centered least-squares polynomial fit.
///
/// On a uniform grid the fit is a fixed linear filter: fitting a degree-m
/// polynomial to the window and differentiating it at the center equals a
/// dot product with the second row of the Vandermonde pseudo-inverse.
fn savitzky_golay_weights(window: usize, degree: usize, dt: f64) -> Vec<f64> {
    let half = (window / 2) as isize;
    let mut vand = DMatrix::zeros(window, degree + 1);
    for (r, s) in (-half..=half).enumerate() {
        let x = s as f64 * dt;
        let mut p = 1.0;
        for c in 0..=degree {
            vand[(r, c)] = p;
            p *= x;
        }
    }
    let gram = vand.transpose() * &vand;
    let rhs = vand.transpose();
    // gram is SPD for window > degree; Cholesky cannot fail here
    let sol = gram
        .cholesky()
        .expect("Savitzky-Golay normal equations must be SPD")
        .solve(&rhs);
    sol.row(1).iter().copied().collect()
}

/// Local polynomial (Savitzky-Golay) derivative estimate.
///
/// For each sample with a full centered window, fit a least-squares
/// polynomial of `degree` per dimension and evaluate its analytic derivative
/// at the center. `(window-1)/2` samples are dropped at each end.
pub fn polynomial_derivative(
    traj: &Trajectory,
    window: usize,
    degree: usize,
) -> Result<DerivativeSeries, DifferentiationError> {
    if window % 2 == 0 {
        return Err(DifferentiationError::InvalidConfig(format!(
            "window must be odd, got {window}"
        )));
    }
    if degree == 0 || degree >= window {
        return Err(DifferentiationError::InvalidConfig(format!(
            "degree must satisfy 1 <= degree < window, got degree={degree}, window={window}"
        )));
    }
    let n = traj.len();
    if window > n {
        return Err(DifferentiationError::InsufficientData(format!(
            "window {window} exceeds trajectory length {n}"
        )));
    }
    let d = traj.dim();
    let half = window / 2;
    let weights = savitzky_golay_weights(window, degree, traj.dt());
    let rows = n - 2 * half;
    let mut values = DMatrix::zeros(rows, d);
    for i in half..n - half {
        for j in 0..d {
            let mut acc = 0.0;
            for (r, w) in weights.iter().enumerate() {
                acc += w * traj.values()[(i - half + r, j)];
            }
            values[(i - half, j)] = acc;
        }
    }
    Ok(DerivativeSeries::new(
        traj.times()[half..n - half].to_vec(),
        values,
        (half, n - half - 1),
    ))
}

/// Componentwise statistics of est − truth over the overlap of the two
/// valid ranges.
pub fn error_stats(
    est: &DerivativeSeries,
    truth: &DerivativeSeries,
) -> Result<ApproxErrorStats, DifferentiationError> {
    if est.dim() != truth.dim() {
        return Err(DifferentiationError::InvalidConfig(format!(
            "dimension mismatch: {} vs {}",
            est.dim(),
            truth.dim()
        )));
    }
    let first = est.valid_range.0.max(truth.valid_range.0);
    let last = est.valid_range.1.min(truth.valid_range.1);
    if first > last {
        return Err(DifferentiationError::InsufficientData(
            "valid ranges do not overlap".into(),
        ));
    }
    let d = est.dim();
    let count = (last - first + 1) as f64;
    let mut max_abs = vec![0.0f64; d];
    let mut mean = vec![0.0f64; d];
    let mut std = vec![0.0f64; d];
    for j in 0..d {
        let mut sum = 0.0;
        for i in first..=last {
            let e = est.values[(i - est.valid_range.0, j)]
                - truth.values[(i - truth.valid_range.0, j)];
            max_abs[j] = max_abs[j].max(e.abs());
            sum += e;
        }
        mean[j] = sum / count;
        let mut ss = 0.0;
        for i in first..=last {
            let e = est.values[(i - est.valid_range.0, j)]
                - truth.values[(i - truth.valid_range.0, j)];
            ss += (e - mean[j]) * (e - mean[j]);
        }
        std[j] = (ss / count).sqrt();
    }
    Ok(ApproxErrorStats { max_abs, mean, std })
}
