//! Sparse regression under two residual objectives.
//!
//! Given a dictionary Θ and a derivative target y, both solvers look for a
//! sparse ξ with y ≈ Θξ:
//!
//! * [`stlsq`] minimizes the L2 residual with hard thresholding — the
//!   standard SINDy iteration of least-squares fits alternated with zeroing
//!   coefficients below a magnitude threshold.
//! * [`linf_sparse_solve`] minimizes `‖y − Θξ‖∞ + λ‖ξ‖₀`. The support
//!   search is delegated to particle swarm optimization over a
//!   magnitude-gated continuous encoding; the winning support is then
//!   re-fit exactly by [`linf_fit_fixed_support`], a self-contained
//!   Chebyshev (minimax) linear program solved with an exchange algorithm,
//!   so reported coefficients are minimax-optimal for their support.
//!
//! [`exhaustive_sparse_oracle`] enumerates every support up to a size cap
//! and solves each inner problem exactly, providing ground truth on small
//! instances for either norm.

use crate::pso::{pso_minimize, PsoConfig, PsoError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::fmt;
use thiserror::Error;

/// Hard cap on the number of supports the oracle will enumerate.
pub const ORACLE_ENUMERATION_LIMIT: usize = 200_000;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("oracle would enumerate {supports} supports, above the limit {limit}")]
    EnumerationTooLarge { supports: usize, limit: usize },
    #[error("degenerate linear program: {0}")]
    DegenerateLp(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pso(#[from] PsoError),
}

/// Which residual norm an objective value was computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    L2,
    Linf,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::L2 => write!(f, "L2"),
            ObjectiveKind::Linf => write!(f, "Linf"),
        }
    }
}

/// Solver bookkeeping attached to every fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    /// Everything was thresholded away / the gate closed on all terms.
    pub zero_model: bool,
    pub rank_deficient: bool,
    pub pso_evaluations: usize,
    pub pso_restarts: usize,
    /// STLSQ hard threshold, when applicable.
    pub threshold: Option<f64>,
    /// Whether the PSO search ran on max-abs scaled columns.
    pub column_scaled: bool,
}

/// One state dimension's sparse fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoefficients {
    /// Dense coefficient vector, length M; zero outside the support.
    pub xi: DVector<f64>,
    /// Sorted indices of the nonzero coefficients.
    pub support: Vec<usize>,
    /// Residual norm plus λ times the support size.
    pub objective_value: f64,
    pub objective_kind: ObjectiveKind,
    pub lambda: f64,
    pub diagnostics: SolverDiagnostics,
}

impl SparseCoefficients {
    fn assemble(
        xi: DVector<f64>,
        objective_kind: ObjectiveKind,
        lambda: f64,
        theta: &DMatrix<f64>,
        y: &DVector<f64>,
        diagnostics: SolverDiagnostics,
    ) -> Self {
        let support: Vec<usize> = (0..xi.len()).filter(|&j| xi[j] != 0.0).collect();
        let r = y - theta * &xi;
        let norm = match objective_kind {
            ObjectiveKind::L2 => r.norm(),
            ObjectiveKind::Linf => r.amax(),
        };
        SparseCoefficients {
            objective_value: norm + lambda * support.len() as f64,
            xi,
            support,
            objective_kind,
            lambda,
            diagnostics,
        }
    }
}

/// Signed residual vector r = y − Θξ; norms are derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub r: DVector<f64>,
}

impl Residual {
    pub fn linf(&self) -> f64 {
        self.r.amax()
    }

    pub fn l2(&self) -> f64 {
        self.r.norm()
    }
}

/// r = y − Θξ.
pub fn residual(
    theta: &DMatrix<f64>,
    xi: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<Residual, RegressionError> {
    if theta.nrows() != y.len() || theta.ncols() != xi.len() {
        return Err(RegressionError::ShapeMismatch(format!(
            "theta is {}x{}, xi has {}, y has {}",
            theta.nrows(),
            theta.ncols(),
            xi.len(),
            y.len()
        )));
    }
    Ok(Residual { r: y - theta * xi })
}

fn check_regression_shapes(theta: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), RegressionError> {
    if theta.nrows() == 0 || theta.ncols() == 0 {
        return Err(RegressionError::ShapeMismatch(
            "theta must be non-empty".into(),
        ));
    }
    if theta.nrows() != y.len() {
        return Err(RegressionError::ShapeMismatch(format!(
            "theta has {} rows but y has {} entries",
            theta.nrows(),
            y.len()
        )));
    }
    Ok(())
}

fn select_columns(theta: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut sub = DMatrix::zeros(theta.nrows(), cols.len());
    for (sj, &j) in cols.iter().enumerate() {
        sub.set_column(sj, &theta.column(j));
    }
    sub
}

/// Minimum-norm least-squares solution via SVD.
pub fn least_squares(theta: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    least_squares_with_rank(theta, y).0
}

pub(crate) fn least_squares_with_rank(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
) -> (DVector<f64>, usize) {
    let svd = theta.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    let eps = f64::EPSILON * theta.nrows().max(theta.ncols()) as f64 * sigma_max.max(f64::MIN_POSITIVE);
    let rank = svd.rank(eps);
    let sol = svd.solve(y, eps).expect("SVD solve cannot fail with computed factors");
    (sol.column(0).into_owned(), rank)
}

/// Sequentially-thresholded least squares (the standard SINDy solver).
///
/// Alternates least squares on the active set with zeroing of coefficients
/// of magnitude below `threshold` until the support stabilizes or
/// `max_iters` is reached. Every returned nonzero has |ξj| ≥ threshold.
/// When everything is thresholded away the zero model is returned with the
/// `zero_model` diagnostic set rather than an error.
pub fn stlsq(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
    threshold: f64,
    max_iters: usize,
) -> Result<SparseCoefficients, RegressionError> {
    check_regression_shapes(theta, y)?;
    if threshold <= 0.0 || !threshold.is_finite() {
        return Err(RegressionError::InvalidConfig(format!(
            "threshold must be positive and finite, got {threshold}"
        )));
    }
    if max_iters == 0 {
        return Err(RegressionError::InvalidConfig("max_iters must be >= 1".into()));
    }
    let m = theta.ncols();
    let mut active: Vec<usize> = (0..m).collect();
    let mut rank_deficient = false;
    let mut iterations = 0;
    let mut diagnostics = SolverDiagnostics {
        threshold: Some(threshold),
        ..SolverDiagnostics::default()
    };

    let xi = loop {
        iterations += 1;
        let sub = select_columns(theta, &active);
        let (c, rank) = least_squares_with_rank(&sub, y);
        if rank < active.len().min(theta.nrows()) {
            rank_deficient = true;
        }
        let keep: Vec<usize> = (0..active.len())
            .filter(|&i| c[i].abs() >= threshold)
            .collect();

        if keep.len() == active.len() || keep.is_empty() || iterations >= max_iters {
            let mut xi = DVector::zeros(m);
            for &i in &keep {
                xi[active[i]] = c[i];
            }
            diagnostics.zero_model = keep.is_empty();
            break xi;
        }
        active = keep.iter().map(|&i| active[i]).collect();
    };

    diagnostics.iterations = iterations;
    diagnostics.rank_deficient = rank_deficient;
    Ok(SparseCoefficients::assemble(
        xi,
        ObjectiveKind::L2,
        0.0,
        theta,
        y,
        diagnostics,
    ))
}

/// Result of an exact minimax fit on a fixed support.
#[derive(Debug, Clone, PartialEq)]
pub struct LinfFit {
    pub coefficients: DVector<f64>,
    pub minimax_residual: f64,
    pub rank_deficient: bool,
    pub iterations: usize,
}

/// Pivoted modified Gram-Schmidt over a set of vectors.
///
/// Returns indices of a numerically independent subset in pivot order,
/// stopping at `max_count` vectors or when the best remaining residual norm
/// drops below `tol_rel` times the largest initial norm.
fn greedy_pivots(vectors: &[DVector<f64>], max_count: usize, tol_rel: f64) -> Vec<usize> {
    let mut residuals: Vec<DVector<f64>> = vectors.to_vec();
    let mut norms: Vec<f64> = residuals.iter().map(|v| v.norm()).collect();
    let scale = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut picked = Vec::new();
    if scale == 0.0 {
        return picked;
    }
    let cutoff = tol_rel * scale;
    let mut available = vec![true; vectors.len()];
    while picked.len() < max_count {
        let mut best: Option<usize> = None;
        let mut best_norm = cutoff;
        for (i, &avail) in available.iter().enumerate() {
            if avail && norms[i] > best_norm {
                best = Some(i);
                best_norm = norms[i];
            }
        }
        let Some(b) = best else { break };
        picked.push(b);
        available[b] = false;
        let q = residuals[b].clone() / norms[b];
        for (i, &avail) in available.iter().enumerate() {
            if avail {
                let proj = q.dot(&residuals[i]);
                residuals[i] -= &q * proj;
                norms[i] = residuals[i].norm();
            }
        }
    }
    picked
}

/// Chebyshev solution of an overdetermined linear system.
///
/// Minimizes `max_i |y_i − (Θc)_i|` exactly, as the linear program
/// `min t : −t ≤ y − Θc ≤ t`, via the classical exchange algorithm (a dual
/// simplex whose basis is a reference set of k+1 rows held at the levelled
/// residual ±t). Rank-deficient inputs are solved on an independent column
/// subset, zeros elsewhere, and flagged.
pub fn linf_fit_fixed_support(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<LinfFit, RegressionError> {
    check_regression_shapes(theta, y)?;
    let (n, k) = theta.shape();
    if n < k {
        return Err(RegressionError::ShapeMismatch(format!(
            "need at least as many rows as columns, got {n}x{k}"
        )));
    }

    let columns: Vec<DVector<f64>> = (0..k).map(|j| theta.column(j).into_owned()).collect();
    let independent = greedy_pivots(&columns, k, 1e-12);
    if independent.len() < k {
        let mut cols = independent;
        cols.sort_unstable();
        if cols.is_empty() {
            // zero matrix: best fit is c = 0
            return Ok(LinfFit {
                coefficients: DVector::zeros(k),
                minimax_residual: y.amax(),
                rank_deficient: true,
                iterations: 0,
            });
        }
        let sub = select_columns(theta, &cols);
        let inner = chebyshev_exchange(&sub, y)?;
        let mut coefficients = DVector::zeros(k);
        for (i, &j) in cols.iter().enumerate() {
            coefficients[j] = inner.coefficients[i];
        }
        return Ok(LinfFit {
            coefficients,
            minimax_residual: inner.minimax_residual,
            rank_deficient: true,
            iterations: inner.iterations,
        });
    }

    chebyshev_exchange(theta, y)
}

/// Exchange algorithm on a full-column-rank system.
///
/// Dual-simplex view: the dual of the minimax LP has one column per signed
/// row (u_i = [θ_i; 1] at cost −y_i, v_i = [−θ_i; 1] at cost +y_i) and k+1
/// equality constraints. A basis is k+1 signed rows; the simplex multipliers
/// π = (p, q) recover the primal solution as c = −p, t = q, and the reduced
/// costs reduce to |y + Θp| − q, so pricing is "find the row whose residual
/// exceeds the current levelled value".
fn chebyshev_exchange(theta: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinfFit, RegressionError> {
    let (n, k) = theta.shape();

    if n == k {
        // interpolation: residual is zero up to rounding
        let lu = theta.clone().lu();
        if let Some(c) = lu.solve(y) {
            let r = y - theta * &c;
            return Ok(LinfFit {
                minimax_residual: r.amax(),
                coefficients: c,
                rank_deficient: false,
                iterations: 0,
            });
        }
        return Err(RegressionError::DegenerateLp(
            "square system reported full rank but LU failed".into(),
        ));
    }

    let rows: Vec<DVector<f64>> = (0..n).map(|i| theta.row(i).transpose()).collect();
    let base = greedy_pivots(&rows, k, 0.0);
    if base.len() < k {
        return Err(RegressionError::DegenerateLp(
            "row space collapsed during reference selection".into(),
        ));
    }

    // warm start: complete the reference with the worst row under the LS fit
    let ls = least_squares(theta, y);
    let r_ls = y - theta * &ls;
    let mut extra = None;
    let mut extra_val = -1.0;
    for i in 0..n {
        if !base.contains(&i) && r_ls[i].abs() > extra_val {
            extra = Some(i);
            extra_val = r_ls[i].abs();
        }
    }
    let extra = extra.expect("n > k guarantees a row outside the base");

    // null vector of the reference rows: Θ_baseᵀ w_base = θ_extraᵀ, w_extra = −1
    let mut base_t = DMatrix::zeros(k, k);
    for (j, &i) in base.iter().enumerate() {
        base_t.set_column(j, &rows[i]);
    }
    let w_base = base_t
        .lu()
        .solve(&rows[extra])
        .ok_or_else(|| RegressionError::DegenerateLp("singular reference system".into()))?;

    // basis entries: (row index, sign); sign +1 stands for u_i, −1 for v_i
    let mut basis: Vec<(usize, f64)> = base
        .iter()
        .enumerate()
        .map(|(j, &i)| (i, if w_base[j] >= 0.0 { 1.0 } else { -1.0 }))
        .collect();
    basis.push((extra, -1.0));

    let m = k + 1;
    let y_scale = y.amax().max(1.0);
    let tol_opt = 1e-9 * y_scale;
    let tol_piv = 1e-12;
    let dantzig_limit = 500 + 10 * m;
    let hard_limit = 20_000 + 10 * n;

    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > hard_limit {
            return Err(RegressionError::DegenerateLp(format!(
                "exchange algorithm failed to converge within {hard_limit} pivots"
            )));
        }

        let mut b_mat = DMatrix::zeros(m, m);
        for (j, &(i, s)) in basis.iter().enumerate() {
            for c in 0..k {
                b_mat[(c, j)] = s * theta[(i, c)];
            }
            b_mat[(k, j)] = 1.0;
        }
        let cost_b = DVector::from_fn(m, |j, _| -basis[j].1 * y[basis[j].0]);

        let lu_bt = b_mat.transpose().lu();
        let pi = lu_bt
            .solve(&cost_b)
            .ok_or_else(|| RegressionError::DegenerateLp("singular basis (transpose)".into()))?;
        let p = pi.rows(0, k).into_owned();
        let q = pi[k];

        // pricing: z_i = y_i + θ_i·p is the residual of c = −p at row i
        let z = y + theta * &p;
        let use_bland = iterations > dantzig_limit;
        let mut entering: Option<(usize, f64)> = None;
        if use_bland {
            // Bland: smallest variable index (u_i before v_i) with positive
            // reduced cost — guarantees termination
            'bland: for i in 0..n {
                for s in [1.0, -1.0] {
                    let rc = -s * z[i] - q;
                    if rc > tol_opt {
                        entering = Some((i, s));
                        break 'bland;
                    }
                }
            }
        } else {
            let mut worst = tol_opt;
            for i in 0..n {
                let excess = z[i].abs() - q;
                if excess > worst {
                    worst = excess;
                    entering = Some((i, if z[i] > 0.0 { -1.0 } else { 1.0 }));
                }
            }
        }

        let Some((e_row, e_sign)) = entering else {
            // optimal: recover the primal solution
            let coefficients = -p;
            return Ok(LinfFit {
                coefficients,
                minimax_residual: q.max(0.0),
                rank_deficient: false,
                iterations,
            });
        };

        let lu_b = b_mat.lu();
        let mut a_col = DVector::zeros(m);
        for c in 0..k {
            a_col[c] = e_sign * theta[(e_row, c)];
        }
        a_col[k] = 1.0;
        let direction = lu_b
            .solve(&a_col)
            .ok_or_else(|| RegressionError::DegenerateLp("singular basis".into()))?;
        let rhs = DVector::from_fn(m, |j, _| if j == k { 1.0 } else { 0.0 });
        let x_b = lu_b
            .solve(&rhs)
            .ok_or_else(|| RegressionError::DegenerateLp("singular basis".into()))?;

        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for j in 0..m {
            if direction[j] > tol_piv {
                let ratio = x_b[j].max(0.0) / direction[j];
                let better = ratio < best_ratio - 1e-15
                    || (ratio <= best_ratio + 1e-15
                        && leaving.is_some_and(|l| {
                            // prefer the smaller variable index on ties
                            let (li, ls) = basis[l];
                            let (ji, js) = basis[j];
                            (ji, js < 0.0) < (li, ls < 0.0)
                        }));
                if better {
                    best_ratio = ratio.max(0.0);
                    leaving = Some(j);
                }
            }
        }
        let Some(l) = leaving else {
            return Err(RegressionError::DegenerateLp(
                "unbounded pivot direction in minimax fit".into(),
            ));
        };
        basis[l] = (e_row, e_sign);
    }
}

/// Minimize `‖y − Θξ‖∞ + λ‖ξ‖₀` with PSO over magnitude-gated supports.
///
/// Each particle carries M real values in a max-abs column-scaled space; a
/// coefficient is active when its magnitude exceeds 1e-4 of its coordinate's
/// search range, and fitness is the minimax residual of the active terms
/// plus λ times the active count. The best support found is polished with
/// [`linf_fit_fixed_support`] before reporting, and scaled coefficients are
/// mapped back to the raw columns. Deterministic given `pso.seed`.
///
/// If `pso.bounds` has exactly M entries it is used as the (scaled-space)
/// search box; otherwise the box is ±2·max(1, ‖ξ_LS‖∞) per coordinate,
/// from the least-squares solution on the scaled columns.
/// Column-scaled search space for the magnitude-gated PSO encoding.
///
/// Coordinates live in max-abs scaled column space (so every column has
/// unit peak magnitude and the landscape is isotropic-ish). Each
/// coordinate's box is ±2·max(1, |ξ_LS|) around zero — wide enough to hold
/// the least-squares value with slack, tight where least squares already
/// says the term is small. The activation floor is 1e-4 of each
/// coordinate's range. Warm starts: the scaled least-squares solution and
/// the zero vector.
#[derive(Debug, Clone)]
pub struct LinfSearchSpace {
    pub theta_scaled: DMatrix<f64>,
    pub scales: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub floors: Vec<f64>,
    pub guesses: Vec<Vec<f64>>,
}

impl LinfSearchSpace {
    pub fn build(theta: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let (n, m) = theta.shape();
        let mut scales = vec![1.0f64; m];
        let mut theta_scaled = theta.clone();
        for j in 0..m {
            let cmax = theta.column(j).amax();
            if cmax > 0.0 {
                scales[j] = cmax;
                for i in 0..n {
                    theta_scaled[(i, j)] /= cmax;
                }
            }
        }
        let xi_ls = least_squares(&theta_scaled, y);
        let bounds: Vec<(f64, f64)> = (0..m)
            .map(|j| {
                let half = 2.0 * xi_ls[j].abs().max(1.0);
                (-half, half)
            })
            .collect();
        let floors: Vec<f64> = bounds.iter().map(|(lo, hi)| 1e-4 * (hi - lo)).collect();

        // warm-start ladder: keep the k largest least-squares coefficients,
        // zero the rest, for k = 0..=m. Deactivating a coordinate later
        // means crossing a fitness barrier (a spurious term pays its
        // sparsity cost only after it stops shaving the residual), so the
        // swarm gets sparse candidates up front instead.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| xi_ls[b].abs().partial_cmp(&xi_ls[a].abs()).unwrap());
        let mut guesses: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut ladder = vec![0.0; m];
        guesses.push(ladder.clone());
        for &j in &order {
            ladder[j] = xi_ls[j];
            guesses.push(ladder.clone());
        }
        LinfSearchSpace {
            theta_scaled,
            scales,
            bounds,
            floors,
            guesses,
        }
    }

    /// `‖y − Θ'v_active‖∞ + λ·|active|` with the magnitude gate applied.
    pub fn fitness(&self, v: &[f64], y: &DVector<f64>, lambda: f64, scratch: &mut DVector<f64>) -> f64 {
        scratch.copy_from(y);
        let mut active = 0usize;
        for (j, &vj) in v.iter().enumerate() {
            if vj.abs() > self.floors[j] {
                active += 1;
                for i in 0..scratch.len() {
                    scratch[i] -= vj * self.theta_scaled[(i, j)];
                }
            }
        }
        scratch.amax() + lambda * active as f64
    }

    pub fn active_set(&self, v: &[f64]) -> Vec<usize> {
        (0..v.len()).filter(|&j| v[j].abs() > self.floors[j]).collect()
    }
}

pub fn linf_sparse_solve(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    pso: &PsoConfig,
) -> Result<SparseCoefficients, RegressionError> {
    check_regression_shapes(theta, y)?;
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(RegressionError::InvalidConfig(format!(
            "lambda must be nonnegative and finite, got {lambda}"
        )));
    }
    let (n, m) = theta.shape();

    let space = LinfSearchSpace::build(theta, y);
    let mut config = pso.clone();
    if pso.bounds.len() != m {
        config.bounds = space.bounds.clone();
    }
    if config.initial_guesses.is_empty() {
        config.initial_guesses = space.guesses.clone();
        // sparsest rungs first; drop the densest if the swarm is small
        config.initial_guesses.truncate(config.swarm_size / 2);
    }

    let scratch = RefCell::new(DVector::zeros(n));
    let fitness = |v: &[f64]| -> f64 { space.fitness(v, y, lambda, &mut scratch.borrow_mut()) };

    let (best, _, pso_diag) = pso_minimize(fitness, &config)?;
    let support = space.active_set(&best);

    let mut diagnostics = SolverDiagnostics {
        iterations: pso_diag.history.len(),
        pso_evaluations: pso_diag.evaluations,
        pso_restarts: pso_diag.restarts_run,
        column_scaled: true,
        ..SolverDiagnostics::default()
    };

    let xi = if support.is_empty() {
        diagnostics.zero_model = true;
        DVector::zeros(m)
    } else {
        let sub = select_columns(theta, &support);
        let fit = linf_fit_fixed_support(&sub, y)?;
        diagnostics.rank_deficient = fit.rank_deficient;
        let mut xi = DVector::zeros(m);
        for (i, &j) in support.iter().enumerate() {
            xi[j] = fit.coefficients[i];
        }
        xi
    };

    Ok(SparseCoefficients::assemble(
        xi,
        ObjectiveKind::Linf,
        lambda,
        theta,
        y,
        diagnostics,
    ))
}

/// One term of a serialized fit: dictionary column, its label, its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub index: usize,
    pub label: String,
    pub coefficient: f64,
}

/// One state dimension's fit in the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub dimension: usize,
    pub variable: String,
    pub objective_kind: ObjectiveKind,
    pub lambda: f64,
    pub objective_value: f64,
    pub terms: Vec<TermEntry>,
    pub diagnostics: SolverDiagnostics,
}

/// On-disk form of an identified model: per-dimension sparse coefficient
/// lists with term labels, plus enough dictionary metadata to rebuild the
/// model's right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientsDocument {
    pub system_dimension: usize,
    pub dictionary_degree: usize,
    pub term_count: usize,
    pub var_names: Vec<String>,
    pub fits: Vec<DimensionFit>,
}

impl CoefficientsDocument {
    pub fn new(
        coefficients: &[SparseCoefficients],
        labels: &[String],
        var_names: Vec<String>,
        dictionary_degree: usize,
    ) -> Self {
        let fits = coefficients
            .iter()
            .enumerate()
            .map(|(k, fit)| DimensionFit {
                dimension: k,
                variable: var_names.get(k).cloned().unwrap_or_else(|| format!("x{}", k + 1)),
                objective_kind: fit.objective_kind,
                lambda: fit.lambda,
                objective_value: fit.objective_value,
                terms: fit
                    .support
                    .iter()
                    .map(|&j| TermEntry {
                        index: j,
                        label: labels[j].clone(),
                        coefficient: fit.xi[j],
                    })
                    .collect(),
                diagnostics: fit.diagnostics.clone(),
            })
            .collect();
        CoefficientsDocument {
            system_dimension: coefficients.len(),
            dictionary_degree,
            term_count: labels.len(),
            var_names,
            fits,
        }
    }

    /// Dense coefficient vectors (length `term_count`) per dimension.
    pub fn coefficient_vectors(&self) -> Vec<DVector<f64>> {
        self.fits
            .iter()
            .map(|f| {
                let mut xi = DVector::zeros(self.term_count);
                for t in &f.terms {
                    xi[t.index] = t.coefficient;
                }
                xi
            })
            .collect()
    }

    /// Human-readable equations, one per state dimension.
    pub fn equations(&self) -> Vec<String> {
        self.fits
            .iter()
            .map(|f| {
                let lhs = format!("d{}/dt", f.variable);
                if f.terms.is_empty() {
                    return format!("{lhs} = 0");
                }
                let mut rhs = String::new();
                for (i, t) in f.terms.iter().enumerate() {
                    let mag = format_coefficient(t.coefficient.abs());
                    let sign = if t.coefficient < 0.0 { "-" } else { "+" };
                    if i == 0 {
                        if t.coefficient < 0.0 {
                            rhs.push_str("-");
                        }
                    } else {
                        rhs.push_str(&format!(" {sign} "));
                    }
                    if t.label == "1" {
                        rhs.push_str(&mag);
                    } else {
                        rhs.push_str(&format!("{mag}*{}", t.label));
                    }
                }
                format!("{lhs} = {rhs}")
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

fn format_coefficient(v: f64) -> String {
    let s = format!("{v:.6}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: usize = 1;
    for i in 1..=k {
        c = c * (n - k + i) / i;
    }
    c
}

/// Advance `combo` to the next k-combination of 0..m in lexicographic order.
fn next_combination(combo: &mut [usize], m: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < m - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact solver for small instances: enumerate every support of size up to
/// `max_support`, solve each inner problem exactly (least squares for L2,
/// the Chebyshev LP for L∞), and return the global optimum of
/// residual-norm + λ·|support|.
///
/// Supports are visited in (size ascending, lexicographic) order and the
/// incumbent is replaced only on strict improvement, so ties resolve to the
/// smaller, lexicographically first support. Refuses instances whose
/// enumeration would exceed [`ORACLE_ENUMERATION_LIMIT`].
pub fn exhaustive_sparse_oracle(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    norm: ObjectiveKind,
    max_support: usize,
) -> Result<SparseCoefficients, RegressionError> {
    check_regression_shapes(theta, y)?;
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(RegressionError::InvalidConfig(format!(
            "lambda must be nonnegative and finite, got {lambda}"
        )));
    }
    let m = theta.ncols();
    let cap = max_support.min(m).min(theta.nrows());
    let total: usize = (0..=cap).map(|s| binomial(m, s)).sum();
    if total > ORACLE_ENUMERATION_LIMIT {
        return Err(RegressionError::EnumerationTooLarge {
            supports: total,
            limit: ORACLE_ENUMERATION_LIMIT,
        });
    }

    let empty_norm = match norm {
        ObjectiveKind::L2 => y.norm(),
        ObjectiveKind::Linf => y.amax(),
    };
    let mut best_xi = DVector::zeros(m);
    let mut best_obj = empty_norm;
    let mut best_rank_deficient = false;
    let mut inner_solves = 0usize;

    for size in 1..=cap {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let sub = select_columns(theta, &combo);
            let (coeffs, residual_norm, rank_deficient) = match norm {
                ObjectiveKind::L2 => {
                    let (c, rank) = least_squares_with_rank(&sub, y);
                    let r = y - &sub * &c;
                    (c, r.norm(), rank < size)
                }
                ObjectiveKind::Linf => {
                    let fit = linf_fit_fixed_support(&sub, y)?;
                    (fit.coefficients, fit.minimax_residual, fit.rank_deficient)
                }
            };
            inner_solves += 1;
            let nonzeros = coeffs.iter().filter(|&&c| c != 0.0).count();
            let obj = residual_norm + lambda * nonzeros as f64;
            if obj < best_obj {
                best_obj = obj;
                best_xi = DVector::zeros(m);
                for (i, &j) in combo.iter().enumerate() {
                    best_xi[j] = coeffs[i];
                }
                best_rank_deficient = rank_deficient;
            }
            if !next_combination(&mut combo, m) {
                break;
            }
        }
    }

    let diagnostics = SolverDiagnostics {
        iterations: inner_solves,
        zero_model: best_xi.iter().all(|&v| v == 0.0),
        rank_deficient: best_rank_deficient,
        ..SolverDiagnostics::default()
    };
    Ok(SparseCoefficients::assemble(
        best_xi,
        norm,
        lambda,
        theta,
        y,
        diagnostics,
    ))
}
