//! Browser demo: interactive Lorenz identification in the browser.
//!
//! Exposes three operations to JavaScript, each taking and returning JSON
//! strings so the page needs no framework or generated bindings beyond
//! wasm-bindgen's glue:
//!
//! * [`identify`] — simulate Lorenz, estimate derivatives, fit a sparse
//!   model under the chosen objective and return the identified equations
//!   plus truth/reconstruction curves for plotting.
//! * [`minimax_fit`] — fit a polynomial to user-placed points under both
//!   L2 and L∞ and return coefficients and residuals, showing
//!   equioscillation.
//! * [`pso_trace`] — convergence history of the swarm on one identification
//!   target.
//!
//! Build with `wasm-pack build --target web crates/demo` (see the README);
//! the same functions compile natively for unit testing.

use serde::{Deserialize, Serialize};
use sindy_linf::dictionary::{build_dictionary, default_var_names, term_label};
use sindy_linf::differentiation::{central_difference, measured_derivative, polynomial_derivative};
use sindy_linf::dynamics::{add_state_noise, integrate, NoiseSpec, SystemSpec};
use sindy_linf::metrics::{error_metrics, reconstruct_saturating};
use sindy_linf::pso::PsoConfig;
use sindy_linf::sparse_regression::{
    least_squares, linf_fit_fixed_support, linf_sparse_solve, stlsq, CoefficientsDocument,
    LinfSearchSpace,
};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
struct IdentifyRequest {
    /// "measured", "central_difference" or "polynomial"
    derivative_source: String,
    /// Noise level; applied to derivatives for "measured", to states otherwise.
    sigma: f64,
    dt: f64,
    t_end: f64,
    /// "l2" or "linf"
    objective: String,
    /// STLSQ threshold (L2) — 0 picks the default 0.1.
    threshold: f64,
    /// L∞ sparsity weight — 0 picks the default 0.05·‖y‖∞.
    lambda: f64,
    seed: u64,
    /// Swarm iteration budget for the demo (kept small for responsiveness).
    pso_iters: usize,
}

#[derive(Debug, Clone, Serialize)]
struct CurveSet {
    times: Vec<f64>,
    truth: Vec<Vec<f64>>,
    recon: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
struct IdentifyResponse {
    equations: Vec<String>,
    rmse: Vec<f64>,
    diverged: bool,
    curves: CurveSet,
    document: CoefficientsDocument,
}

fn lorenz() -> SystemSpec {
    SystemSpec::lorenz(10.0, 28.0, 8.0 / 3.0)
}

fn identify_impl(req: &IdentifyRequest) -> Result<IdentifyResponse, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    if !(req.dt > 0.0) || !(req.t_end >= req.dt) {
        return Err("need dt > 0 and t_end >= dt".into());
    }
    if req.t_end / req.dt > 200_000.0 {
        return Err("too many samples for the demo; raise dt or lower t_end".into());
    }
    let system = lorenz();
    let truth_ident = integrate(&system, &[-8.0, 8.0, 27.0], req.dt, req.t_end)
        .map_err(|e| err(&e))?;

    let (states, deriv) = match req.derivative_source.as_str() {
        "measured" => {
            let d = measured_derivative(&system, &truth_ident, &NoiseSpec::new(req.sigma, req.seed));
            (truth_ident.clone(), d)
        }
        "central_difference" => {
            let noisy = add_state_noise(&truth_ident, &NoiseSpec::new(req.sigma, req.seed));
            let d = central_difference(&noisy).map_err(|e| err(&e))?;
            (noisy, d)
        }
        "polynomial" => {
            let noisy = add_state_noise(&truth_ident, &NoiseSpec::new(req.sigma, req.seed));
            let d = polynomial_derivative(&noisy, 7, 3).map_err(|e| err(&e))?;
            (noisy, d)
        }
        other => return Err(format!("unknown derivative source `{other}`")),
    };

    let (first, last) = deriv.valid_range();
    let trimmed = states.slice(first, last);
    let dict = build_dictionary(trimmed.values(), 2).map_err(|e| err(&e))?;

    let mut fits = Vec::with_capacity(3);
    for k in 0..3 {
        let y = deriv.values().column(k).into_owned();
        let fit = match req.objective.as_str() {
            "l2" => {
                let threshold = if req.threshold > 0.0 { req.threshold } else { 0.1 };
                stlsq(&dict.matrix, &y, threshold, 25).map_err(|e| err(&e))?
            }
            "linf" => {
                let lambda = if req.lambda > 0.0 {
                    req.lambda
                } else {
                    0.05 * y.amax()
                };
                let mut pso = PsoConfig::new(Vec::new()).with_seed(req.seed + 16 * k as u64);
                pso.max_iters = req.pso_iters.clamp(50, 1000);
                pso.restarts = 1;
                linf_sparse_solve(&dict.matrix, &y, lambda, &pso).map_err(|e| err(&e))?
            }
            other => return Err(format!("unknown objective `{other}`")),
        };
        fits.push(fit);
    }

    let names = default_var_names(3);
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let labels: Vec<String> = dict.terms.iter().map(|t| term_label(t, &name_refs)).collect();
    let document = CoefficientsDocument::new(&fits, &labels, names, 2);

    let recon_x0 = [1.0, 1.0, 1.0];
    let truth_recon = integrate(&system, &recon_x0, req.dt, req.t_end).map_err(|e| err(&e))?;
    let (recon, diverged) =
        reconstruct_saturating(&fits, &dict.terms, &recon_x0, req.dt, req.t_end)
            .map_err(|e| err(&e))?;
    let metrics = error_metrics(&truth_recon, &recon).map_err(|e| err(&e))?;

    // decimate curves to keep the JSON payload small
    let n = truth_recon.len();
    let stride = (n / 2000).max(1);
    let mut times = Vec::new();
    let mut truth_rows = Vec::new();
    let mut recon_rows = Vec::new();
    for i in (0..n).step_by(stride) {
        times.push(truth_recon.times()[i]);
        truth_rows.push(truth_recon.row(i));
        recon_rows.push(recon.row(i));
    }

    Ok(IdentifyResponse {
        equations: document.equations(),
        rmse: metrics.rmse,
        diverged,
        curves: CurveSet {
            times,
            truth: truth_rows,
            recon: recon_rows,
        },
        document,
    })
}

fn respond<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(value) => serde_json::json!({ "ok": serde_json::to_value(value).unwrap() }).to_string(),
        Err(message) => serde_json::json!({ "error": message }).to_string(),
    }
}

/// Run the full identification pipeline on Lorenz. Takes and returns JSON.
#[wasm_bindgen]
pub fn identify(request_json: &str) -> String {
    let req: Result<IdentifyRequest, _> = serde_json::from_str(request_json);
    match req {
        Ok(req) => respond(identify_impl(&req)),
        Err(e) => respond::<()>(Err(format!("bad request: {e}"))),
    }
}

#[derive(Debug, Clone, Deserialize)]
struct MinimaxFitRequest {
    xs: Vec<f64>,
    ys: Vec<f64>,
    degree: usize,
}

#[derive(Debug, Clone, Serialize)]
struct FitLine {
    coefficients: Vec<f64>,
    residuals: Vec<f64>,
    max_abs_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
struct MinimaxFitResponse {
    l2: FitLine,
    linf: FitLine,
    /// Indices of points whose |residual| is within 1e-6 of the minimax
    /// level — the equioscillation set.
    levelled_points: Vec<usize>,
}

fn minimax_fit_impl(req: &MinimaxFitRequest) -> Result<MinimaxFitResponse, String> {
    let n = req.xs.len();
    if n != req.ys.len() {
        return Err("xs and ys must have equal length".into());
    }
    let k = req.degree + 1;
    if n < k + 1 {
        return Err(format!(
            "need at least {} points for degree {}",
            k + 1,
            req.degree
        ));
    }
    if req.degree > 8 {
        return Err("degree capped at 8 in the demo".into());
    }
    let theta = nalgebra::DMatrix::from_fn(n, k, |i, j| req.xs[i].powi(j as i32));
    let y = nalgebra::DVector::from_column_slice(&req.ys);

    let c_l2 = least_squares(&theta, &y);
    let r_l2 = &y - &theta * &c_l2;
    let cheb = linf_fit_fixed_support(&theta, &y).map_err(|e| e.to_string())?;
    let r_linf = &y - &theta * &cheb.coefficients;

    let levelled_points = (0..n)
        .filter(|&i| r_linf[i].abs() >= cheb.minimax_residual - 1e-6)
        .collect();

    Ok(MinimaxFitResponse {
        l2: FitLine {
            coefficients: c_l2.iter().copied().collect(),
            max_abs_residual: r_l2.amax(),
            residuals: r_l2.iter().copied().collect(),
        },
        linf: FitLine {
            coefficients: cheb.coefficients.iter().copied().collect(),
            max_abs_residual: cheb.minimax_residual,
            residuals: r_linf.iter().copied().collect(),
        },
        levelled_points,
    })
}

/// Fit a polynomial to points under both objectives. Takes and returns JSON.
#[wasm_bindgen]
pub fn minimax_fit(request_json: &str) -> String {
    let req: Result<MinimaxFitRequest, _> = serde_json::from_str(request_json);
    match req {
        Ok(req) => respond(minimax_fit_impl(&req)),
        Err(e) => respond::<()>(Err(format!("bad request: {e}"))),
    }
}

#[derive(Debug, Clone, Deserialize)]
struct PsoTraceRequest {
    sigma: f64,
    seed: u64,
    pso_iters: usize,
    /// Which state dimension's target to trace (0..3).
    dimension: usize,
}

#[derive(Debug, Clone, Serialize)]
struct PsoTraceResponse {
    /// (restart, iteration, best value) triples.
    history: Vec<(usize, usize, f64)>,
    final_value: f64,
    evaluations: usize,
}

fn pso_trace_impl(req: &PsoTraceRequest) -> Result<PsoTraceResponse, String> {
    if req.dimension > 2 {
        return Err("dimension must be 0, 1 or 2".into());
    }
    let system = lorenz();
    let traj = integrate(&system, &[-8.0, 8.0, 27.0], 0.01, 10.0).map_err(|e| e.to_string())?;
    let deriv = measured_derivative(&system, &traj, &NoiseSpec::new(req.sigma, req.seed));
    let dict = build_dictionary(traj.values(), 2).map_err(|e| e.to_string())?;
    let y = deriv.values().column(req.dimension).into_owned();
    let lambda = 0.05 * y.amax();

    let mut pso = PsoConfig::new(Vec::new()).with_seed(req.seed);
    pso.max_iters = req.pso_iters.clamp(50, 1000);
    pso.restarts = 1;
    let fit = linf_sparse_solve(&dict.matrix, &y, lambda, &pso).map_err(|e| e.to_string())?;

    // re-run the swarm on the same search space to harvest its history
    let space = LinfSearchSpace::build(&dict.matrix, &y);
    pso.bounds = space.bounds.clone();
    pso.initial_guesses = space.guesses.clone();
    let scratch = std::cell::RefCell::new(nalgebra::DVector::zeros(dict.matrix.nrows()));
    let objective =
        |v: &[f64]| -> f64 { space.fitness(v, &y, lambda, &mut scratch.borrow_mut()) };
    let (_, _, diag) = sindy_linf::pso_minimize(objective, &pso).map_err(|e| e.to_string())?;

    Ok(PsoTraceResponse {
        history: diag
            .history
            .iter()
            .map(|h| (h.restart, h.iteration, h.best_value))
            .collect(),
        final_value: fit.objective_value,
        evaluations: diag.evaluations,
    })
}

/// Convergence trace of the sparse minimax solve. Takes and returns JSON.
#[wasm_bindgen]
pub fn pso_trace(request_json: &str) -> String {
    let req: Result<PsoTraceRequest, _> = serde_json::from_str(request_json);
    match req {
        Ok(req) => respond(pso_trace_impl(&req)),
        Err(e) => respond::<()>(Err(format!("bad request: {e}"))),
    }
}
