//! Declarative experiment runner: scenario configs, the benchmark table
//! grids, and CSV/markdown emission.
//!
//! A [`ScenarioConfig`] describes one experiment cell end to end: system,
//! initial states, sampling, derivative source, noise, objective, solver
//! settings and seeds. [`run_scenario`] executes the pipeline
//! integrate → noise → derivative estimate → dictionary → trim to the
//! estimator's valid range → per-dimension sparse solve → reconstruct →
//! metrics, once per replicate. [`run_table`] instantiates the five
//! benchmark sweep grids and runs both objectives on every cell; cells are
//! independent and may run in parallel, with per-cell seeds derived from
//! grid coordinates so results are schedule-independent.

use crate::differentiation::{central_difference, measured_derivative, polynomial_derivative};
use crate::dictionary::{build_dictionary, default_var_names, term_label};
use crate::dynamics::{add_state_noise, integrate_substepped, NoiseSpec, SystemSpec};
use crate::metrics::{error_metrics, reconstruct_saturating, ResultRecord};
use crate::pso::{PsoConfig, StallTolerance};
use crate::sparse_regression::{
    linf_sparse_solve, stlsq, CoefficientsDocument, ObjectiveKind, SparseCoefficients,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Replicate r of a cell offsets the solver seed by this stride, and each
/// state dimension within a replicate by [`PSO_DIM_SEED_STRIDE`], so PSO
/// streams never overlap across (replicate, dimension) pairs.
pub const SOLVER_SEED_STRIDE: u64 = 64;
pub const PSO_DIM_SEED_STRIDE: u64 = 16;
/// Measured-derivative noise draws from a salted copy of the replicate's
/// noise seed so state noise and derivative noise are independent streams.
const DERIVATIVE_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
/// Cells of a table grid space their seeds by this stride.
const CELL_SEED_STRIDE: u64 = 1_000_003;

const STLSQ_MAX_ITERS: usize = 25;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario `{id}`: {message}")]
    InvalidScenario { id: String, message: String },
    #[error("no results to emit")]
    EmptyResults,
    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Which benchmark system to build, with parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SystemSelector {
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    Chen { a: f64, b: f64, c: f64 },
}

impl SystemSelector {
    /// Lorenz with the benchmark parameters σ=10, ρ=28, β=8/3.
    pub fn lorenz_default() -> Self {
        SystemSelector::Lorenz {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }

    /// Chen with the benchmark parameters a=35, b=3, c=28.
    pub fn chen_default() -> Self {
        SystemSelector::Chen {
            a: 35.0,
            b: 3.0,
            c: 28.0,
        }
    }

    pub fn build(&self) -> SystemSpec {
        match *self {
            SystemSelector::Lorenz { sigma, rho, beta } => SystemSpec::lorenz(sigma, rho, beta),
            SystemSelector::Chen { a, b, c } => SystemSpec::chen(a, b, c),
        }
    }
}

/// How the derivative target x̃̇ is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DerivativeSource {
    /// True right-hand side evaluated on the noise-free trajectory, plus
    /// N(0, sigma²) measurement noise per entry.
    MeasuredNoisy { sigma: f64 },
    CentralDifference,
    PolynomialInterp { window: usize, degree: usize },
}

/// PSO overrides for config files; unset fields keep [`PsoConfig`] defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoSettings {
    pub swarm_size: Option<usize>,
    pub max_iters: Option<usize>,
    pub inertia: Option<f64>,
    pub cognitive: Option<f64>,
    pub social: Option<f64>,
    pub velocity_clamp: Option<f64>,
    pub restarts: Option<usize>,
    pub stall_iters: Option<usize>,
    pub stall_rel_improvement: Option<f64>,
}

impl PsoSettings {
    /// Materialize a [`PsoConfig`] with the given seed; bounds are left
    /// empty so the sparse solver picks its data-driven box.
    pub fn to_config(&self, seed: u64) -> PsoConfig {
        let mut c = PsoConfig::new(Vec::new()).with_seed(seed);
        if let Some(v) = self.swarm_size {
            c.swarm_size = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.inertia {
            c.inertia = v;
        }
        if let Some(v) = self.cognitive {
            c.cognitive = v;
        }
        if let Some(v) = self.social {
            c.social = v;
        }
        if let Some(v) = self.velocity_clamp {
            c.velocity_clamp = v;
        }
        if let Some(v) = self.restarts {
            c.restarts = v;
        }
        let mut stall = StallTolerance::default();
        if let Some(v) = self.stall_iters {
            stall.iters = v;
        }
        if let Some(v) = self.stall_rel_improvement {
            stall.rel_improvement = v;
        }
        c.stall = stall;
        c
    }
}

/// Which objective to solve, with its sparsity knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// STLSQ with a hard magnitude threshold.
    L2 { threshold: f64 },
    /// PSO-driven minimax solve; `lambda = None` uses 0.05·‖y‖∞ per target.
    Linf {
        lambda: Option<f64>,
        #[serde(default)]
        pso: PsoSettings,
    },
}

impl ObjectiveSpec {
    pub fn kind(&self) -> ObjectiveKind {
        match self {
            ObjectiveSpec::L2 { .. } => ObjectiveKind::L2,
            ObjectiveSpec::Linf { .. } => ObjectiveKind::Linf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub noise_seed: u64,
    pub solver_seed: u64,
}

fn default_replicates() -> usize {
    1
}

fn default_substeps() -> usize {
    1
}

/// Full declarative description of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub system: SystemSelector,
    pub ident_x0: Vec<f64>,
    pub recon_x0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    /// Reconstruction horizon; `None` uses `t_end`.
    #[serde(default)]
    pub recon_t_end: Option<f64>,
    pub derivative_source: DerivativeSource,
    /// Additive Gaussian noise on the observed states (0 disables).
    #[serde(default)]
    pub state_noise_sigma: f64,
    pub objective: ObjectiveSpec,
    pub dictionary_degree: usize,
    pub seeds: Seeds,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// RK4 sub-steps per sampling interval (1 = simulation step equals
    /// sampling step).
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |message: String| HarnessError::InvalidScenario {
            id: self.id.clone(),
            message,
        };
        if !(self.dt > 0.0) {
            return Err(fail(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(fail("t_end must be at least dt".into()));
        }
        if let Some(r) = self.recon_t_end {
            if r < self.dt {
                return Err(fail("recon_t_end must be at least dt".into()));
            }
        }
        if self.replicates == 0 {
            return Err(fail("replicates must be >= 1".into()));
        }
        if self.substeps == 0 {
            return Err(fail("substeps must be >= 1".into()));
        }
        if self.state_noise_sigma < 0.0 {
            return Err(fail("state_noise_sigma must be nonnegative".into()));
        }
        if self.dictionary_degree == 0 {
            return Err(fail("dictionary_degree must be >= 1".into()));
        }
        let d = self.system.build().dimension();
        if self.ident_x0.len() != d || self.recon_x0.len() != d {
            return Err(fail(format!(
                "initial states must have dimension {d}, got {} and {}",
                self.ident_x0.len(),
                self.recon_x0.len()
            )));
        }
        Ok(())
    }
}

/// One replicate's outputs: the metrics record and, when the pipeline
/// succeeded, the identified model document.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: ResultRecord,
    pub model: Option<CoefficientsDocument>,
}

/// Execute every replicate of a scenario. Pipeline failures inside a
/// replicate are attached to its record and the sweep continues.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<RunOutcome>, HarnessError> {
    config.validate()?;
    Ok((0..config.replicates)
        .map(|r| match run_replicate(config, r) {
            Ok(outcome) => outcome,
            Err(message) => RunOutcome {
                record: ResultRecord {
                    scenario_id: config.id.clone(),
                    replicate: r,
                    objective_kind: config.objective.kind(),
                    rmse: Vec::new(),
                    std: Vec::new(),
                    diverged: false,
                    truncated: false,
                    error: Some(message),
                    settings: settings_echo(&config.objective),
                    noise_seed: config.seeds.noise_seed.wrapping_add(r as u64),
                    solver_seed: solver_seed_for(config, r),
                },
                model: None,
            },
        })
        .collect())
}

fn settings_echo(objective: &ObjectiveSpec) -> String {
    serde_json::to_string(objective).unwrap_or_default()
}

fn solver_seed_for(config: &ScenarioConfig, replicate: usize) -> u64 {
    config
        .seeds
        .solver_seed
        .wrapping_add(SOLVER_SEED_STRIDE * replicate as u64)
}

fn run_replicate(config: &ScenarioConfig, replicate: usize) -> Result<RunOutcome, String> {
    let system = config.system.build();
    let d = system.dimension();
    let noise_seed = config.seeds.noise_seed.wrapping_add(replicate as u64);
    let solver_seed = solver_seed_for(config, replicate);

    let truth_ident = integrate_substepped(
        &system,
        &config.ident_x0,
        config.dt,
        config.t_end,
        config.substeps,
    )
    .map_err(|e| format!("identification integration: {e}"))?;

    let states = if config.state_noise_sigma > 0.0 {
        add_state_noise(&truth_ident, &NoiseSpec::new(config.state_noise_sigma, noise_seed))
    } else {
        truth_ident.clone()
    };

    let deriv = match config.derivative_source {
        DerivativeSource::MeasuredNoisy { sigma } => measured_derivative(
            &system,
            &truth_ident,
            &NoiseSpec::new(sigma, noise_seed ^ DERIVATIVE_SEED_SALT),
        ),
        DerivativeSource::CentralDifference => {
            central_difference(&states).map_err(|e| format!("central difference: {e}"))?
        }
        DerivativeSource::PolynomialInterp { window, degree } => {
            polynomial_derivative(&states, window, degree)
                .map_err(|e| format!("polynomial derivative: {e}"))?
        }
    };

    let (first, last) = deriv.valid_range();
    let trimmed = states.slice(first, last);
    let dict = build_dictionary(trimmed.values(), config.dictionary_degree)
        .map_err(|e| format!("dictionary: {e}"))?;

    let mut fits: Vec<SparseCoefficients> = Vec::with_capacity(d);
    for k in 0..d {
        let y = deriv.values().column(k).into_owned();
        let fit = match &config.objective {
            ObjectiveSpec::L2 { threshold } => stlsq(&dict.matrix, &y, *threshold, STLSQ_MAX_ITERS)
                .map_err(|e| format!("stlsq on dimension {k}: {e}"))?,
            ObjectiveSpec::Linf { lambda, pso } => {
                let lam = lambda.unwrap_or(0.05 * y.amax());
                let pso_config = pso.to_config(solver_seed + PSO_DIM_SEED_STRIDE * k as u64);
                linf_sparse_solve(&dict.matrix, &y, lam, &pso_config)
                    .map_err(|e| format!("linf solve on dimension {k}: {e}"))?
            }
        };
        fits.push(fit);
    }

    let recon_t_end = config.recon_t_end.unwrap_or(config.t_end);
    let truth_recon = integrate_substepped(
        &system,
        &config.recon_x0,
        config.dt,
        recon_t_end,
        config.substeps,
    )
    .map_err(|e| format!("reconstruction truth integration: {e}"))?;
    let (recon, diverged) = reconstruct_saturating(
        &fits,
        &dict.terms,
        &config.recon_x0,
        config.dt,
        recon_t_end,
    )
    .map_err(|e| format!("reconstruction: {e}"))?;
    let metrics =
        error_metrics(&truth_recon, &recon).map_err(|e| format!("error metrics: {e}"))?;

    let names = default_var_names(d);
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let labels: Vec<String> = dict.terms.iter().map(|t| term_label(t, &name_refs)).collect();
    let model = CoefficientsDocument::new(&fits, &labels, names, config.dictionary_degree);

    Ok(RunOutcome {
        record: ResultRecord {
            scenario_id: config.id.clone(),
            replicate,
            objective_kind: config.objective.kind(),
            rmse: metrics.rmse,
            std: metrics.std,
            diverged,
            truncated: metrics.truncated,
            error: None,
            settings: settings_echo(&config.objective),
            noise_seed,
            solver_seed,
        },
        model: Some(model),
    })
}

/// The five benchmark sweep grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl TableId {
    pub fn from_index(i: usize) -> Option<TableId> {
        match i {
            1 => Some(TableId::T1),
            2 => Some(TableId::T2),
            3 => Some(TableId::T3),
            4 => Some(TableId::T4),
            5 => Some(TableId::T5),
            _ => None,
        }
    }

    pub fn index(&self) -> usize {
        match self {
            TableId::T1 => 1,
            TableId::T2 => 2,
            TableId::T3 => 3,
            TableId::T4 => 4,
            TableId::T5 => 5,
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.index())
    }
}

/// Options shared by a whole table run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    pub replicates: usize,
    pub base_seed: u64,
    /// Reconstruction horizon override; `None` keeps the identification
    /// horizon (50 s).
    pub recon_t_end: Option<f64>,
    pub l2_threshold: f64,
    /// `None` uses the per-target default 0.05·‖y‖∞.
    pub linf_lambda: Option<f64>,
    pub pso: PsoSettings,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions {
            replicates: 1,
            base_seed: 0,
            recon_t_end: None,
            l2_threshold: 0.1,
            linf_lambda: None,
            pso: PsoSettings::default(),
        }
    }
}

/// One cell of a table grid: key plus the two objective configs.
#[derive(Debug, Clone)]
pub struct CellSpec {
    pub key: String,
    pub l2: ScenarioConfig,
    pub linf: ScenarioConfig,
}

const BENCH_T_END: f64 = 50.0;
const BENCH_IDENT_X0: [f64; 3] = [-8.0, 8.0, 27.0];
const BENCH_RECON_X0: [f64; 3] = [1.0, 1.0, 1.0];

fn benchmark_cell(
    table: TableId,
    cell_index: usize,
    key: String,
    system: SystemSelector,
    dt: f64,
    derivative_source: DerivativeSource,
    state_noise_sigma: f64,
    opts: &TableOptions,
) -> CellSpec {
    let seeds = Seeds {
        noise_seed: opts.base_seed.wrapping_add(cell_index as u64 * CELL_SEED_STRIDE),
        solver_seed: opts
            .base_seed
            .wrapping_add(cell_index as u64 * CELL_SEED_STRIDE + CELL_SEED_STRIDE / 2),
    };
    let base = ScenarioConfig {
        id: format!("{table}/{key}"),
        system,
        ident_x0: BENCH_IDENT_X0.to_vec(),
        recon_x0: BENCH_RECON_X0.to_vec(),
        dt,
        t_end: BENCH_T_END,
        recon_t_end: opts.recon_t_end,
        derivative_source,
        state_noise_sigma,
        objective: ObjectiveSpec::L2 {
            threshold: opts.l2_threshold,
        },
        dictionary_degree: 2,
        seeds,
        replicates: opts.replicates,
        substeps: 1,
    };
    let mut linf = base.clone();
    linf.objective = ObjectiveSpec::Linf {
        lambda: opts.linf_lambda,
        pso: opts.pso.clone(),
    };
    CellSpec {
        key,
        l2: base,
        linf,
    }
}

/// Instantiate a table's sweep grid.
pub fn table_cells(table: TableId, opts: &TableOptions) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    let mut idx = 0usize;
    match table {
        TableId::T1 => {
            for &sigma in &[0.0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0] {
                cells.push(benchmark_cell(
                    table,
                    idx,
                    format!("sigma={sigma}"),
                    SystemSelector::lorenz_default(),
                    0.01,
                    DerivativeSource::MeasuredNoisy { sigma },
                    0.0,
                    opts,
                ));
                idx += 1;
            }
        }
        TableId::T2 => {
            for &dt in &[0.001, 0.0025, 0.005, 0.0075, 0.01, 0.02] {
                cells.push(benchmark_cell(
                    table,
                    idx,
                    format!("dt={dt}"),
                    SystemSelector::lorenz_default(),
                    dt,
                    DerivativeSource::CentralDifference,
                    0.0,
                    opts,
                ));
                idx += 1;
            }
        }
        TableId::T3 => {
            for (name, source) in [
                ("central_difference", DerivativeSource::CentralDifference),
                (
                    "polynomial_interpolation",
                    DerivativeSource::PolynomialInterp {
                        window: 7,
                        degree: 3,
                    },
                ),
            ] {
                cells.push(benchmark_cell(
                    table,
                    idx,
                    format!("technique={name}"),
                    SystemSelector::lorenz_default(),
                    0.01,
                    source,
                    0.0,
                    opts,
                ));
                idx += 1;
            }
        }
        TableId::T4 | TableId::T5 => {
            let system = if table == TableId::T4 {
                SystemSelector::lorenz_default()
            } else {
                SystemSelector::chen_default()
            };
            for &dt in &[0.005, 0.01, 0.02] {
                for &sigma in &[0.01, 0.03, 0.05] {
                    cells.push(benchmark_cell(
                        table,
                        idx,
                        format!("dt={dt},sigma={sigma}"),
                        system.clone(),
                        dt,
                        DerivativeSource::CentralDifference,
                        sigma,
                        opts,
                    ));
                    idx += 1;
                }
            }
        }
    }
    cells
}

/// Both objectives' records for one grid cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub key: String,
    pub l2: Vec<ResultRecord>,
    pub linf: Vec<ResultRecord>,
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub table: TableId,
    pub cells: Vec<CellResult>,
}

/// Run a full table grid, both objectives per cell.
///
/// With the `parallel` feature, cells run on the current rayon pool; the
/// output is identical regardless of thread count because every cell's
/// seeds come from its grid coordinates and results are collected in grid
/// order.
pub fn run_table(table: TableId, opts: &TableOptions) -> Result<TableResult, HarnessError> {
    let cells = table_cells(table, opts);
    let run_cell = |cell: &CellSpec| -> Result<CellResult, HarnessError> {
        let l2 = run_scenario(&cell.l2)?;
        let linf = run_scenario(&cell.linf)?;
        Ok(CellResult {
            key: cell.key.clone(),
            l2: l2.into_iter().map(|o| o.record).collect(),
            linf: linf.into_iter().map(|o| o.record).collect(),
        })
    };

    #[cfg(feature = "parallel")]
    let results: Result<Vec<CellResult>, HarnessError> = cells.par_iter().map(run_cell).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<CellResult>, HarnessError> = cells.iter().map(run_cell).collect();

    Ok(TableResult {
        table,
        cells: results?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// Mean over replicates that produced metrics; NaN when none did.
fn mean_metric(records: &[ResultRecord], pick: impl Fn(&ResultRecord) -> Option<f64>) -> f64 {
    let values: Vec<f64> = records.iter().filter_map(&pick).collect();
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn cell_dimension(result: &TableResult) -> usize {
    result
        .cells
        .iter()
        .flat_map(|c| c.l2.iter().chain(c.linf.iter()))
        .map(|r| r.rmse.len())
        .max()
        .unwrap_or(0)
}

struct CellSummary {
    key: String,
    // [dimension][0=rmse,1=std][0=l2,1=linf]
    values: Vec<[[f64; 2]; 2]>,
    diverged: [usize; 2],
}

fn summarize(result: &TableResult) -> Result<Vec<CellSummary>, HarnessError> {
    if result.cells.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let d = cell_dimension(result);
    if d == 0 {
        return Err(HarnessError::EmptyResults);
    }
    Ok(result
        .cells
        .iter()
        .map(|cell| {
            let mut values = vec![[[f64::NAN; 2]; 2]; d];
            for (oi, records) in [&cell.l2, &cell.linf].into_iter().enumerate() {
                for k in 0..d {
                    values[k][0][oi] =
                        mean_metric(records, |r| r.rmse.get(k).copied().filter(|_| r.error.is_none()));
                    values[k][1][oi] =
                        mean_metric(records, |r| r.std.get(k).copied().filter(|_| r.error.is_none()));
                }
            }
            CellSummary {
                key: cell.key.clone(),
                values,
                diverged: [
                    cell.l2.iter().filter(|r| r.diverged).count(),
                    cell.linf.iter().filter(|r| r.diverged).count(),
                ],
            }
        })
        .collect())
}

/// Render the aggregated table.
///
/// Column order mirrors the benchmark tables: the cell key, then per
/// sub-system RMSE (L2, L∞) and STD (L2, L∞). Markdown bolds the smaller
/// of each (L2, L∞) pair at 4 decimal places; exact ties at that precision
/// bold both and are listed in a trailing note.
pub fn emit_table(result: &TableResult, format: TableFormat) -> Result<String, HarnessError> {
    let summaries = summarize(result)?;
    let d = summaries[0].values.len();
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("cell");
            for k in 1..=d {
                for metric in ["rmse", "std"] {
                    for objective in ["l2", "linf"] {
                        out.push_str(&format!(",{metric}_{objective}_s{k}"));
                    }
                }
            }
            out.push_str(",diverged_l2,diverged_linf\n");
            for s in &summaries {
                out.push_str(&csv_quote(&s.key));
                for k in 0..d {
                    for mi in 0..2 {
                        for oi in 0..2 {
                            out.push_str(&format!(",{:.4}", s.values[k][mi][oi]));
                        }
                    }
                }
                out.push_str(&format!(",{},{}\n", s.diverged[0], s.diverged[1]));
            }
        }
        TableFormat::Markdown => {
            let mut ties: Vec<String> = Vec::new();
            out.push_str("| cell |");
            for k in 1..=d {
                out.push_str(&format!(
                    " s{k} RMSE L2 | s{k} RMSE L∞ | s{k} STD L2 | s{k} STD L∞ |"
                ));
            }
            out.push('\n');
            out.push_str("|---|");
            for _ in 0..4 * d {
                out.push_str("---|");
            }
            out.push('\n');
            for s in &summaries {
                out.push_str(&format!("| {} |", s.key));
                for k in 0..d {
                    for mi in 0..2 {
                        let pair = s.values[k][mi];
                        let fmt4 = |v: f64| format!("{v:.4}");
                        let (a, b) = (fmt4(pair[0]), fmt4(pair[1]));
                        let tie = a == b && pair[0].is_finite();
                        let bold_l2 = tie || pair[0] < pair[1];
                        let bold_linf = tie || pair[1] < pair[0];
                        if tie {
                            ties.push(format!(
                                "{} s{} {}",
                                s.key,
                                k + 1,
                                if mi == 0 { "RMSE" } else { "STD" }
                            ));
                        }
                        let cell_a = if bold_l2 { format!("**{a}**") } else { a };
                        let cell_b = if bold_linf { format!("**{b}**") } else { b };
                        out.push_str(&format!(" {cell_a} | {cell_b} |"));
                    }
                }
                out.push('\n');
            }
            if !ties.is_empty() {
                out.push_str(&format!("\nties (both bolded): {}\n", ties.join("; ")));
            }
        }
    }
    Ok(out)
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Long-format CSV: one row per (cell, objective, replicate).
pub fn emit_records_csv(result: &TableResult) -> Result<String, HarnessError> {
    if result.cells.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let d = cell_dimension(result);
    let mut out = String::from("scenario_id,objective,replicate");
    for k in 1..=d {
        out.push_str(&format!(",rmse_s{k}"));
    }
    for k in 1..=d {
        out.push_str(&format!(",std_s{k}"));
    }
    out.push_str(",diverged,truncated,error,noise_seed,solver_seed,settings\n");
    for cell in &result.cells {
        for records in [&cell.l2, &cell.linf] {
            for r in records {
                out.push_str(&record_csv_row(r, d));
            }
        }
    }
    Ok(out)
}

pub fn record_csv_row(r: &ResultRecord, d: usize) -> String {
    let mut row = format!(
        "{},{},{}",
        csv_quote(&r.scenario_id),
        r.objective_kind,
        r.replicate
    );
    for k in 0..d {
        match r.rmse.get(k) {
            Some(v) => row.push_str(&format!(",{v:.16e}")),
            None => row.push_str(",nan"),
        }
    }
    for k in 0..d {
        match r.std.get(k) {
            Some(v) => row.push_str(&format!(",{v:.16e}")),
            None => row.push_str(",nan"),
        }
    }
    row.push_str(&format!(
        ",{},{},{},{},{},{}\n",
        r.diverged,
        r.truncated,
        csv_quote(r.error.as_deref().unwrap_or("")),
        r.noise_seed,
        r.solver_seed,
        csv_quote(&r.settings)
    ));
    row
}

/// Write `table_tN.csv`, `table_tN.md` and `records_tN.csv` into `dir`.
pub fn write_table_outputs(result: &TableResult, dir: &Path) -> Result<(), HarnessError> {
    let io_err = |path: &Path, source: std::io::Error| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let n = result.table.index();
    for (name, content) in [
        (format!("table_t{n}.csv"), emit_table(result, TableFormat::Csv)?),
        (
            format!("table_t{n}.md"),
            emit_table(result, TableFormat::Markdown)?,
        ),
        (format!("records_t{n}.csv"), emit_records_csv(result)?),
    ] {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(content.as_bytes()).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
