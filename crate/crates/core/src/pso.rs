//! Seedable global-best particle swarm optimizer.
//!
//! Canonical constriction-style settings (inertia 0.72, cognitive = social
//! = 1.49) with velocity clamping, reflecting bounds and stalled-swarm
//! restarts. Restarts run as independent swarms seeded `seed`, `seed+1`, …
//! and the best result across them is returned, so a run is a pure function
//! of its configuration. All random draws happen on the single-threaded
//! update path, never inside fitness calls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsoError {
    #[error("invalid PSO configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "non-finite fitness value for particle {particle} at iteration {iteration} (restart {restart})"
    )]
    NonFiniteFitness {
        restart: usize,
        particle: usize,
        iteration: usize,
    },
}

/// Stop a swarm early when the best value has not improved by more than
/// `rel_improvement` (relative) for `iters` consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StallTolerance {
    pub iters: usize,
    pub rel_improvement: f64,
}

impl Default for StallTolerance {
    fn default() -> Self {
        StallTolerance {
            iters: 80,
            rel_improvement: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate (lo, hi) search box.
    pub bounds: Vec<(f64, f64)>,
    /// Velocity clamp as a fraction of each coordinate's bound width.
    pub velocity_clamp: f64,
    /// Additional independent swarms beyond the first.
    pub restarts: usize,
    pub seed: u64,
    pub stall: StallTolerance,
    /// Warm-start positions; each replaces one particle's random initial
    /// position in every restart (clamped into the bounds).
    #[serde(default)]
    pub initial_guesses: Vec<Vec<f64>>,
}

impl PsoConfig {
    /// Defaults: swarm 50, 1000 iterations, inertia 0.72,
    /// cognitive = social = 1.49, velocity clamp 0.5, 3 restarts.
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        PsoConfig {
            swarm_size: 50,
            max_iters: 1000,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            bounds,
            velocity_clamp: 0.5,
            restarts: 3,
            seed: 0,
            stall: StallTolerance::default(),
            initial_guesses: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        if self.bounds.is_empty() {
            return Err(PsoError::InvalidConfig("bounds must be non-empty".into()));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(PsoError::InvalidConfig(format!(
                    "bounds[{i}] must satisfy lo < hi with finite values, got ({lo}, {hi})"
                )));
            }
        }
        if self.swarm_size < 2 {
            return Err(PsoError::InvalidConfig(format!(
                "swarm_size must be >= 2, got {}",
                self.swarm_size
            )));
        }
        if !(0.0..=1.2).contains(&self.inertia) {
            return Err(PsoError::InvalidConfig(format!(
                "inertia must be in [0, 1.2], got {}",
                self.inertia
            )));
        }
        if self.cognitive < 0.0 || self.social < 0.0 {
            return Err(PsoError::InvalidConfig(
                "cognitive and social weights must be nonnegative".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(PsoError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(PsoError::InvalidConfig(format!(
                "velocity_clamp must be positive, got {}",
                self.velocity_clamp
            )));
        }
        if self.initial_guesses.len() > self.swarm_size {
            return Err(PsoError::InvalidConfig(format!(
                "{} initial guesses exceed the swarm size {}",
                self.initial_guesses.len(),
                self.swarm_size
            )));
        }
        for (i, guess) in self.initial_guesses.iter().enumerate() {
            if guess.len() != self.bounds.len() {
                return Err(PsoError::InvalidConfig(format!(
                    "initial guess {i} has dimension {}, expected {}",
                    guess.len(),
                    self.bounds.len()
                )));
            }
        }
        Ok(())
    }
}

/// One swarm's full mutable state; exposed so the update rule is unit-testable.
#[derive(Debug, Clone)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best_positions: Vec<Vec<f64>>,
    pub personal_best_values: Vec<f64>,
    pub global_best_position: Vec<f64>,
    pub global_best_value: f64,
    pub iteration: usize,
    rng: ChaCha8Rng,
    restart_index: usize,
}

/// Convergence record: one row per iteration of one restart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryPoint {
    pub restart: usize,
    pub iteration: usize,
    pub best_value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PsoDiagnostics {
    pub evaluations: usize,
    pub restarts_run: usize,
    pub history: Vec<HistoryPoint>,
}

impl PsoDiagnostics {
    /// CSV stream of (restart, iteration, global_best_value).
    pub fn write_convergence_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "restart,iteration,global_best_value")?;
        for p in &self.history {
            writeln!(w, "{},{},{:.16e}", p.restart, p.iteration, p.best_value)?;
        }
        Ok(())
    }
}

/// Initialize a swarm: positions uniform in the box, velocities zero.
pub fn init_swarm<F>(
    objective: &F,
    config: &PsoConfig,
    restart_index: usize,
    evaluations: &mut usize,
) -> Result<SwarmState, PsoError>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = config.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart_index as u64));
    let mut positions = Vec::with_capacity(config.swarm_size);
    for _ in 0..config.swarm_size {
        let mut x = Vec::with_capacity(dim);
        for &(lo, hi) in &config.bounds {
            x.push(rng.gen_range(lo..hi));
        }
        positions.push(x);
    }
    // warm starts replace the leading random positions; the random draws
    // still happen so seeds produce the same stream with or without guesses
    for (p, guess) in config.initial_guesses.iter().enumerate() {
        for (x, (&g, &(lo, hi))) in positions[p]
            .iter_mut()
            .zip(guess.iter().zip(&config.bounds))
        {
            *x = g.clamp(lo, hi);
        }
    }
    let velocities = vec![vec![0.0; dim]; config.swarm_size];

    let mut values = Vec::with_capacity(config.swarm_size);
    for (p, x) in positions.iter().enumerate() {
        let v = objective(x);
        *evaluations += 1;
        if !v.is_finite() {
            return Err(PsoError::NonFiniteFitness {
                restart: restart_index,
                particle: p,
                iteration: 0,
            });
        }
        values.push(v);
    }
    let mut best = 0;
    for p in 1..config.swarm_size {
        if values[p] < values[best] {
            best = p;
        }
    }
    Ok(SwarmState {
        global_best_position: positions[best].clone(),
        global_best_value: values[best],
        personal_best_positions: positions.clone(),
        personal_best_values: values,
        positions,
        velocities,
        iteration: 0,
        rng,
        restart_index,
    })
}

/// Reflect `x` into [lo, hi], flipping `v`'s sign once per bounce.
fn reflect(x: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    let mut bounces = 0;
    while (*x < lo || *x > hi) && bounces < 64 {
        if *x < lo {
            *x = lo + (lo - *x);
        } else {
            *x = hi - (*x - hi);
        }
        *v = -*v;
        bounces += 1;
    }
    if *x < lo || *x > hi {
        // pathological velocity; pin to the nearest bound
        *x = x.clamp(lo, hi);
    }
}

/// One synchronous swarm update: velocities, positions, bests.
///
/// Velocity rule: v ← inertia·v + cognitive·r1∘(pbest−x) + social·r2∘(gbest−x),
/// clamped per coordinate; positions reflect at the bounds. The global best
/// used for attraction is the one from the start of the iteration.
pub fn step<F>(state: &mut SwarmState, objective: &F, config: &PsoConfig) -> Result<(), PsoError>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = config.dimension();
    let gbest = state.global_best_position.clone();
    state.iteration += 1;

    for p in 0..config.swarm_size {
        for d in 0..dim {
            let r1: f64 = state.rng.gen();
            let r2: f64 = state.rng.gen();
            let x = state.positions[p][d];
            let (lo, hi) = config.bounds[d];
            let vmax = config.velocity_clamp * (hi - lo);
            let mut v = config.inertia * state.velocities[p][d]
                + config.cognitive * r1 * (state.personal_best_positions[p][d] - x)
                + config.social * r2 * (gbest[d] - x);
            v = v.clamp(-vmax, vmax);
            let mut xn = x + v;
            reflect(&mut xn, &mut v, lo, hi);
            state.velocities[p][d] = v;
            state.positions[p][d] = xn;
        }
    }

    for p in 0..config.swarm_size {
        let value = objective(&state.positions[p]);
        if !value.is_finite() {
            return Err(PsoError::NonFiniteFitness {
                restart: state.restart_index,
                particle: p,
                iteration: state.iteration,
            });
        }
        if value < state.personal_best_values[p] {
            state.personal_best_values[p] = value;
            state.personal_best_positions[p].copy_from_slice(&state.positions[p]);
        }
    }

    for p in 0..config.swarm_size {
        if state.personal_best_values[p] < state.global_best_value {
            state.global_best_value = state.personal_best_values[p];
            state
                .global_best_position
                .copy_from_slice(&state.personal_best_positions[p]);
        }
    }
    Ok(())
}

/// Minimize `objective` over the configured box.
///
/// Runs `restarts + 1` independent swarms and returns the best position and
/// value found, with per-iteration convergence history in the diagnostics.
pub fn pso_minimize<F>(
    objective: F,
    config: &PsoConfig,
) -> Result<(Vec<f64>, f64, PsoDiagnostics), PsoError>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let mut diag = PsoDiagnostics::default();
    let mut best_position: Option<Vec<f64>> = None;
    let mut best_value = f64::INFINITY;

    for restart in 0..=config.restarts {
        let mut state = init_swarm(&objective, config, restart, &mut diag.evaluations)?;
        diag.restarts_run += 1;
        let mut stall_anchor = state.global_best_value;
        let mut stall_count = 0usize;

        for _ in 0..config.max_iters {
            step(&mut state, &objective, config)?;
            diag.evaluations += config.swarm_size;
            diag.history.push(HistoryPoint {
                restart,
                iteration: state.iteration,
                best_value: state.global_best_value,
            });

            let improvement = stall_anchor - state.global_best_value;
            if improvement > config.stall.rel_improvement * stall_anchor.abs().max(1.0) {
                stall_anchor = state.global_best_value;
                stall_count = 0;
            } else {
                stall_count += 1;
                if stall_count >= config.stall.iters {
                    break;
                }
            }
        }

        if state.global_best_value < best_value {
            best_value = state.global_best_value;
            best_position = Some(state.global_best_position.clone());
        }
    }

    Ok((best_position.expect("at least one restart"), best_value, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    #[test]
    fn sphere_converges() {
        let config = PsoConfig::new(vec![(-5.0, 5.0); 4]).with_seed(1);
        let (pos, value, _) = pso_minimize(sphere, &config).unwrap();
        assert!(value < 1e-6, "value {value}");
        assert!(pos.iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn constant_objective() {
        let config = PsoConfig::new(vec![(-1.0, 1.0); 3]).with_seed(5);
        let (pos, value, _) = pso_minimize(|_| 7.0, &config).unwrap();
        assert_eq!(value, 7.0);
        assert!(pos.iter().zip(&config.bounds).all(|(x, (lo, hi))| x >= lo && x <= hi));
    }

    #[test]
    fn deterministic_given_seed() {
        let config = PsoConfig::new(vec![(-5.0, 5.0); 3]).with_seed(99);
        let a = pso_minimize(sphere, &config).unwrap();
        let b = pso_minimize(sphere, &config).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2.history, b.2.history);
        assert_eq!(a.2.evaluations, b.2.evaluations);
    }

    #[test]
    fn different_seeds_may_differ() {
        let base = PsoConfig::new(vec![(-5.0, 5.0); 3]);
        let a = pso_minimize(sphere, &base.clone().with_seed(1)).unwrap();
        let b = pso_minimize(sphere, &base.with_seed(2)).unwrap();
        // both converge, but the search paths differ
        assert_ne!(a.2.history, b.2.history);
    }

    #[test]
    fn fixed_point_of_update() {
        // zero velocities, all particles at gbest, no attraction terms:
        // only the iteration counter moves
        let mut config = PsoConfig::new(vec![(-1.0, 1.0); 2]).with_seed(3);
        config.cognitive = 0.0;
        config.social = 0.0;
        let mut evals = 0;
        let mut state = init_swarm(&sphere, &config, 0, &mut evals).unwrap();
        let origin = vec![0.1, -0.2];
        for p in 0..config.swarm_size {
            state.positions[p] = origin.clone();
            state.velocities[p] = vec![0.0, 0.0];
            state.personal_best_positions[p] = origin.clone();
            state.personal_best_values[p] = sphere(&origin);
        }
        state.global_best_position = origin.clone();
        state.global_best_value = sphere(&origin);
        let before = state.clone();
        step(&mut state, &sphere, &config).unwrap();
        assert_eq!(state.iteration, before.iteration + 1);
        assert_eq!(state.positions, before.positions);
        assert_eq!(state.velocities, before.velocities);
        assert_eq!(state.global_best_value, before.global_best_value);
    }

    #[test]
    fn velocity_decays_geometrically_at_rest_point() {
        let mut config = PsoConfig::new(vec![(-10.0, 10.0)]).with_seed(3);
        config.swarm_size = 2;
        config.cognitive = 0.0;
        config.social = 0.0;
        let mut evals = 0;
        let mut state = init_swarm(&sphere, &config, 0, &mut evals).unwrap();
        for p in 0..2 {
            state.positions[p] = vec![0.0];
            state.velocities[p] = vec![1.0];
            state.personal_best_positions[p] = vec![0.0];
            state.personal_best_values[p] = 0.0;
        }
        state.global_best_position = vec![0.0];
        state.global_best_value = 0.0;
        step(&mut state, &sphere, &config).unwrap();
        // x moved by v; with pbest/gbest at the old point attraction is off
        // only for particles still at them, so check pure inertia on v
        assert!((state.velocities[0][0] - config.inertia).abs() < 1e-12);
    }

    #[test]
    fn global_best_monotone_and_positions_in_bounds() {
        let config = PsoConfig::new(vec![(-3.0, 3.0); 5]).with_seed(17);
        let rastrigin = |v: &[f64]| -> f64 {
            10.0 * v.len() as f64
                + v.iter()
                    .map(|x| x * x - 10.0 * (2.0 * std::f64::consts::PI * x).cos())
                    .sum::<f64>()
        };
        let mut evals = 0;
        let mut state = init_swarm(&rastrigin, &config, 0, &mut evals).unwrap();
        let mut last = state.global_best_value;
        for _ in 0..50 {
            step(&mut state, &rastrigin, &config).unwrap();
            assert!(state.global_best_value <= last);
            last = state.global_best_value;
            for p in &state.positions {
                for (x, (lo, hi)) in p.iter().zip(&config.bounds) {
                    assert!(x >= lo && x <= hi, "position {x} outside [{lo}, {hi}]");
                }
            }
        }
    }

    #[test]
    fn non_finite_fitness_is_reported() {
        let config = PsoConfig::new(vec![(-1.0, 1.0)]).with_seed(0);
        let res = pso_minimize(|v| if v[0] > 0.0 { f64::NAN } else { v[0] }, &config);
        assert!(matches!(res, Err(PsoError::NonFiniteFitness { .. })));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = PsoConfig::new(vec![(1.0, 1.0)]);
        assert!(c.validate().is_err());
        c = PsoConfig::new(vec![(-1.0, 1.0)]);
        c.swarm_size = 1;
        assert!(c.validate().is_err());
        c = PsoConfig::new(vec![(-1.0, 1.0)]);
        c.inertia = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sphere_calibration_across_seeds() {
        // defaults reach < 1e-4 within 500 iterations on nearly all seeds
        let mut ok = 0;
        for seed in 0..100 {
            let mut config = PsoConfig::new(vec![(-5.0, 5.0); 8]).with_seed(seed);
            config.max_iters = 500;
            config.restarts = 0;
            let (_, value, _) = pso_minimize(sphere, &config).unwrap();
            if value < 1e-4 {
                ok += 1;
            }
        }
        assert!(ok >= 95, "only {ok}/100 seeds converged");
    }

    #[test]
    fn convergence_csv_shape() {
        let mut config = PsoConfig::new(vec![(-5.0, 5.0); 2]).with_seed(4);
        config.max_iters = 10;
        config.restarts = 1;
        config.stall.iters = 1000;
        let (_, _, diag) = pso_minimize(sphere, &config).unwrap();
        let mut buf = Vec::new();
        diag.write_convergence_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 20); // header + 2 restarts x 10 iters
        assert!(text.starts_with("restart,iteration,global_best_value"));
    }
}
