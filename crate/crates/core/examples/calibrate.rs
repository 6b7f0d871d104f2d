//! Scratch calibration runs for threshold selection. Not part of the test
//! suite; run with `cargo run --example calibrate --release -- <section>`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sindy_linf::harness::*;
use sindy_linf::pso::PsoConfig;
use sindy_linf::*;
use std::time::Instant;

fn scenario(objective: ObjectiveSpec, sigma: f64, recon_t_end: f64) -> ScenarioConfig {
    ScenarioConfig {
        id: format!("cal/sigma={sigma}"),
        system: SystemSelector::lorenz_default(),
        ident_x0: vec![-8.0, 8.0, 27.0],
        recon_x0: vec![1.0, 1.0, 1.0],
        dt: 0.01,
        t_end: 50.0,
        recon_t_end: Some(recon_t_end),
        derivative_source: DerivativeSource::MeasuredNoisy { sigma },
        state_noise_sigma: 0.0,
        objective,
        dictionary_degree: 2,
        seeds: Seeds { noise_seed: 100, solver_seed: 200 },
        replicates: 1,
        substeps: 1,
    }
}

fn horizon_sweep() {
    println!("== noise-free & noisy L2 RMSE vs reconstruction horizon ==");
    for sigma in [0.0, 0.001, 0.01, 0.1, 1.0] {
        for horizon in [5.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0] {
            let cfg = scenario(ObjectiveSpec::L2 { threshold: 0.1 }, sigma, horizon);
            let t = Instant::now();
            let out = run_scenario(&cfg).unwrap();
            let r = &out[0].record;
            println!(
                "sigma={sigma:<6} horizon={horizon:<4} rmse={:?} diverged={} ({:.2?})",
                r.rmse.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
                r.diverged,
                t.elapsed()
            );
        }
        // coefficient errors at this sigma
        let cfg = scenario(ObjectiveSpec::L2 { threshold: 0.1 }, sigma, 5.0);
        let out = run_scenario(&cfg).unwrap();
        if let Some(model) = &out[0].model {
            let xi = model.coefficient_vectors();
            let truth = lorenz_truth();
            let mut max_err = 0.0f64;
            for k in 0..3 {
                for j in 0..10 {
                    max_err = max_err.max((xi[k][j] - truth[k][j]).abs());
                }
            }
            println!("sigma={sigma:<6} max coefficient error = {max_err:.3e}");
        }
    }
}

fn lorenz_truth() -> Vec<DVector<f64>> {
    let (s, r, b) = (10.0, 28.0, 8.0 / 3.0);
    let mut out = vec![DVector::zeros(10), DVector::zeros(10), DVector::zeros(10)];
    out[0][1] = -s;
    out[0][2] = s;
    out[1][1] = r;
    out[1][2] = -1.0;
    out[1][6] = -1.0;
    out[2][3] = -b;
    out[2][5] = 1.0;
    out
}

fn chen_bounds() {
    println!("== Chen boundedness from [-8, 8, 27] ==");
    let sys = SystemSpec::chen(35.0, 3.0, 28.0);
    for dt in [0.005, 0.01, 0.02] {
        match integrate(&sys, &[-8.0, 8.0, 27.0], dt, 50.0) {
            Ok(traj) => {
                let max = traj.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                println!("dt={dt}: n={} max|x|={max:.2}", traj.len());
            }
            Err(e) => println!("dt={dt}: FAILED {e}"),
        }
    }
    // and the recon start
    match integrate(&sys, &[1.0, 1.0, 1.0], 0.01, 50.0) {
        Ok(traj) => {
            let max = traj.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            println!("recon x0: max|x|={max:.2}");
        }
        Err(e) => println!("recon x0 FAILED {e}"),
    }
}

fn linf_noise_free() {
    println!("== L-infinity noise-free recovery across 10 solver seeds ==");
    let truth = lorenz_truth();
    let t0 = Instant::now();
    let mut wins = 0;
    for seed in 0..10u64 {
        let mut cfg = scenario(
            ObjectiveSpec::Linf { lambda: None, pso: PsoSettings::default() },
            0.0,
            5.0,
        );
        cfg.seeds.solver_seed = 1000 + seed * 977;
        let t = Instant::now();
        let out = run_scenario(&cfg).unwrap();
        let model = out[0].model.as_ref().unwrap();
        let xi = model.coefficient_vectors();
        let mut max_err = 0.0f64;
        for k in 0..3 {
            for j in 0..10 {
                max_err = max_err.max((xi[k][j] - truth[k][j]).abs());
            }
        }
        let support_ok = model.fits[0].terms.iter().map(|t| t.index).collect::<Vec<_>>() == vec![1, 2]
            && model.fits[1].terms.iter().map(|t| t.index).collect::<Vec<_>>() == vec![1, 2, 6]
            && model.fits[2].terms.iter().map(|t| t.index).collect::<Vec<_>>() == vec![3, 5];
        if support_ok && max_err < 1e-3 {
            wins += 1;
        }
        println!(
            "seed {seed}: support_ok={support_ok} max_coeff_err={max_err:.2e} ({:.2?})",
            t.elapsed()
        );
    }
    println!("recovered on {wins}/10 seeds, total {:.2?}", t0.elapsed());
}

fn oracle_trials() {
    println!("== PSO vs exhaustive oracle on 50 random instances ==");
    let t0 = Instant::now();
    let mut hits = 0;
    for trial in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let (n, m) = (40, 8);
        let theta = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let mut xi_true = DVector::zeros(m);
        let i = rng.gen_range(0..m);
        let mut j = rng.gen_range(0..m);
        while j == i {
            j = rng.gen_range(0..m);
        }
        let mag = |rng: &mut ChaCha8Rng| {
            let v: f64 = rng.gen_range(1.0..3.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        };
        xi_true[i] = mag(&mut rng);
        xi_true[j] = mag(&mut rng);
        let mut y = &theta * &xi_true;
        let scale = y.amax();
        for v in y.iter_mut() {
            let draw: f64 = StandardNormal.sample(&mut rng);
            *v += 0.05 * scale * draw;
        }
        let lambda = 0.05 * y.amax();
        let pso = PsoConfig::new(Vec::new()).with_seed(trial * 13 + 1);
        let got = linf_sparse_solve(&theta, &y, lambda, &pso).unwrap();
        let oracle = exhaustive_sparse_oracle(&theta, &y, lambda, ObjectiveKind::Linf, m).unwrap();
        let rel = (got.objective_value - oracle.objective_value) / oracle.objective_value.abs();
        if rel <= 1e-6 {
            hits += 1;
        } else {
            println!(
                "  trial {trial}: pso {} vs oracle {} (rel gap {rel:.2e}) supports {:?} vs {:?}",
                got.objective_value, oracle.objective_value, got.support, oracle.support
            );
        }
    }
    println!("matched oracle on {hits}/50 ({:.2?})", t0.elapsed());
}

fn margin_sweep() {
    println!("== T1 sigma=0.001 cell, 10 replicates, horizon sensitivity ==");
    for objective in [
        ObjectiveSpec::L2 { threshold: 0.1 },
        ObjectiveSpec::Linf { lambda: None, pso: PsoSettings::default() },
    ] {
        for horizon in [40.0, 42.5, 45.0] {
            let mut cfg = scenario(objective.clone(), 0.001, horizon);
            cfg.replicates = 10;
            let t = Instant::now();
            let out = run_scenario(&cfg).unwrap();
            let mut mins = [f64::INFINITY; 3];
            let mut means = [0.0f64; 3];
            for o in &out {
                for k in 0..3 {
                    mins[k] = mins[k].min(o.record.rmse[k]);
                    means[k] += o.record.rmse[k] / 10.0;
                }
            }
            println!(
                "{:?} horizon={horizon}: mean rmse = {:.3?}, min over replicates = {:.3?} ({:.2?})",
                cfg.objective.kind(),
                means,
                mins,
                t.elapsed()
            );
        }
    }
}

fn main() {
    let section = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    if section == "horizon" || section == "all" {
        horizon_sweep();
    }
    if section == "margin" {
        margin_sweep();
    }
    if section == "chen" || section == "all" {
        chen_bounds();
    }
    if section == "linf" || section == "all" {
        linf_noise_free();
    }
    if section == "oracle" || section == "all" {
        oracle_trials();
    }
}
