//! CLI for the benchmark harness: run sweep tables or single scenario
//! configs, and pretty-print identified models.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sindy_linf::harness::{
    emit_records_csv, run_scenario, run_table, write_table_outputs, ScenarioConfig, TableId,
    TableOptions, TableResult,
};
use sindy_linf::CoefficientsDocument;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "sindy",
    about = "Sparse system identification benchmarks with L2 and L-infinity objectives",
    long_about = "Runs the benchmark experiment matrix (tables 1-5) or a single JSON \
                  scenario config, and inspects identified-model JSON files. Cells run \
                  in parallel on the rayon pool; set RAYON_NUM_THREADS to control the \
                  thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark table or a scenario config file.
    Run {
        /// Table number 1-5.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5), conflicts_with = "config")]
        table: Option<u8>,
        /// Path to a ScenarioConfig JSON file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Replicates per cell (tables only; config files carry their own).
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Base seed for table runs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pretty-print an identified-model JSON file as equations.
    Inspect {
        /// Path to a coefficients JSON file.
        #[arg(long)]
        coeffs: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            table: Some(table),
            config: None,
            out,
            replicates,
            seed,
        } => run_table_command(table, &out, replicates, seed),
        Command::Run {
            table: None,
            config: Some(config),
            out,
            ..
        } => run_config_command(&config, &out),
        Command::Run { .. } => bail!("pass exactly one of --table or --config"),
        Command::Inspect { coeffs } => inspect_command(&coeffs),
    }
}

fn run_table_command(table: u8, out: &PathBuf, replicates: usize, seed: u64) -> Result<()> {
    let id = TableId::from_index(table as usize).expect("clap validated the range");
    let opts = TableOptions {
        replicates,
        base_seed: seed,
        ..TableOptions::default()
    };
    eprintln!("running {id} with {replicates} replicate(s), base seed {seed}...");
    let result: TableResult = run_table(id, &opts)?;
    write_table_outputs(&result, out)?;
    let n = id.index();
    println!(
        "wrote {}/table_t{n}.csv, table_t{n}.md, records_t{n}.csv",
        out.display()
    );
    Ok(())
}

fn run_config_command(config_path: &PathBuf, out: &PathBuf) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    let outcomes = run_scenario(&config)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    // records CSV via a single-cell table result
    let result = TableResult {
        table: TableId::T1,
        cells: vec![sindy_linf::harness::CellResult {
            key: config.id.clone(),
            l2: outcomes
                .iter()
                .filter(|o| o.record.objective_kind == sindy_linf::ObjectiveKind::L2)
                .map(|o| o.record.clone())
                .collect(),
            linf: outcomes
                .iter()
                .filter(|o| o.record.objective_kind == sindy_linf::ObjectiveKind::Linf)
                .map(|o| o.record.clone())
                .collect(),
        }],
    };
    let records = emit_records_csv(&result)?;
    let records_path = out.join("records.csv");
    fs::write(&records_path, records)
        .with_context(|| format!("writing {}", records_path.display()))?;

    let mut model_files = 0;
    for outcome in &outcomes {
        if let Some(model) = &outcome.model {
            let path = out.join(format!(
                "coeffs_{}_r{}.json",
                sanitize(&config.id),
                outcome.record.replicate
            ));
            fs::write(&path, model.to_json()?)
                .with_context(|| format!("writing {}", path.display()))?;
            model_files += 1;
        }
        if let Some(err) = &outcome.record.error {
            eprintln!("replicate {} failed: {err}", outcome.record.replicate);
        }
    }
    println!(
        "wrote {} and {model_files} coefficient file(s) to {}",
        records_path.display(),
        out.display()
    );
    Ok(())
}

fn inspect_command(coeffs_path: &PathBuf) -> Result<()> {
    let text = fs::read_to_string(coeffs_path)
        .with_context(|| format!("reading {}", coeffs_path.display()))?;
    let doc = CoefficientsDocument::from_json(&text)?;
    println!(
        "identified model ({} dimensions, dictionary degree {}):",
        doc.system_dimension, doc.dictionary_degree
    );
    for (fit, equation) in doc.fits.iter().zip(doc.equations()) {
        println!("  {equation}");
        println!(
            "    [{} | lambda = {} | objective = {:.6} | {} nonzero term(s)]",
            fit.objective_kind,
            fit.lambda,
            fit.objective_value,
            fit.terms.len()
        );
    }
    Ok(())
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
