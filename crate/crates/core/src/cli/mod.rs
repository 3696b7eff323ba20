//! The `bgga` command line.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    bifurcation_sweep, compare_variants, meta_optimize, run_ensemble, ChaseCenters, ChaseLabel,
};
use crate::objectives::ObjectiveRegistry;

pub use config::Document;

#[derive(Debug, Parser)]
#[command(name = "bgga", version, about = "Gender genetic algorithms with learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble of one variant on the configured objective.
    Run(CommonArgs),
    /// Switch fraction over the decay-rate grid.
    Sweep(CommonArgs),
    /// Tune the mutation schedule with an outer GGA.
    Meta(CommonArgs),
    /// Same ensemble for every configured variant, with pairwise z-tests.
    Compare(CommonArgs),
    /// Print the fully resolved configuration.
    Defaults(DefaultsArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration; built-in defaults fill anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set engine.variant=GGA`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Base seed; shorthand for `--set core.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DefaultsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Exit status for each failure class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::Parse { .. } | Error::Schema(_) | Error::Csv(_) => 4,
        Error::Config(_) | Error::UnknownObjective(_) | Error::Usage(_) => 5,
        Error::Evaluation(_) | Error::Generation { .. } | Error::Run { .. } => 6,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bgga: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Defaults(a) => {
            let doc = Document::load(a.config.as_deref(), &a.overrides)?;
            println!("{}", serde_json::to_string_pretty(&doc).expect("plain struct"));
            return Ok(());
        }
        Command::Run(a) | Command::Sweep(a) | Command::Meta(a) | Command::Compare(a) => a,
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("core.seed={seed}"));
    }
    let doc = Document::load(common.config.as_deref(), &overrides)?;
    std::fs::create_dir_all(&common.out_dir).map_err(|e| Error::io(&common.out_dir, e))?;
    let task = || match &cli.command {
        Command::Run(_) => cmd_run(&doc, &common.out_dir),
        Command::Sweep(_) => cmd_sweep(&doc, &common.out_dir),
        Command::Meta(_) => cmd_meta(&doc, &common.out_dir),
        Command::Compare(_) => cmd_compare(&doc, &common.out_dir),
        Command::Defaults(_) => unreachable!(),
    };
    match common.jobs {
        Some(0) => Err(Error::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} workers: {e}")))?
            .install(task),
        None => task(),
    }
}

#[derive(Serialize)]
struct Summary<'a, R: Serialize> {
    command: &'a str,
    config: &'a Document,
    results: R,
}

fn write_summary<R: Serialize>(command: &str, doc: &Document, results: R, dir: &Path) -> Result<()> {
    output::write_json(
        &Summary {
            command,
            config: doc,
            results,
        },
        &dir.join("summary.json"),
    )
}

fn label_counts(labels: &[ChaseLabel]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        let key = serde_json::to_value(l).expect("unit variant");
        *counts.entry(key.as_str().unwrap_or_default().to_owned()).or_insert(0) += 1;
    }
    counts
}

fn cmd_run(doc: &Document, dir: &Path) -> Result<()> {
    let config = doc.evolution_config()?;
    let objective = doc.objective(&ObjectiveRegistry::with_builtins())?;
    let result = run_ensemble(&config, objective.as_ref(), doc.experiment.n_runs, config.seed)?;
    output::write_history_csv(&result, &dir.join("history.csv"))?;
    let labels = doc.perturbation().ok().map(|p| {
        label_counts(&result.final_labels(&ChaseCenters::for_params(&p), doc.experiment.chase_radius))
    });
    let results = json!({
        "n_runs": result.n_runs,
        "base_seed": result.base_seed,
        "final_mean_best_fitness": result.final_mean(),
        "final_stderr_best_fitness": result.final_stderr(),
        "final_mean_best_point": result.mean_best_point.last(),
        "mating_fallbacks": result.mating_fallbacks(),
        "final_chase_labels": labels,
    });
    write_summary("run", doc, results, dir)
}

fn cmd_sweep(doc: &Document, dir: &Path) -> Result<()> {
    let config = doc.evolution_config()?;
    let params = doc.perturbation()?;
    let x = &doc.experiment;
    let report = bifurcation_sweep(
        &config,
        &params,
        &x.lambda_grid,
        x.n_runs,
        config.seed,
        x.chase_radius,
    )?;
    output::write_bifurcation_csv(&report, &dir.join("bifurcation.csv"))?;
    for (lambda, ens) in report.lambda_grid.iter().zip(&report.ensembles) {
        output::write_history_csv(ens, &dir.join(format!("history_lambda_{lambda}.csv")))?;
    }
    let results = json!({
        "report": report,
        "monotone_within_2se": report.is_monotone_within(2.0),
    });
    write_summary("sweep", doc, results, dir)
}

fn cmd_compare(doc: &Document, dir: &Path) -> Result<()> {
    let config = doc.evolution_config()?;
    let objective = doc.objective(&ObjectiveRegistry::with_builtins())?;
    let cmp = compare_variants(
        objective.as_ref(),
        &doc.experiment.variants,
        &config,
        doc.experiment.n_runs,
        config.seed,
    )?;
    output::write_comparison_csv(&cmp, &dir.join("comparison.csv"))?;
    for (row, ens) in cmp.rows.iter().zip(&cmp.ensembles) {
        output::write_history_csv(ens, &dir.join(format!("history_{}.csv", row.variant.name())))?;
    }
    write_summary("compare", doc, &cmp, dir)
}

fn cmd_meta(doc: &Document, dir: &Path) -> Result<()> {
    let config = doc.evolution_config()?;
    let result = meta_optimize(&config, &doc.experiment.meta, config.seed)?;
    output::write_series_csv(
        ["generation", "best_fitness"],
        &result.outer_best,
        &dir.join("meta_history.csv"),
    )?;
    write_summary("meta", doc, &result, dir)
}
