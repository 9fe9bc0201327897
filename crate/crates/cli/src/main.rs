//! `cheby-bench`: run experiment grids, tabulate results, check gradients,
//! slice trained models and cross-validate tabular classifiers.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 failure while
//! running (including failed gradient checks).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chebyshev_lagrange::activations::{ActivationSpec, Variant};
use chebyshev_lagrange::bench::{
    self, checkpoint, gradcheck, read_results, table, tabular, RunCell, RunConfig,
};
use chebyshev_lagrange::data::Recipe;
use chebyshev_lagrange::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cheby-bench",
    version,
    about = "Chebyshev-Lagrange activation benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate a dataset × activation × noise × seed grid.
    Run(RunArgs),
    /// Aggregate results files into mean±sd tables.
    Table(TableArgs),
    /// Finite-difference check of every tape op and activation variant.
    Gradcheck(GradcheckArgs),
    /// Evaluate a checkpoint along the x0 slice of a dataset.
    Slice(SliceArgs),
    /// Cross-validated classification of a CSV table.
    Tabular(TabularArgs),
    /// Train and save, or inspect, a model checkpoint.
    #[command(subcommand)]
    Checkpoint(CheckpointCommand),
}

#[derive(Args, Default)]
struct ModelArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    layers_per_block: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    regression_k: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    dataset: Vec<Recipe>,
    #[arg(long, value_delimiter = ',')]
    activation: Vec<Variant>,
    #[arg(long, value_delimiter = ',')]
    noise: Vec<f64>,
    /// Number of seeds (indices 0..N).
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    /// Results JSON path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "CHEBY_BENCH_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args)]
struct TableArgs {
    /// Results JSON files.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Also write the tables as CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SliceArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: Recipe,
    /// CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TabularArgs {
    csv: PathBuf,
    /// JSON tabular configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    activation: Option<Variant>,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    group_column: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CheckpointCommand {
    /// Train one model on a synthetic dataset and save it.
    Train(CheckpointTrainArgs),
    /// Print the spec and parameter count of a checkpoint.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct CheckpointTrainArgs {
    #[arg(long)]
    dataset: Recipe,
    #[arg(long)]
    activation: Variant,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Seed index.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Table(a) => table_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Slice(a) => slice_cmd(a),
        Command::Tabular(a) => tabular_cmd(a),
        Command::Checkpoint(c) => checkpoint_cmd(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn apply_model_args(m: &ModelArgs, s: &mut bench::ModelSettings) {
    if let Some(v) = m.width {
        s.width = v;
    }
    if let Some(v) = m.blocks {
        s.blocks = v;
    }
    if let Some(v) = m.layers_per_block {
        s.layers_per_block = v;
    }
    if let Some(v) = m.degree {
        s.degree = v;
    }
    if let Some(v) = m.regression_k {
        s.regression_k = v;
    }
}

fn run(a: RunArgs) -> CliResult {
    let mut config = match &a.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Failure::Usage(format!("{}: {io}", path.display())),
            other => other.into(),
        })?,
        None => {
            if a.dataset.is_empty() || a.activation.is_empty() {
                return Err(Failure::Usage(
                    "run needs --config or both --dataset and --activation".into(),
                ));
            }
            RunConfig::new(Vec::new(), Vec::new())
        }
    };
    if !a.dataset.is_empty() {
        config.datasets = a.dataset;
    }
    if !a.activation.is_empty() {
        config.activations = a.activation;
    }
    if !a.noise.is_empty() {
        config.noise_sd = a.noise;
    }
    if let Some(n) = a.seeds {
        config.seeds = (0..n).collect();
    }
    if let Some(e) = a.epochs {
        config.train.epochs = e;
    }
    apply_model_args(&a.model, &mut config.model);
    if a.out.is_some() {
        config.out = a.out;
    }
    if a.workers == Some(0) {
        return Err(Failure::Usage("--workers must be positive".into()));
    }
    let results = bench::cmd_run(&config, a.workers)?;
    let diverged = results.iter().filter(|r| r.diverged).count();
    emit(
        config.out.as_deref(),
        bench::results_to_json(&results)?.as_bytes(),
    )?;
    eprintln!("{} runs, {} diverged", results.len(), diverged);
    Ok(())
}

fn table_cmd(a: TableArgs) -> CliResult {
    let mut all = Vec::new();
    for path in &a.results {
        all.extend(read_results(path)?);
    }
    let tables = table::build_tables(&all)?;
    print!("{}", table::render_text(&tables));
    if let Some(out) = &a.out {
        let mut buf = Vec::new();
        table::write_csv(&tables, &mut buf)?;
        fs::write(out, buf)?;
    }
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs) -> CliResult {
    let report = gradcheck::cmd_gradcheck(a.seed)?;
    print!("{}", report.render_text());
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        fs::write(out, json + "\n")?;
    }
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|e| e.name.as_str()).collect();
        Err(Failure::Internal(format!(
            "gradient check failed: {}",
            names.join(", ")
        )))
    }
}

fn slice_cmd(a: SliceArgs) -> CliResult {
    let model = checkpoint::load(&a.checkpoint)?;
    let rows = bench::cmd_slice(&model, a.dataset).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    bench::write_slice_csv(&rows, &mut buf)?;
    emit(a.out.as_deref(), &buf)
}

fn tabular_cmd(a: TabularArgs) -> CliResult {
    let mut config = match &a.config {
        Some(path) => tabular::TabularConfig::from_json(&fs::read_to_string(path)?)?,
        None => tabular::TabularConfig::default(),
    };
    if let Some(v) = a.activation {
        config.activation = ActivationSpec {
            variant: v,
            ..config.activation
        };
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    let mut model = bench::ModelSettings {
        width: config.width,
        blocks: config.blocks,
        layers_per_block: config.layers_per_block,
        degree: config.activation.degree,
        regression_k: config.activation.regression_k,
    };
    apply_model_args(&a.model, &mut model);
    config.width = model.width;
    config.blocks = model.blocks;
    config.layers_per_block = model.layers_per_block;
    config.activation = config
        .activation
        .with_degree(model.degree)
        .with_regression_k(model.regression_k);
    if let Some(l) = a.label_column {
        config.label_column = l;
    }
    if a.group_column.is_some() {
        config.group_column = a.group_column;
    }
    if let Some(f) = a.folds {
        config.folds = f;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let data = tabular::read_tabular(fs::File::open(&a.csv)?, &config)?;
    let report = tabular::cmd_tabular(&data, &config)?;
    for f in &report.folds {
        match f.metrics {
            Some(m) => println!(
                "fold {:>2}  n_test={:<4} acc={:.2} sens={:.2} spec={:.2} micro_f1={:.2}",
                f.fold, f.n_test, m.accuracy, m.sensitivity, m.specificity, m.micro_f1
            ),
            None => println!("fold {:>2}  n_test={:<4} diverged", f.fold, f.n_test),
        }
    }
    if let (Some(m), Some(s)) = (report.mean, report.sd) {
        println!(
            "mean      acc={:.2}±{:.2} sens={:.2}±{:.2} spec={:.2}±{:.2} micro_f1={:.2}±{:.2}",
            m.accuracy,
            s.accuracy,
            m.sensitivity,
            s.sensitivity,
            m.specificity,
            s.specificity,
            m.micro_f1,
            s.micro_f1
        );
    }
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        fs::write(out, json + "\n")?;
    }
    Ok(())
}

fn checkpoint_cmd(c: CheckpointCommand) -> CliResult {
    match c {
        CheckpointCommand::Train(a) => {
            let mut config = RunConfig::new(vec![a.dataset], vec![a.activation]);
            config.noise_sd = vec![a.noise];
            config.seeds = vec![a.seed];
            if let Some(e) = a.epochs {
                config.train.epochs = e;
            }
            apply_model_args(&a.model, &mut config.model);
            config.validate()?;
            let cell = RunCell {
                dataset: a.dataset,
                activation: a.activation,
                noise_sd: a.noise,
                seed: a.seed,
            };
            let (model, result) = bench::run_cell(&config, cell)?;
            checkpoint::save(&model, &a.out)?;
            match result.rmse {
                Some(r) => eprintln!("saved {} (test rmse {r:.6})", a.out.display()),
                None => eprintln!("saved {} (training diverged)", a.out.display()),
            }
            Ok(())
        }
        CheckpointCommand::Inspect { path } => {
            let model = checkpoint::load(&path)?;
            let spec = serde_json::to_string_pretty(model.spec()).map_err(Error::from)?;
            println!("{spec}");
            println!("parameters: {}", model.param_count());
            Ok(())
        }
    }
}
