//! Command-line interface: dataset statistics, training, evaluation,
//! cross-validation, benchmarking, and synthetic-data generation.
//!
//! Exit codes: 0 on success, 1 on runtime failures (divergence, mismatched
//! checkpoint), 2 on usage and IO errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use intransic::dataset::{
    read_dataset, write_raw, AggregatedMatchup, Dataset, PlayerTable,
};
use intransic::evaluation::{
    cross_validate, run_benchmark, test_accuracy, ExperimentReport, GridPoint,
};
use intransic::intransitivity::{stats, IntransReport};
use intransic::models::{load_checkpoint, save_checkpoint, ModelKind};
use intransic::synth::{generate, SynthSpec};
use intransic::training::{train_model, TrainConfig};
use intransic::Error;

#[derive(Parser)]
#[command(
    name = "intransic",
    version,
    about = "Pairwise matchup modeling with intransitivity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Naive,
    Bt,
    Bci,
    Bcd,
    General,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Naive => ModelKind::Naive,
            ModelArg::Bt => ModelKind::Bt,
            ModelArg::Bci => ModelKind::Bci,
            ModelArg::Bcd => ModelKind::Bcd,
            ModelArg::General => ModelKind::General,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum OutputFormat {
    #[default]
    Table,
    Json,
}

#[derive(Debug, Clone, Parser)]
struct TrainFlags {
    /// Embedding dimension (general needs >= 2; ignored by naive and bt)
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Shared regularization weight for all three terms
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Override for the per-player-norm regularizer weight
    #[arg(long)]
    lambda1: Option<f64>,
    /// Override for the interaction-matrix regularizer weight
    #[arg(long)]
    lambda2: Option<f64>,
    /// Override for the strength-matrix regularizer weight
    #[arg(long)]
    lambda3: Option<f64>,
    /// SGD learning rate
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Maximum training epochs (one epoch = one update per training tuple)
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Early-stop patience in epochs without validation improvement
    #[arg(long, default_value_t = 20)]
    patience: usize,
    /// Fraction of training outcomes held out for validation
    #[arg(long, default_value_t = 0.1)]
    eval_fraction: f64,
    /// Half-width of the uniform parameter initialization
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
}

impl TrainFlags {
    fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            lambda1: self.lambda1.unwrap_or(self.lambda),
            lambda2: self.lambda2.unwrap_or(self.lambda),
            lambda3: self.lambda3.unwrap_or(self.lambda),
            seed,
            patience: self.patience,
            eval_fraction: self.eval_fraction,
            dim: self.dim,
            init_scale: self.init_scale,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print intransitivity statistics for a dataset
    Stats {
        dataset: PathBuf,
        /// Maximum number of elementary cycles to enumerate
        #[arg(long, default_value_t = 10_000)]
        cap: usize,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Train a model and write a checkpoint
    Train {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint output path
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV training trace (epoch,objective,val_accuracy)
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Score a checkpoint against a dataset
    Evaluate {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-validate one model kind with grid search
    Cv {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Fold count (>= 3)
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Candidate embedding dimensions
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 5, 10, 50])]
        dims: Vec<usize>,
        /// Candidate shared regularization weights
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1e-4, 1e-3, 1e-2])]
        lambdas: Vec<f64>,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Cross-validate several models and print a comparison table
    Bench {
        dataset: PathBuf,
        /// Models to compare, in column order
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = vec![ModelArg::Naive, ModelArg::Bt, ModelArg::Bci, ModelArg::General])]
        models: Vec<ModelArg>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 5, 10, 50])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1e-4, 1e-3, 1e-2])]
        lambdas: Vec<f64>,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Generate a synthetic dataset with planted cyclic cliques
    Synth {
        /// Cyclic clique sizes, comma separated (all share one pivot player)
        #[arg(long, value_delimiter = ',', required = true)]
        cycles: Vec<usize>,
        /// Outcomes per planted pair
        #[arg(long, default_value_t = 100)]
        per_pair: u64,
        /// Per-outcome flip probability in [0, 0.5)
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path (raw winner,loser format)
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for usage and IO problems, 1 for runtime failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::MalformedLine { .. }
        | Error::BadCheckpoint { .. }
        | Error::DuplicateLabel(_)
        | Error::UnknownPlayerRow { .. }
        | Error::SelfMatch { .. }
        | Error::InvalidFoldCount { .. }
        | Error::InvalidDimension { .. }
        | Error::UnsupportedKind(_)
        | Error::InvalidConfig(_)
        | Error::EmptyGrid
        | Error::InvalidSynthSpec(_)
        | Error::EmptyDataset
        | Error::EmptyTestSet => 2,
        Error::UnknownPlayer(_)
        | Error::DimMismatch { .. }
        | Error::PlayerMismatch(_)
        | Error::NonFiniteParameters { .. }
        | Error::InvalidEdge(_) => 1,
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn grid_from(dims: &[usize], lambdas: &[f64]) -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for &dim in dims {
        for &lambda in lambdas {
            grid.push(GridPoint { dim, lambda });
        }
    }
    grid
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Stats { dataset, cap, format } => cmd_stats(&dataset, cap, format),
        Command::Train {
            dataset,
            model,
            flags,
            seed,
            out,
            trace_out,
        } => cmd_train(&dataset, model.into(), &flags, seed, &out, trace_out.as_deref()),
        Command::Evaluate {
            checkpoint,
            dataset,
            seed,
        } => cmd_evaluate(&checkpoint, &dataset, seed),
        Command::Cv {
            dataset,
            model,
            k,
            dims,
            lambdas,
            flags,
            seed,
            format,
        } => cmd_cv(&dataset, model.into(), k, &dims, &lambdas, &flags, seed, format),
        Command::Bench {
            dataset,
            models,
            k,
            dims,
            lambdas,
            flags,
            seed,
            format,
        } => {
            let kinds: Vec<ModelKind> = models.into_iter().map(ModelKind::from).collect();
            cmd_bench(&dataset, &kinds, k, &dims, &lambdas, &flags, seed, format)
        }
        Command::Synth {
            cycles,
            per_pair,
            noise,
            seed,
            out,
        } => cmd_synth(&cycles, per_pair, noise, seed, &out),
    }
}

fn pct(ratio: f64) -> String {
    format!("{:.2}%", ratio * 100.0)
}

fn cmd_stats(path: &Path, cap: usize, format: OutputFormat) -> Result<(), Error> {
    let d = read_dataset(path)?;
    let report = stats(&d, cap);
    let name = dataset_name(path);
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&stats_json(&name, &d, &report, cap))?),
        OutputFormat::Table => {
            println!(
                "{:<20} {:>8} {:>9} {:>10} {:>10} {:>16}",
                "DATASET", "PLAYERS", "RECORDS", "ISINTRANS", "INTRANS@3", "PLAYERINTRANS@3"
            );
            println!(
                "{:<20} {:>8} {:>9} {:>10} {:>10} {:>16}",
                name,
                report.n_players,
                d.total_outcomes(),
                if report.is_intrans { "yes" } else { "no" },
                pct(report.intrans_at_3),
                format!("{}/{}", report.players_in_triangles.len(), report.n_players),
            );
            println!(
                "triangles: {}; elementary cycles found: {}{} (cap {})",
                report.triangles,
                report.cycles_found.len(),
                if report.truncated { "+ (truncated)" } else { "" },
                cap
            );
        }
    }
    Ok(())
}

fn stats_json(name: &str, d: &Dataset, report: &IntransReport, cap: usize) -> serde_json::Value {
    let label = |p: &intransic::dataset::PlayerId| -> String {
        d.players.label(*p).unwrap_or("?").to_owned()
    };
    json!({
        "dataset": name,
        "players": report.n_players,
        "pairs": d.records.len(),
        "outcomes": d.total_outcomes(),
        "is_intrans": report.is_intrans,
        "triangles": report.triangles,
        "intrans_at_3": report.intrans_at_3,
        "players_in_triangles": report.players_in_triangles.iter().map(label).collect::<Vec<_>>(),
        "cycles": report
            .cycles_found
            .iter()
            .map(|c| c.iter().map(label).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "truncated": report.truncated,
        "cap": cap,
    })
}

fn cmd_train(
    path: &Path,
    kind: ModelKind,
    flags: &TrainFlags,
    seed: u64,
    out: &Path,
    trace_out: Option<&Path>,
) -> Result<(), Error> {
    let d = read_dataset(path)?;
    let cfg = flags.to_config(seed);
    let (model, trace) = train_model(kind, &d, &cfg)?;
    let final_objective = intransic::training::objective(&model, &d, &cfg)?;
    let train_accuracy = test_accuracy(&model, &d, seed)?;
    save_checkpoint(&model, &d.players, out)?;
    if let Some(trace_path) = trace_out {
        let file = std::fs::File::create(trace_path)?;
        trace.write_csv(file)?;
    }
    println!(
        "trained {kind} on {}: {} players, {} pairs, {} outcomes",
        dataset_name(path),
        d.num_players(),
        d.records.len(),
        d.total_outcomes()
    );
    if !trace.epochs.is_empty() {
        println!(
            "stopped after {} epochs ({}), best epoch {}",
            trace.epochs.len(),
            trace.stop,
            trace.best_epoch
        );
    }
    println!("final objective: {final_objective:.6}");
    println!("train accuracy: {train_accuracy:.4}");
    println!("wrote checkpoint {}", out.display());
    Ok(())
}

/// Re-indexes a dataset into the checkpoint's player table; every dataset
/// label must exist in the checkpoint.
fn remap_to(d: &Dataset, target: &PlayerTable) -> Result<Dataset, Error> {
    let mut records = Vec::with_capacity(d.records.len());
    let map_id = |p| -> Result<_, Error> {
        let label = d.players.label(p).ok_or(Error::UnknownPlayer(p.0))?;
        target
            .id_of(label)
            .ok_or_else(|| Error::PlayerMismatch(format!("player {label:?} not in checkpoint")))
    };
    for r in &d.records {
        let a = map_id(r.a)?;
        let b = map_id(r.b)?;
        let (a, b, wins_a, wins_b) = if a.0 < b.0 {
            (a, b, r.wins_a, r.wins_b)
        } else {
            (b, a, r.wins_b, r.wins_a)
        };
        records.push(AggregatedMatchup { a, b, wins_a, wins_b });
    }
    records.sort_by_key(|r| (r.a, r.b));
    Ok(Dataset {
        players: target.clone(),
        records,
    })
}

fn cmd_evaluate(checkpoint: &Path, dataset: &Path, seed: u64) -> Result<(), Error> {
    let (model, players) = load_checkpoint(checkpoint)?;
    let d = read_dataset(dataset)?;
    let remapped = remap_to(&d, &players)?;
    let accuracy = test_accuracy(&model, &remapped, seed)?;
    println!(
        "{} on {}: accuracy {accuracy:.4}",
        model.kind(),
        dataset_name(dataset)
    );
    Ok(())
}

fn print_report_table(report: &ExperimentReport) {
    println!(
        "dataset={} model={} k={} seed={}",
        report.dataset, report.model, report.k, report.seed
    );
    println!("{:<6} {:>9} {:>5} {:>9} {:>13}", "FOLD", "ACCURACY", "DIM", "LAMBDA", "VAL_ACCURACY");
    for f in &report.folds {
        println!(
            "{:<6} {:>9.4} {:>5} {:>9} {:>13}",
            f.fold,
            f.accuracy,
            f.dim,
            f.lambda,
            f.val_accuracy.map_or("-".to_owned(), |v| format!("{v:.4}")),
        );
    }
    println!(
        "mean accuracy: {:.4} ± {:.4} (chosen d={}, lambda={})",
        report.mean_accuracy, report.std_accuracy, report.chosen_dim, report.chosen_lambda
    );
    let i = &report.intransitivity;
    println!(
        "intransitivity: isIntrans={} Intrans@3={} PlayerIntrans@3={}/{}",
        if i.is_intrans { "yes" } else { "no" },
        pct(i.intrans_at_3),
        i.players_in_triangles,
        i.n_players,
    );
}

#[allow(clippy::too_many_arguments)]
fn cmd_cv(
    path: &Path,
    kind: ModelKind,
    k: usize,
    dims: &[usize],
    lambdas: &[f64],
    flags: &TrainFlags,
    seed: u64,
    format: OutputFormat,
) -> Result<(), Error> {
    let d = read_dataset(path)?;
    let grid = grid_from(dims, lambdas);
    let cfg = flags.to_config(seed);
    let report = cross_validate(kind, &d, &dataset_name(path), k, &grid, &cfg, seed)?;
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        OutputFormat::Table => print_report_table(&report),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    path: &Path,
    kinds: &[ModelKind],
    k: usize,
    dims: &[usize],
    lambdas: &[f64],
    flags: &TrainFlags,
    seed: u64,
    format: OutputFormat,
) -> Result<(), Error> {
    let d = read_dataset(path)?;
    let grid = grid_from(dims, lambdas);
    let cfg = flags.to_config(seed);
    let name = dataset_name(path);
    let reports = run_benchmark(&d, &name, kinds, k, &grid, &cfg, seed)?;
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&reports)?),
        OutputFormat::Table => {
            print!("{:<20}", "DATASET");
            for r in &reports {
                print!(" {:>17}", r.model.to_string());
            }
            println!();
            print!("{name:<20}");
            for r in &reports {
                print!(" {:>17}", format!("{:.4} ± {:.4}", r.mean_accuracy, r.std_accuracy));
            }
            println!();
            for r in &reports {
                println!(
                    "{}: chosen d={}, lambda={}",
                    r.model, r.chosen_dim, r.chosen_lambda
                );
            }
            if let Some(first) = reports.first() {
                let i = &first.intransitivity;
                println!(
                    "intransitivity: isIntrans={} Intrans@3={} PlayerIntrans@3={}/{}",
                    if i.is_intrans { "yes" } else { "no" },
                    pct(i.intrans_at_3),
                    i.players_in_triangles,
                    i.n_players,
                );
            }
        }
    }
    Ok(())
}

fn cmd_synth(cycles: &[usize], per_pair: u64, noise: f64, seed: u64, out: &Path) -> Result<(), Error> {
    let spec = SynthSpec {
        cycle_sizes: cycles.to_vec(),
        outcomes_per_pair: per_pair,
        noise,
        seed,
    };
    let output = generate(&spec)?;
    write_raw(&output.dataset.players, &output.outcomes, out)?;
    println!(
        "wrote {}: {} players, {} pairs, {} outcomes",
        out.display(),
        output.dataset.num_players(),
        output.dataset.records.len(),
        output.dataset.total_outcomes()
    );
    println!(
        "planted: triangles={} intrans_at_3={} players_in_triangles={}/{}",
        output.planted_triangles,
        pct(output.planted_intrans_at_3),
        output.planted_players_in_triangles,
        output.dataset.num_players(),
    );
    Ok(())
}
