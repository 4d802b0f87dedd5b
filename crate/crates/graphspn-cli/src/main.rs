use clap::{Parser, Subcommand};
use graphspn_cli::commands;
use graphspn_cli::config::{parse_levels, ExperimentConfig, ModelKind};
use graphspn_cli::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "graphspn",
    about = "Semantic-map experiments with graph-instantiated sum-product networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON); defaults to the built-in config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; every derived artifact is reproducible from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory holding dataset/, models/, and results/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ModelSelection {
    /// Comma-separated subset of: graphspn, mrf2, mrf3.
    #[arg(long, value_delimiter = ',', default_values = ["graphspn", "mrf2", "mrf3"])]
    models: Vec<ModelKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset (clean, noisy, and placeholder graphs).
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train the selected models on the training buildings.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        selection: ModelSelection,
    },
    /// Evaluate noisy-evidence classification on the test building.
    EvalClass {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        selection: ModelSelection,
        /// Noise levels, as a comma list (2,5) or range (1..6).
        #[arg(long, default_value = "1..6")]
        levels: String,
    },
    /// Evaluate placeholder inference on the test building.
    EvalPlaceholders {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        selection: ModelSelection,
        #[arg(long, default_value = "1..6")]
        levels: String,
    },
    /// Evaluate novelty detection from certain label assignments.
    EvalNovelty {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        selection: ModelSelection,
    },
    /// Print a graph (optionally with posteriors) as DOT.
    ExportDot {
        /// Graph JSON file.
        graph: PathBuf,
        /// Optional posterior JSON ({node id: [probabilities]}).
        #[arg(long)]
        posteriors: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn dedup_models(models: &[ModelKind]) -> Vec<ModelKind> {
    let mut out: Vec<ModelKind> = Vec::new();
    for &m in models {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { common } => {
            let config = load_config(&common.config)?;
            let summary = commands::cmd_gen(&config, common.seed, &common.out)?;
            println!(
                "generated {} graphs ({} files) under {}",
                summary.graphs_written,
                summary.files_written,
                commands::dataset_dir(&common.out).display()
            );
        }
        Command::Train { common, selection } => {
            let config = load_config(&common.config)?;
            let models = dedup_models(&selection.models);
            commands::cmd_train(&config, common.seed, &common.out, &models)?;
            println!(
                "trained {} for test building {} under {}",
                models.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
                config.test_building,
                commands::models_dir(&common.out, &config.test_building).display()
            );
        }
        Command::EvalClass { common, selection, levels } => {
            let config = load_config(&common.config)?;
            let levels = parse_levels(&levels)?;
            let models = dedup_models(&selection.models);
            let rows =
                commands::cmd_eval_classification(&config, common.seed, &common.out, &models, &levels)?;
            for ((model, level), accuracy) in commands::summarize(&rows) {
                println!("{model} level {level}: accuracy {accuracy:.4}");
            }
        }
        Command::EvalPlaceholders { common, selection, levels } => {
            let config = load_config(&common.config)?;
            let levels = parse_levels(&levels)?;
            let models = dedup_models(&selection.models);
            let rows =
                commands::cmd_eval_placeholders(&config, common.seed, &common.out, &models, &levels)?;
            for ((model, level), accuracy) in commands::summarize(&rows) {
                println!("{model} level {level}: placeholder accuracy {accuracy:.4}");
            }
        }
        Command::EvalNovelty { common, selection } => {
            let config = load_config(&common.config)?;
            let models = dedup_models(&selection.models);
            let report = commands::cmd_eval_novelty(&config, common.seed, &common.out, &models)?;
            for (model, curve) in &report.curves {
                println!("{model}: auc {:.4}", curve.auc);
            }
        }
        Command::ExportDot { graph, posteriors } => {
            let text = commands::cmd_export_dot(&graph, posteriors.as_deref())?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
