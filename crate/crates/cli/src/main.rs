use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use latsearch_cli::commands::{
    ablate::{cmd_ablate, Axis},
    checkpoint_path, cmd_build_dataset, cmd_eval_reward, cmd_train_reward, dataset_dir,
    plot::cmd_plot,
    search::cmd_search,
};
use latsearch_cli::config::{Method, RunConfig};
use latsearch_cli::pipeline::Pipeline;
use latsearch_core::reward::RewardNet;

const OUT_ENV: &str = "LATSEARCH_OUT";

#[derive(Debug, Args)]
struct CommonArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $LATSEARCH_OUT or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the search method (vanilla|latsearch|best_of_n|beam).
    #[arg(long, global = true)]
    method: Option<String>,
    /// Override the number of repetitions.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Size of the worker pool (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(
    name = "latsearch",
    version,
    about = "Latent reward-guided diffusion search benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the latent reward dataset.
    BuildDataset,
    /// Train the latent reward model on a built dataset.
    TrainReward {
        /// Dataset directory (default: `<out>/dataset`).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate held-out preference accuracy of a checkpoint.
    EvalReward {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Checkpoint path (default: `<out>/reward.ltsr`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Benchmark a search method with statistics and traces.
    Search {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sweep one ablation axis (credit|temperature|schedule|loss).
    Ablate {
        #[arg(long)]
        axis: String,
    },
    /// Emit plot data and SVG charts from reports and accuracy tables.
    Plot {
        /// Report JSON files and/or accuracy CSV files.
        inputs: Vec<PathBuf>,
    },
}

fn load_config(common: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.run.master_seed = seed;
    }
    if let Some(method) = &common.method {
        config.run.method = Method::parse(method)
            .ok_or_else(|| anyhow::anyhow!("unknown method '{method}'"))?;
    }
    if let Some(reps) = common.reps {
        config.run.repetitions = reps;
    }
    Ok(config)
}

fn out_dir(common: &CommonArgs) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli) -> Result<(), (u8, anyhow::Error)> {
    let config = load_config(&cli.common).map_err(|e| (2, e))?;
    let out = out_dir(&cli.common);
    std::fs::create_dir_all(&out).map_err(|e| (3, e.into()))?;

    if let Command::Plot { inputs } = &cli.command {
        return cmd_plot(inputs, &out).map_err(|e| (3, e));
    }

    let pipeline = Pipeline::assemble(config).map_err(|e| (2, e))?;
    match &cli.command {
        Command::BuildDataset => {
            cmd_build_dataset(&pipeline, &out).map_err(|e| (3, e))?;
        }
        Command::TrainReward { dataset } => {
            let dataset = dataset.clone().unwrap_or_else(|| dataset_dir(&out));
            cmd_train_reward(&pipeline, &dataset, &out).map_err(|e| (3, e))?;
        }
        Command::EvalReward {
            dataset,
            checkpoint,
        } => {
            let dataset = dataset.clone().unwrap_or_else(|| dataset_dir(&out));
            let checkpoint = checkpoint.clone().unwrap_or_else(|| checkpoint_path(&out));
            cmd_eval_reward(&pipeline, &checkpoint, &dataset, &out).map_err(|e| (3, e))?;
        }
        Command::Search { checkpoint } => {
            let method = pipeline.config.run.method;
            let needs_model = match method {
                Method::Vanilla => false,
                Method::BestOfN => pipeline.config.run.bon_judge == "model",
                Method::Latsearch | Method::Beam => true,
            };
            let net = if !needs_model {
                None
            } else {
                let path = checkpoint.clone().unwrap_or_else(|| checkpoint_path(&out));
                if !path.exists() {
                    return Err((
                        2,
                        anyhow::anyhow!(
                            "method '{}' needs a reward model checkpoint at {}; \
                             run build-dataset and train-reward first",
                            method.name(),
                            path.display()
                        ),
                    ));
                }
                Some(RewardNet::load(&path).map_err(|e| (3, e.into()))?.0)
            };
            cmd_search(
                &pipeline,
                method,
                pipeline.config.run.repetitions,
                net.as_ref(),
                &out,
            )
            .map_err(|e| (3, e))?;
        }
        Command::Ablate { axis } => {
            let axis = Axis::parse(axis)
                .ok_or_else(|| (2u8, anyhow::anyhow!("unknown ablation axis '{axis}'")))?;
            cmd_ablate(&pipeline, axis, pipeline.config.run.repetitions, &out)
                .map_err(|e| (3, e))?;
        }
        Command::Plot { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.workers.unwrap_or(0))
        .build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build worker pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
