use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarm_harness::{evaluate, load_policy, replay_dump, run_training, HarnessError, RunConfig};

#[derive(Parser)]
#[command(name = "swarm", version, about = "Train, evaluate and replay swarm policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy; writes curves and checkpoints to the output directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with mean actions and print metrics as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `eval_episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// Defaults to `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump one mean-action episode as JSON lines.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                config.master_seed = seed;
            }
            if let Some(out) = out {
                config.output_directory = out;
            }
            let summary = run_training(&config)?;
            if let Some(last) = summary.records.last() {
                println!(
                    "trained {} iterations, last mean return {}",
                    summary.records.len(),
                    last.mean_return
                );
            }
            println!("final checkpoint: {}", summary.final_checkpoint().display());
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            seed,
        } => {
            let config = RunConfig::load(&config)?;
            let params = load_policy(&checkpoint, &config)?;
            let episodes = episodes.unwrap_or(config.eval_episodes);
            if episodes == 0 {
                return Err(HarnessError::Config("--episodes must be >= 1".into()));
            }
            let metrics = evaluate(&params, &config, episodes, seed.unwrap_or(config.master_seed))?;
            println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
        }
        Command::Replay {
            checkpoint,
            config,
            seed,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let params = load_policy(&checkpoint, &config)?;
            let summary = replay_dump(&params, &config, seed, &out)?;
            println!("wrote {} lines to {}, return {}", summary.lines, out.display(), summary.total_reward);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
