use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use swarm_core::policy::init_params;
use swarm_core::trpo::{derive_seed, train_iteration, UpdateOutcome};
use swarm_core::PolicyParams;

use crate::checkpoint::{Checkpoint, CheckpointFormat};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

/// Column order of `learning_curve.csv`.
pub const CURVE_HEADER: &str = "iteration,mean_return,std_return,mean_kl,surrogate_improvement";
/// Column order of `timing.csv`.
pub const TIMING_HEADER: &str = "iteration,wall_clock_seconds";
pub const CHECKPOINT_EVERY: usize = 10;

pub const CONFIG_FILE: &str = "config.json";
pub const CURVE_FILE: &str = "learning_curve.csv";
pub const TIMING_FILE: &str = "timing.csv";

const POLICY_INIT_STREAM: u64 = 0x1;
const ROLLOUT_STREAM: u64 = 0x2;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// KL of the accepted step, 0 when the update was rejected.
    pub mean_kl: f64,
    pub surrogate_improvement: f64,
    /// Seconds since training started, at the end of this iteration.
    pub wall_clock_seconds: f64,
}

impl IterationRecord {
    pub fn curve_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.iteration, self.mean_return, self.std_return, self.mean_kl, self.surrogate_improvement
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct TrainingSummary {
    pub records: Vec<IterationRecord>,
    pub params: PolicyParams,
    pub output_directory: PathBuf,
    pub checkpoint_format: CheckpointFormat,
}

impl TrainingSummary {
    pub fn final_checkpoint(&self) -> PathBuf {
        checkpoint_file(&self.output_directory, "final", self.checkpoint_format)
    }
}

/// `checkpoint_<label>.bin` or `.txt`, by format.
pub fn checkpoint_file(dir: &Path, label: &str, format: CheckpointFormat) -> PathBuf {
    dir.join(format!("checkpoint_{label}.{}", format.extension()))
}

/// Periodic checkpoint written after `iteration` completed iterations.
pub fn checkpoint_path(dir: &Path, iteration: usize, format: CheckpointFormat) -> PathBuf {
    checkpoint_file(dir, &format!("{iteration:04}"), format)
}

/// Freshly initialized policy for `config`, seeded from the master seed.
pub fn initial_params(config: &RunConfig) -> Result<PolicyParams> {
    Ok(init_params(&config.spec()?, derive_seed(config.master_seed, POLICY_INIT_STREAM)))
}

/// Seed of the rollouts collected in iteration `iteration`.
pub fn rollout_seed(master_seed: u64, iteration: usize) -> u64 {
    derive_seed(derive_seed(master_seed, ROLLOUT_STREAM), iteration as u64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct Csv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Csv {
    fn create(path: PathBuf, header: &str) -> Result<Self> {
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut csv = Self {
            path,
            out: BufWriter::new(file),
        };
        csv.line(header)?;
        Ok(csv)
    }

    fn line(&mut self, row: &str) -> Result<()> {
        writeln!(self.out, "{row}")
            .and_then(|_| self.out.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}

pub fn run_training(config: &RunConfig) -> Result<TrainingSummary> {
    run_training_with(config, |_, _| Control::Continue)
}

/// Trains for `config.trpo.iterations` iterations, or until `on_iteration`
/// returns [`Control::Stop`].
///
/// Writes into `config.output_directory`: the resolved config, the learning
/// curve, per-iteration timings, `checkpoint_0000` (initial policy), a
/// checkpoint every ten iterations and `checkpoint_final`.
pub fn run_training_with(
    config: &RunConfig,
    mut on_iteration: impl FnMut(&IterationRecord, &PolicyParams) -> Control,
) -> Result<TrainingSummary> {
    config.validate()?;
    let dir = config.output_directory.clone();
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let frozen = dir.join(CONFIG_FILE);
    std::fs::write(&frozen, config.to_json() + "\n").map_err(|e| HarnessError::io(&frozen, e))?;

    let env = config.env();
    let mut params = initial_params(config)?;
    let format = config.checkpoint_format;
    let save = |params: &PolicyParams, iteration: usize, path: &Path| {
        Checkpoint {
            params: params.clone(),
            iteration: iteration as u64,
        }
        .save(path, format)
    };
    save(&params, 0, &checkpoint_path(&dir, 0, format))?;

    let mut curve = Csv::create(dir.join(CURVE_FILE), CURVE_HEADER)?;
    let mut timing = Csv::create(dir.join(TIMING_FILE), TIMING_HEADER)?;
    let start = Instant::now();
    let mut records = Vec::new();
    for it in 0..config.trpo.iterations {
        let out = match train_iteration(&params, &env, &config.trpo, rollout_seed(config.master_seed, it)) {
            Ok(out) => out,
            Err(e) => {
                save(&params, it, &checkpoint_file(&dir, "abort", format))?;
                return Err(HarnessError::Numeric(format!("iteration {it}: {e}")));
            }
        };
        let (mean_return, std_return) = mean_std(&out.episode_returns);
        let record = IterationRecord {
            iteration: it,
            mean_return,
            std_return,
            mean_kl: out.stats.kl,
            surrogate_improvement: out.stats.improvement(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        curve.line(&record.curve_row())?;
        timing.line(&format!("{},{:.3}", it, record.wall_clock_seconds))?;
        info!(
            "iteration {it}: return {mean_return:.2} ± {std_return:.2}, kl {:.5}, {:?}",
            out.stats.kl, out.stats.outcome
        );
        if let UpdateOutcome::NonFinite(what) = &out.stats.outcome {
            save(&params, it, &checkpoint_file(&dir, "abort", format))?;
            return Err(HarnessError::Numeric(format!("iteration {it}: non-finite {what}")));
        }
        if !out.stats.accepted() {
            warn!("iteration {it}: update not applied ({:?})", out.stats.outcome);
        }
        params = out.params;
        let done = it + 1;
        if done % CHECKPOINT_EVERY == 0 {
            save(&params, done, &checkpoint_path(&dir, done, format))?;
        }
        let control = on_iteration(&record, &params);
        records.push(record);
        if control == Control::Stop {
            break;
        }
    }
    save(&params, records.len(), &checkpoint_file(&dir, "final", format))?;
    Ok(TrainingSummary {
        records,
        params,
        output_directory: dir,
        checkpoint_format: format,
    })
}
