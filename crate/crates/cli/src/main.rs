//! `toric`: dataset generation, training, evaluation, sweeps, asymptotics and
//! Q-value inspection for toric-code decoders.
//!
//! Settings resolve as defaults, then `--config` file, then flags. Exit codes:
//! 2 configuration, 3 I/O or file format, 4 contract or shape errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toric_core::dqn::{AgentConfig, BatchCounting, SyncUnit};
use toric_core::harness::{self, DecoderSpec, RunConfig};
use toric_core::nn::load_checkpoint;
use toric_core::{CodeDistance, Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "toric", version, about = "Toric code bit-flip decoders: matching reference and deep Q-network agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a file of random error configurations.
    Generate(GenerateArgs),
    /// Train a Q-network agent, logging validation success rates.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint on a dataset, next to matching.
    Evaluate(EvaluateArgs),
    /// Success rates over a grid of code distances and error rates.
    Sweep(SweepArgs),
    /// Low error-rate failure scaling of the matching decoder.
    Asymptotics(AsymptoticsArgs),
    /// Per-defect Q-values of a syndrome as JSON.
    InspectQ(InspectArgs),
    /// Print the default configuration file.
    Config,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct AgentFlags {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum)]
    batch_counting: Option<BatchCountingArg>,
    #[arg(long)]
    sync_period: Option<u64>,
    #[arg(long, value_enum)]
    sync_unit: Option<SyncUnitArg>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    reward: Option<f64>,
    #[arg(long)]
    replay_capacity: Option<usize>,
    /// Error rate of training syndromes.
    #[arg(long)]
    error_rate: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BatchCountingArg {
    Tuples,
    Rows,
}

#[derive(Clone, Copy, ValueEnum)]
enum SyncUnitArg {
    LearningSteps,
    Episodes,
}

impl AgentFlags {
    fn apply(&self, a: &mut AgentConfig) {
        set(&mut a.gamma, self.gamma);
        set(&mut a.epsilon, self.epsilon);
        set(&mut a.batch_size, self.batch_size);
        set(&mut a.target_sync_period, self.sync_period);
        set(&mut a.max_steps, self.max_steps);
        set(&mut a.reward, self.reward);
        set(&mut a.replay_capacity, self.replay_capacity);
        set(&mut a.error_rate, self.error_rate);
        set(&mut a.adam.learning_rate, self.learning_rate);
        if let Some(b) = self.batch_counting {
            a.batch_counting = match b {
                BatchCountingArg::Tuples => BatchCounting::Tuples,
                BatchCountingArg::Rows => BatchCounting::Rows,
            };
        }
        if let Some(u) = self.sync_unit {
            a.sync_unit = match u {
                SyncUnitArg::LearningSteps => SyncUnit::LearningSteps,
                SyncUnitArg::Episodes => SyncUnit::Episodes,
            };
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Total number of episodes to reach.
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Convergence log (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    #[arg(long)]
    validation_size: Option<u64>,
    /// Continue from the checkpoint file if it exists.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    agent: AgentFlags,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 50)]
    max_steps: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Include per-episode records in the output.
    #[arg(long)]
    records: bool,
    /// JSON output file (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Mwpm,
    Dqn,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Code distances, comma separated.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Error rates, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    decoder: Option<DecoderArg>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Decode a dataset file instead of fresh samples.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.02,0.03")]
    p: Vec<f64>,
    /// One count for every p, or one per p.
    #[arg(long, value_delimiter = ',', default_value = "1000000")]
    samples: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defects as "row,col;row,col;...".
    #[arg(long)]
    syndrome: String,
    /// Code distance of the syndrome (default: the checkpoint's).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => harness::write_json(value, path),
        None => {
            let text = serde_json::to_string_pretty(value)?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let d = CodeDistance::new(a.d)?;
            harness::generate_dataset(d, a.p, a.count, a.seed, &a.out)?;
            eprintln!("wrote {} samples (d={}, p={}) to {}", a.count, a.d, a.p, a.out.display());
            Ok(())
        }
        Command::Train(a) => {
            let mut cfg = base_config(a.config.as_deref())?;
            set(&mut cfg.train.distance, a.d);
            set(&mut cfg.train.episodes, a.episodes);
            set(&mut cfg.seed, a.seed);
            set(&mut cfg.train.checkpoint, a.checkpoint);
            set(&mut cfg.train.log, a.log);
            set(&mut cfg.train.eval_every, a.eval_every);
            set(&mut cfg.train.checkpoint_every, a.checkpoint_every);
            set(&mut cfg.train.validation_size, a.validation_size);
            a.agent.apply(&mut cfg.agent);
            let summary = harness::train_command(&cfg, a.resume)?;
            emit(&summary, None)
        }
        Command::Evaluate(a) => {
            let mut report = harness::evaluate_command(&a.checkpoint, &a.dataset, a.max_steps, a.workers)?;
            if !a.records {
                report.dqn.records.clear();
            }
            emit(&report, a.out.as_deref())
        }
        Command::Sweep(a) => {
            let mut cfg = base_config(a.config.as_deref())?;
            set(&mut cfg.distances, a.d);
            set(&mut cfg.error_rates, a.p);
            set(&mut cfg.samples, a.samples);
            set(&mut cfg.seed, a.seed);
            set(&mut cfg.workers, a.workers);
            set(&mut cfg.agent.max_steps, a.max_steps);
            if a.dataset.is_some() {
                cfg.dataset = a.dataset;
            }
            if a.csv.is_some() {
                cfg.csv = a.csv;
            }
            if a.json.is_some() {
                cfg.json = a.json;
            }
            match (a.decoder, a.checkpoint) {
                (Some(DecoderArg::Mwpm), _) => cfg.decoder = DecoderSpec::Mwpm,
                (Some(DecoderArg::Dqn), Some(checkpoint)) | (None, Some(checkpoint)) => {
                    cfg.decoder = DecoderSpec::Dqn { checkpoint }
                }
                (Some(DecoderArg::Dqn), None) => {
                    if !matches!(cfg.decoder, DecoderSpec::Dqn { .. }) {
                        return Err(Error::Config("--decoder dqn needs --checkpoint".into()));
                    }
                }
                (None, None) => {}
            }
            let result = harness::sweep(&cfg)?;
            if cfg.json.is_none() {
                emit(&result, None)?;
            }
            Ok(())
        }
        Command::Asymptotics(a) => {
            let d = CodeDistance::new(a.d)?;
            let report = harness::asymptotic_check(d, &a.p, &a.samples, a.seed, a.workers)?;
            emit(&report, a.out.as_deref())
        }
        Command::InspectQ(a) => {
            let ck = load_checkpoint(&a.checkpoint)?;
            let d = match a.d {
                Some(d) => CodeDistance::new(d)?,
                None => ck.net.architecture().d,
            };
            let syndrome = harness::parse_syndrome(d, &a.syndrome)?;
            emit(&harness::inspect_q(&ck.net, &syndrome)?, a.out.as_deref())
        }
        Command::Config => {
            print!("{}", RunConfig::default().to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Io => 3,
                ErrorKind::Contract => 4,
            })
        }
    }
}
