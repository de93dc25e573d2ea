//! Dataset files, Monte Carlo sweeps, low-p asymptotics, Q-value inspection
//! and training runs.

mod asymptotics;
mod config;
mod dataset;
mod inspect;
mod sweep;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqn::{evaluate, Evaluation};
use crate::error::Result;
use crate::nn::load_checkpoint;

pub use asymptotics::{
    asymptotic_check, binomial, predicted_fail_rate, predicted_fail_rate_even, prediction_terms, AsymptoticPoint,
    AsymptoticReport,
};
pub use config::{DecoderSpec, RunConfig, TrainConfig, CONFIG_VERSION};
pub use dataset::{generate_dataset, read_dataset, write_dataset, Dataset, DATASET_MAGIC, DATASET_VERSION};
pub use inspect::{inspect_q, parse_syndrome, DefectValues, DirectionValues, GreedyChoice, QReport};
pub use sweep::{point_seed, run_dataset, run_point, sweep, write_csv, write_json, Decoder, SweepResult, SweepRow, SWEEP_VERSION};
pub use train::{episode_rng, initial_network, train_command, train_episodes, validation_set, TrainSummary, ValidationRow};

/// Greedy agent results on a dataset next to the matching decoder's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub d: usize,
    pub p: f64,
    pub dataset_seed: u64,
    pub dqn: Evaluation,
    pub mwpm: SweepRow,
}

/// Evaluates a checkpoint on a dataset file.
pub fn evaluate_command(checkpoint: &Path, dataset: &Path, max_steps: usize, workers: usize) -> Result<EvaluationReport> {
    let ck = load_checkpoint(checkpoint)?;
    let ds = read_dataset(dataset)?;
    ck.require_distance(ds.d)?;
    Ok(EvaluationReport {
        d: ds.d.get(),
        p: ds.p,
        dataset_seed: ds.seed,
        dqn: evaluate(&ck.net, &ds.states, max_steps)?,
        mwpm: run_dataset(&Decoder::Mwpm, &ds, workers)?,
    })
}
