//! Training runs with a convergence log and periodic checkpoints.
//!
//! Episode `k` draws its initial state and every exploration decision from
//! `rng::stream(derive_seed(seed, TRAIN_STREAM), k)`, so a resumed run
//! continues the same episode sequence.

use std::fs::OpenOptions;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::Dataset;
use super::sweep::{run_dataset, Decoder};
use crate::dqn::{evaluate, Agent, EpisodeResult, Mode};
use crate::error::{Error, Result};
use crate::lattice::{CodeDistance, HiddenState};
use crate::nn::{load_checkpoint, save_checkpoint, Architecture, QNetwork};
use crate::rng::{self, Rng};

const TRAIN_STREAM: u64 = 0x0074_7261_696e;
const INIT_STREAM: u64 = 0x696e_6974;
const VALIDATION_STREAM: u64 = 0x0076_616c_6964;

pub fn episode_rng(seed: u64, episode: u64) -> Rng {
    rng::stream(rng::derive_seed(seed, TRAIN_STREAM), episode)
}

/// Fresh network with the standard architecture for `d`.
pub fn initial_network(d: CodeDistance, seed: u64) -> Result<QNetwork> {
    QNetwork::random(Architecture::for_distance(d), &mut rng::stream(rng::derive_seed(seed, INIT_STREAM), 0))
}

/// Held-out states, fixed by the run seed.
pub fn validation_set(d: CodeDistance, p: f64, size: u64, seed: u64) -> Result<Dataset> {
    Dataset::generate(d, p, size, rng::derive_seed(seed, VALIDATION_STREAM))
}

/// Runs training episodes until `agent.episodes` reaches `until`, calling
/// `after_episode` after each one.
pub fn train_episodes<F>(agent: &mut Agent, seed: u64, until: u64, mut after_episode: F) -> Result<()>
where
    F: FnMut(&Agent, &EpisodeResult) -> Result<()>,
{
    let d = agent.net.architecture().d;
    while agent.episodes < until {
        let mut r = episode_rng(seed, agent.episodes);
        let initial = HiddenState::random(d, agent.config.error_rate, &mut r)?;
        let result = agent.run_episode(&initial, Mode::Train, &mut r)?;
        after_episode(agent, &result)?;
    }
    Ok(())
}

/// One convergence-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub episodes: u64,
    pub learning_steps: u64,
    pub success_rate: f64,
    pub mwpm_success_rate: f64,
    pub mean_steps: f64,
    pub step_limit_hits: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub episodes: u64,
    pub learning_steps: u64,
    pub resumed: bool,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub validation: Vec<ValidationRow>,
}

/// Trains the configured agent, evaluating every `eval_every` episodes on a
/// fixed validation set and checkpointing every `checkpoint_every` episodes
/// and at the end. With `resume`, continues from the checkpoint file when it
/// exists.
pub fn train_command(cfg: &RunConfig, resume: bool) -> Result<TrainSummary> {
    cfg.validate()?;
    let t = &cfg.train;
    let d = CodeDistance::new(t.distance)?;
    let resumed = resume && t.checkpoint.exists();
    let mut agent = if resumed {
        let ck = load_checkpoint(&t.checkpoint)?;
        ck.require_distance(d)?;
        Agent::from_checkpoint(cfg.agent.clone(), ck)?
    } else {
        Agent::new(cfg.agent.clone(), initial_network(d, cfg.seed)?)?
    };

    let validation = validation_set(d, t.validation_error_rate, t.validation_size, cfg.seed)?;
    let mwpm_rate = run_dataset(&Decoder::Mwpm, &validation, cfg.workers)?.success_rate;

    let fresh_log = !resumed || !t.log.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(!fresh_log)
        .write(true)
        .truncate(fresh_log)
        .open(&t.log)
        .map_err(|e| Error::io(&t.log, e))?;
    let mut log = csv::WriterBuilder::new().has_headers(fresh_log).from_writer(file);

    let started = Instant::now();
    let mut rows = Vec::new();
    let mut validate = |agent: &Agent, rows: &mut Vec<ValidationRow>| -> Result<()> {
        let ev = evaluate(&agent.net, &validation.states, agent.config.max_steps)?;
        let row = ValidationRow {
            episodes: agent.episodes,
            learning_steps: agent.learning_steps,
            success_rate: ev.success_rate,
            mwpm_success_rate: mwpm_rate,
            mean_steps: ev.mean_steps,
            step_limit_hits: ev.step_limit_hits,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        log.serialize(&row)?;
        log.flush().map_err(|e| Error::io(&t.log, e))?;
        rows.push(row);
        Ok(())
    };

    if !resumed {
        validate(&agent, &mut rows)?;
    }
    train_episodes(&mut agent, cfg.seed, t.episodes, |agent, _| {
        if agent.episodes % t.eval_every == 0 {
            validate(agent, &mut rows)?;
        }
        if agent.episodes % t.checkpoint_every == 0 {
            save_checkpoint(&agent.checkpoint(), &t.checkpoint)?;
        }
        Ok(())
    })?;
    save_checkpoint(&agent.checkpoint(), &t.checkpoint)?;

    Ok(TrainSummary {
        episodes: agent.episodes,
        learning_steps: agent.learning_steps,
        resumed,
        checkpoint: t.checkpoint.clone(),
        log: t.log.clone(),
        validation: rows,
    })
}
