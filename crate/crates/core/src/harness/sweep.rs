//! Monte Carlo success-rate sweeps over (d, p) grids.
//!
//! Sample `i` of a point is drawn from `rng::stream(seed, i)`, where `seed`
//! is the point seed recorded in the row. Workers take contiguous index
//! ranges and their integer tallies are summed, so a row does not depend on
//! the worker count.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DecoderSpec, RunConfig};
use super::dataset::{read_dataset, Dataset};
use crate::dqn::{greedy_episode, EpisodeEnd};
use crate::error::{Error, Result};
use crate::lattice::{CodeDistance, HiddenState};
use crate::matching::mwpm_decode;
use crate::nn::{load_checkpoint, QNetwork};
use crate::rng;
use crate::stats::{wilson_interval, Z95};

pub const SWEEP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub decoder: String,
    pub d: usize,
    pub p: f64,
    pub samples: u64,
    pub successes: u64,
    pub fails: u64,
    pub success_rate: f64,
    pub fail_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_steps: f64,
    pub step_limit_hits: u64,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl SweepRow {
    /// Equality on everything except wall time.
    pub fn same_outcome(&self, other: &SweepRow) -> bool {
        SweepRow {
            wall_time_s: 0.0,
            ..self.clone()
        } == SweepRow {
            wall_time_s: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub version: u32,
    pub rows: Vec<SweepRow>,
}

/// A decoder ready to run on hidden states.
#[derive(Debug, Clone, Copy)]
pub enum Decoder<'a> {
    Mwpm,
    Dqn { net: &'a QNetwork, max_steps: usize },
}

impl Decoder<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Decoder::Mwpm => "mwpm",
            Decoder::Dqn { .. } => "dqn",
        }
    }

    /// (success, steps, step limit reached)
    pub fn decode(&self, state: &HiddenState) -> Result<(bool, usize, bool)> {
        match *self {
            Decoder::Mwpm => {
                let out = mwpm_decode(state)?;
                Ok((out.success, out.steps, false))
            }
            Decoder::Dqn { net, max_steps } => {
                if net.architecture().d != state.distance() {
                    return Err(Error::ShapeMismatch(format!(
                        "d={} network cannot decode a d={} state",
                        net.architecture().d,
                        state.distance()
                    )));
                }
                let r = greedy_episode(net, state, max_steps)?;
                Ok((r.success, r.steps, r.end == EpisodeEnd::StepLimit))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    samples: u64,
    successes: u64,
    steps: u64,
    step_limit_hits: u64,
}

impl Tally {
    fn add(&mut self, (success, steps, limit): (bool, usize, bool)) {
        self.samples += 1;
        self.successes += success as u64;
        self.steps += steps as u64;
        self.step_limit_hits += limit as u64;
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.samples += o.samples;
        self.successes += o.successes;
        self.steps += o.steps;
        self.step_limit_hits += o.step_limit_hits;
        self
    }
}

/// Seed of the (d, p) point derived from the master seed.
pub fn point_seed(master: u64, d: usize, p: f64) -> u64 {
    rng::derive_seed(rng::derive_seed(master, d as u64), p.to_bits())
}

fn parallel_tally<F>(samples: u64, workers: usize, f: F) -> Result<Tally>
where
    F: Fn(u64) -> Result<(bool, usize, bool)> + Sync,
{
    let workers = (workers.max(1) as u64).min(samples.max(1));
    let chunk = samples.div_ceil(workers);
    let run = |lo: u64, hi: u64| -> Result<Tally> {
        let mut t = Tally::default();
        for i in lo..hi {
            t.add(f(i)?);
        }
        Ok(t)
    };
    if workers == 1 {
        return run(0, samples);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * chunk).min(samples);
                let hi = ((w + 1) * chunk).min(samples);
                let run = &run;
                s.spawn(move || run(lo, hi))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .try_fold(Tally::default(), |acc, t| Ok(acc.merge(t?)))
    })
}

fn row(decoder: &Decoder, d: usize, p: f64, seed: u64, t: Tally, started: Instant) -> SweepRow {
    let fails = t.samples - t.successes;
    let (ci_low, ci_high) = wilson_interval(t.successes, t.samples, Z95);
    let success_rate = if t.samples == 0 { 1.0 } else { t.successes as f64 / t.samples as f64 };
    SweepRow {
        decoder: decoder.label().to_string(),
        d,
        p,
        samples: t.samples,
        successes: t.successes,
        fails,
        success_rate,
        fail_rate: 1.0 - success_rate,
        ci_low,
        ci_high,
        mean_steps: if t.samples == 0 { 0.0 } else { t.steps as f64 / t.samples as f64 },
        step_limit_hits: t.step_limit_hits,
        seed,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// Decodes `samples` fresh states at (d, p) drawn from `seed`.
pub fn run_point(decoder: &Decoder, d: CodeDistance, p: f64, samples: u64, seed: u64, workers: usize) -> Result<SweepRow> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("error rate {p} outside [0, 1]")));
    }
    let started = Instant::now();
    let t = parallel_tally(samples, workers, |i| {
        let state = HiddenState::random(d, p, &mut rng::stream(seed, i))?;
        decoder.decode(&state)
    })?;
    Ok(row(decoder, d.get(), p, seed, t, started))
}

/// Decodes every state of a dataset; the row carries the dataset's seed.
pub fn run_dataset(decoder: &Decoder, ds: &Dataset, workers: usize) -> Result<SweepRow> {
    let started = Instant::now();
    let t = parallel_tally(ds.states.len() as u64, workers, |i| decoder.decode(&ds.states[i as usize]))?;
    Ok(row(decoder, ds.d.get(), ds.p, ds.seed, t, started))
}

/// Runs every (d, p) point of the config, or the configured dataset, and
/// writes the CSV and JSON outputs that are set.
pub fn sweep(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let net = match &cfg.decoder {
        DecoderSpec::Mwpm => None,
        DecoderSpec::Dqn { checkpoint } => Some(load_checkpoint(checkpoint)?.net),
    };
    let decoder = match &net {
        None => Decoder::Mwpm,
        Some(net) => Decoder::Dqn {
            net,
            max_steps: cfg.agent.max_steps,
        },
    };
    let mut rows = Vec::new();
    if let Some(path) = &cfg.dataset {
        let ds = read_dataset(path)?;
        rows.push(run_dataset(&decoder, &ds, cfg.workers)?);
    } else {
        for &d in &cfg.distances {
            let d = CodeDistance::new(d)?;
            if let Some(net) = &net {
                if net.architecture().d != d {
                    return Err(Error::ShapeMismatch(format!(
                        "checkpoint is for d={}, sweep requests d={d}",
                        net.architecture().d
                    )));
                }
            }
            for &p in &cfg.error_rates {
                let seed = point_seed(cfg.seed, d.get(), p);
                rows.push(run_point(&decoder, d, p, cfg.samples, seed, cfg.workers)?);
            }
        }
    }
    let result = SweepResult {
        version: SWEEP_VERSION,
        rows,
    };
    if let Some(path) = &cfg.csv {
        write_csv(&result.rows, path)?;
    }
    if let Some(path) = &cfg.json {
        write_json(&result, path)?;
    }
    Ok(result)
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd(d: usize) -> CodeDistance {
        CodeDistance::new(d).unwrap()
    }

    #[test]
    fn zero_error_rate_always_succeeds() {
        let r = run_point(&Decoder::Mwpm, cd(5), 0.0, 200, 1, 1).unwrap();
        assert_eq!((r.successes, r.fails, r.success_rate), (200, 0, 1.0));
        assert_eq!(r.mean_steps, 0.0);
    }

    #[test]
    fn rows_do_not_depend_on_worker_count() {
        let a = run_point(&Decoder::Mwpm, cd(5), 0.12, 300, 77, 1).unwrap();
        let b = run_point(&Decoder::Mwpm, cd(5), 0.12, 300, 77, 3).unwrap();
        assert!(a.same_outcome(&b));
        assert_eq!(a.successes + a.fails, a.samples);
    }

    #[test]
    fn dataset_rows_match_fresh_rows() {
        let ds = Dataset::generate(cd(3), 0.1, 150, 5).unwrap();
        let a = run_dataset(&Decoder::Mwpm, &ds, 2).unwrap();
        let b = run_point(&Decoder::Mwpm, cd(3), 0.1, 150, 5, 1).unwrap();
        assert!(a.same_outcome(&b));
    }

    #[test]
    fn sweep_writes_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            distances: vec![3],
            error_rates: vec![0.0, 0.1],
            samples: 50,
            csv: Some(dir.path().join("s.csv")),
            json: Some(dir.path().join("s.json")),
            ..RunConfig::default()
        };
        let res = sweep(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2);
        let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert!(text.starts_with("decoder,d,p,samples,successes,fails,success_rate,fail_rate,ci_low,ci_high,mean_steps,step_limit_hits,seed,wall_time_s"));
        assert_eq!(text.lines().count(), 3);
        let back: SweepResult = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
        assert_eq!(back, res);
    }

    #[test]
    fn dqn_decoder_checks_distance() {
        use crate::nn::Architecture;
        let net = QNetwork::zeros(Architecture::for_distance(cd(3))).unwrap();
        let dec = Decoder::Dqn { net: &net, max_steps: 5 };
        assert!(matches!(dec.decode(&HiddenState::new(cd(5))), Err(Error::ShapeMismatch(_))));
        assert_eq!(dec.decode(&HiddenState::new(cd(3))).unwrap(), (true, 0, false));
    }
}
