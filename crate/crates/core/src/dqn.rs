//! Deep Q-learning agent acting on defect perspectives.
//!
//! An action moves one defect by one plaquette, so its value is read from the
//! network output of that defect's perspective. Every move is rewarded with
//! the same constant (−1 by default) and an episode ends when the syndrome is
//! empty or the step limit is reached.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{observation_of, rotate90, rotate_grid, Observation, Perspective};
use crate::error::{Error, Result};
use crate::lattice::{Action, Direction, HiddenState, Syndrome};
use crate::nn::{AdamConfig, AdamState, Batch, Checkpoint, QNetwork, OUTPUTS};
use crate::stats::{wilson_interval, Z95};

/// Unit of the target-network synchronization period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncUnit {
    #[default]
    LearningSteps,
    Episodes,
}

/// Whether `batch_size` counts replay tuples (each expanded to its four
/// rotations) or rows after expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchCounting {
    #[default]
    Tuples,
    Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub batch_counting: BatchCounting,
    pub target_sync_period: u64,
    pub sync_unit: SyncUnit,
    pub max_steps: usize,
    pub reward: f64,
    pub replay_capacity: usize,
    /// Bit-flip rate of freshly sampled training syndromes.
    pub error_rate: f64,
    pub adam: AdamConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.95,
            epsilon: 0.1,
            batch_size: 32,
            batch_counting: BatchCounting::Tuples,
            target_sync_period: 100,
            sync_unit: SyncUnit::LearningSteps,
            max_steps: 50,
            reward: -1.0,
            replay_capacity: 1_000_000,
            error_rate: 0.1,
            adam: AdamConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return bad("error_rate must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.target_sync_period == 0 || self.max_steps == 0 || self.replay_capacity == 0 {
            return bad("batch_size, target_sync_period, max_steps and replay_capacity must be positive");
        }
        if !(self.adam.learning_rate > 0.0) || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return bad("adam: learning_rate must be positive and betas in [0, 1)");
        }
        if !self.reward.is_finite() {
            return bad("reward must be finite");
        }
        Ok(())
    }
}

/// Anything that scores the four moves of each perspective.
pub trait QFunction {
    fn q_values(&self, perspectives: &[Perspective]) -> Vec<[f64; OUTPUTS]>;
}

impl QFunction for QNetwork {
    fn q_values(&self, perspectives: &[Perspective]) -> Vec<[f64; OUTPUTS]> {
        self.q_rows(perspectives)
    }
}

/// One row per perspective of the observation.
pub fn q_values<Q: QFunction + ?Sized>(q: &Q, obs: &Observation) -> Result<Vec<[f64; OUTPUTS]>> {
    if obs.is_empty() {
        return Err(Error::ContractViolation("Q-values of an empty observation".into()));
    }
    Ok(q.q_values(&obs.perspectives))
}

/// Position of the global maximum; ties go to the lowest perspective index,
/// then to the earliest action in Up, Down, Right, Left order.
pub fn argmax_cell(rows: &[[f64; OUTPUTS]]) -> (usize, Direction) {
    let mut best = (0, 0);
    let mut best_q = f64::NEG_INFINITY;
    for (i, row) in rows.iter().enumerate() {
        for (a, &q) in row.iter().enumerate() {
            if q > best_q {
                best_q = q;
                best = (i, a);
            }
        }
    }
    (best.0, Direction::from_index(best.1).unwrap())
}

/// ε-greedy choice of (perspective index, move). No random number is drawn
/// when `epsilon` is zero.
pub fn select_action<Q: QFunction + ?Sized, R: Rng + ?Sized>(
    q: &Q,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Result<(usize, Direction)> {
    if obs.is_empty() {
        return Err(Error::ContractViolation("no defect to act on".into()));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        let cell = rng.random_range(0..obs.len() * OUTPUTS);
        return Ok((cell / OUTPUTS, Direction::from_index(cell % OUTPUTS).unwrap()));
    }
    Ok(argmax_cell(&q_values(q, obs)?))
}

/// Largest Q-value over all perspectives and moves, `None` for an empty syndrome.
pub fn max_q<Q: QFunction + ?Sized>(q: &Q, syndrome: &Syndrome) -> Option<f64> {
    let obs = observation_of(syndrome);
    if obs.is_empty() {
        return None;
    }
    q.q_values(&obs.perspectives)
        .iter()
        .flatten()
        .copied()
        .reduce(f64::max)
}

/// Stored replay tuple; the successor observation is derived from `next`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub perspective: Perspective,
    pub action: Direction,
    pub reward: f64,
    pub next: Syndrome,
}

impl Transition {
    pub fn successor(&self) -> Observation {
        observation_of(&self.next)
    }

    pub fn is_terminal(&self) -> bool {
        self.next.is_empty()
    }

    /// The tuple and its three quarter-turn rotations, applied to the
    /// perspective, the move and every successor perspective.
    pub fn augmented(&self) -> [Experience; 4] {
        let first = Experience {
            perspective: self.perspective.clone(),
            action: self.action,
            reward: self.reward,
            next: self.successor().perspectives,
        };
        let turn = |e: &Experience| {
            let (perspective, action) = rotate90(&e.perspective, e.action);
            Experience {
                perspective,
                action,
                reward: e.reward,
                next: e.next.iter().map(rotate_grid).collect(),
            }
        };
        let second = turn(&first);
        let third = turn(&second);
        let fourth = turn(&third);
        [first, second, third, fourth]
    }
}

/// A training row: perspective, move, reward and successor perspectives
/// (empty when terminal).
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub perspective: Perspective,
    pub action: Direction,
    pub reward: f64,
    pub next: Vec<Perspective>,
}

/// `r + γ·max Q_T(O′)`, or `r` for a terminal row.
pub fn compute_targets<Q: QFunction + ?Sized>(target: &Q, rows: &[Experience], gamma: f64) -> Vec<f64> {
    let successors: Vec<Perspective> = rows.iter().flat_map(|e| e.next.iter().cloned()).collect();
    let q = if successors.is_empty() {
        Vec::new()
    } else {
        target.q_values(&successors)
    };
    let mut offset = 0;
    rows.iter()
        .map(|e| {
            let n = e.next.len();
            let y = if n == 0 {
                e.reward
            } else {
                let best = q[offset..offset + n]
                    .iter()
                    .flatten()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                e.reward + gamma * best
            };
            offset += n;
            y
        })
        .collect()
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Stored transition by age, 0 being the oldest.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Transition> {
        if self.items.is_empty() {
            return None;
        }
        self.items.get(rng.random_range(0..self.items.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Solved,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: usize,
    pub end: EpisodeEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Greedy (ε = 0) decoding of one hidden state without learning.
pub fn greedy_episode<Q: QFunction + ?Sized>(q: &Q, initial: &HiddenState, max_steps: usize) -> Result<EpisodeResult> {
    let mut state = initial.clone();
    let mut steps = 0;
    loop {
        let syndrome = state.compute_syndrome();
        if syndrome.is_empty() {
            return Ok(EpisodeResult {
                success: !state.is_logical_failure()?,
                steps,
                end: EpisodeEnd::Solved,
            });
        }
        if steps == max_steps {
            return Ok(EpisodeResult {
                success: false,
                steps,
                end: EpisodeEnd::StepLimit,
            });
        }
        let obs = observation_of(&syndrome);
        let (i, dir) = argmax_cell(&q.q_values(&obs.perspectives));
        state.apply_action(Action::new(obs.defects[i], dir))?;
        steps += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub episodes: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// Wilson 95% interval of the success rate.
    pub ci95: (f64, f64),
    pub mean_steps: f64,
    pub step_limit_hits: u64,
    pub records: Vec<EpisodeResult>,
}

impl Evaluation {
    pub fn from_records(records: Vec<EpisodeResult>) -> Self {
        let episodes = records.len() as u64;
        let successes = records.iter().filter(|r| r.success).count() as u64;
        let total_steps: usize = records.iter().map(|r| r.steps).sum();
        Evaluation {
            episodes,
            successes,
            success_rate: if episodes == 0 { 1.0 } else { successes as f64 / episodes as f64 },
            ci95: wilson_interval(successes, episodes, Z95),
            mean_steps: if episodes == 0 { 0.0 } else { total_steps as f64 / episodes as f64 },
            step_limit_hits: records.iter().filter(|r| r.end == EpisodeEnd::StepLimit).count() as u64,
            records,
        }
    }
}

/// Greedy episodes over a fixed dataset.
pub fn evaluate<Q: QFunction + ?Sized>(q: &Q, dataset: &[HiddenState], max_steps: usize) -> Result<Evaluation> {
    let records = dataset
        .iter()
        .map(|s| greedy_episode(q, s, max_steps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_records(records))
}

/// Policy and target networks, optimizer, replay memory and counters.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub net: QNetwork,
    pub target: QNetwork,
    pub optimizer: AdamState,
    pub buffer: ReplayBuffer,
    pub learning_steps: u64,
    pub episodes: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, net: QNetwork) -> Result<Self> {
        config.validate()?;
        let optimizer = AdamState::new(config.adam, &net);
        Ok(Agent {
            buffer: ReplayBuffer::new(config.replay_capacity),
            target: net.clone(),
            net,
            optimizer,
            config,
            learning_steps: 0,
            episodes: 0,
        })
    }

    /// Resumes from a checkpoint with an empty replay memory; the target
    /// network restarts as a copy of the policy network.
    pub fn from_checkpoint(config: AgentConfig, checkpoint: Checkpoint) -> Result<Self> {
        config.validate()?;
        let mut optimizer = checkpoint.optimizer;
        optimizer.config = config.adam;
        Ok(Agent {
            buffer: ReplayBuffer::new(config.replay_capacity),
            target: checkpoint.net.clone(),
            net: checkpoint.net,
            optimizer,
            config,
            learning_steps: checkpoint.learning_steps,
            episodes: checkpoint.episodes,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            net: self.net.clone(),
            optimizer: self.optimizer.clone(),
            learning_steps: self.learning_steps,
            episodes: self.episodes,
        }
    }

    /// θ_T ← θ.
    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.net);
    }

    /// Samples a minibatch with replacement, expands it by rotation, fits the
    /// bootstrapped targets with one Adam step and returns the loss.
    pub fn learning_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::ContractViolation("learning step on an empty replay memory".into()));
        }
        let tuples = match self.config.batch_counting {
            BatchCounting::Tuples => self.config.batch_size,
            BatchCounting::Rows => self.config.batch_size.div_ceil(4),
        };
        let mut rows = Vec::with_capacity(4 * tuples);
        for _ in 0..tuples {
            rows.extend(self.buffer.sample(rng).unwrap().augmented());
        }
        let targets = compute_targets(&self.target, &rows, self.config.gamma);
        let mut batch = Batch::default();
        for (e, y) in rows.iter().zip(targets) {
            batch.push_perspective(&e.perspective, e.action.index(), y);
        }
        let (loss, grads) = self.net.loss_and_gradients(&batch)?;
        self.optimizer.step(&mut self.net, &grads)?;
        self.learning_steps += 1;
        if self.config.sync_unit == SyncUnit::LearningSteps
            && self.learning_steps.is_multiple_of(self.config.target_sync_period)
        {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Decodes `initial`. In training mode every move is stored and followed
    /// by a learning step; evaluation is greedy and leaves the agent unchanged.
    pub fn run_episode<R: Rng + ?Sized>(&mut self, initial: &HiddenState, mode: Mode, rng: &mut R) -> Result<EpisodeResult> {
        if mode == Mode::Eval {
            return greedy_episode(&self.net, initial, self.config.max_steps);
        }
        let mut state = initial.clone();
        let mut syndrome = state.compute_syndrome();
        let mut steps = 0;
        let result = loop {
            if syndrome.is_empty() {
                break EpisodeResult {
                    success: !state.is_logical_failure()?,
                    steps,
                    end: EpisodeEnd::Solved,
                };
            }
            if steps == self.config.max_steps {
                break EpisodeResult {
                    success: false,
                    steps,
                    end: EpisodeEnd::StepLimit,
                };
            }
            let mut obs = observation_of(&syndrome);
            let (i, dir) = select_action(&self.net, &obs, self.config.epsilon, rng)?;
            state.apply_action(Action::new(obs.defects[i], dir))?;
            steps += 1;
            syndrome = state.compute_syndrome();
            self.buffer.push(Transition {
                perspective: obs.perspectives.swap_remove(i),
                action: dir,
                reward: self.config.reward,
                next: syndrome.clone(),
            });
            self.learning_step(rng)?;
        };
        self.episodes += 1;
        if self.config.sync_unit == SyncUnit::Episodes && self.episodes.is_multiple_of(self.config.target_sync_period) {
            self.sync_target();
        }
        Ok(result)
    }
}
