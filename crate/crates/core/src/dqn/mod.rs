//! Deep Q-learning placement agent: CNN Q-network, FIFO replay memory,
//! periodically synced target network and ε-greedy exploration.

mod qnet;

use std::collections::VecDeque;
use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use qnet::{QNetwork, QNetworkSpec};

use crate::env::{episode_return, PlacementEnv, TraceRecord};
use crate::error::{Error, Result};
use crate::grid::Px;
use crate::io::Checkpoint;
use crate::nn::{Adam, Module, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub learning_rate: f32,
    pub gamma: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub replay_capacity: usize,
    /// Hard target sync every this many environment steps.
    pub target_sync_period: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of episodes over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            learning_rate: 1e-4,
            gamma: 0.95,
            batch_size: 32,
            episodes: 1000,
            replay_capacity: 10_000,
            target_sync_period: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} must lie in (0, 1]",
                self.gamma
            )));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(Error::InvalidConfig(format!(
                "batch size {} must be in 1..={}",
                self.batch_size, self.replay_capacity
            )));
        }
        if self.episodes == 0 || self.target_sync_period == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid DQN config {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::InvalidConfig(
                "epsilon bounds must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Linearly decayed exploration rate for a 0-based episode index.
    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let horizon = (self.epsilon_decay_fraction * self.episodes as f64).max(1.0);
        let t = (episode as f64 / horizon).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// ε-greedy over legal actions; greedy ties go to the lowest index.
pub fn select_action(
    q_values: &[f32],
    mask: &[bool],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize> {
    if q_values.len() != mask.len() {
        return Err(Error::shape(q_values.len(), mask.len()));
    }
    let legal: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
    if legal.is_empty() {
        return Err(Error::NoLegalAction);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(legal[rng.random_range(0..legal.len())]);
    }
    Ok(greedy(q_values, &legal))
}

fn greedy(q_values: &[f32], legal: &[usize]) -> usize {
    let mut best = legal[0];
    for &a in &legal[1..] {
        if q_values[a] > q_values[best] {
            best = a;
        }
    }
    best
}

/// `y = r` for terminal transitions (or when no next action is legal),
/// otherwise `r + γ·max_{legal a'} Q_target(s', a')`.
pub fn bellman_target(
    reward: f64,
    next_q: &[f32],
    next_mask: &[bool],
    terminal: bool,
    gamma: f64,
) -> f64 {
    if terminal {
        return reward;
    }
    let best = next_q
        .iter()
        .zip(next_mask)
        .filter(|(_, &m)| m)
        .map(|(&q, _)| q as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        reward + gamma * best
    } else {
        reward
    }
}

/// Mean squared TD error on the taken actions and its gradient with respect
/// to every Q output (zero for actions not taken).
pub fn taken_action_loss(
    q: &[f64],
    n_actions: usize,
    actions: &[usize],
    targets: &[f64],
) -> (f64, Vec<f64>) {
    let b = actions.len();
    let mut grad = vec![0.0; q.len()];
    let mut loss = 0.0;
    for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let e = q[i * n_actions + a] - y;
        loss += e * e;
        grad[i * n_actions + a] = 2.0 * e / b as f64;
    }
    (loss / b as f64, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Tensor,
    pub action: usize,
    pub reward: f64,
    pub next_state: Tensor,
    pub next_mask: Vec<bool>,
    pub terminal: bool,
}

/// First-in-first-out experience buffer.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        ReplayMemory {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn is_ready(&self, batch_size: usize) -> bool {
        self.items.len() >= batch_size
    }

    /// Uniform sample without replacement, or `None` while fewer than
    /// `batch_size` transitions are stored.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Option<Vec<&Transition>> {
        if !self.is_ready(batch_size) {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), batch_size)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: DqnConfig,
    pub online: QNetwork,
    pub target: QNetwork,
    optimizer: Adam,
    pub train_steps: usize,
}

impl DqnAgent {
    pub fn new(spec: QNetworkSpec, config: DqnConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let online = QNetwork::new(spec, rng)?;
        let target = online.clone();
        let optimizer = Adam::new(config.learning_rate);
        Ok(DqnAgent {
            config,
            online,
            target,
            optimizer,
            train_steps: 0,
        })
    }

    pub fn q_values(&self, state: &Tensor) -> Vec<f32> {
        self.online.forward(state).data
    }

    /// One gradient step on a minibatch; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty minibatch".into()));
        }
        let na = self.online.spec.n_actions;
        let live: Vec<&Tensor> = batch
            .iter()
            .filter(|t| !t.terminal)
            .map(|t| &t.next_state)
            .collect();
        let next_q = (!live.is_empty()).then(|| self.target.forward(&Tensor::stack(&live)));
        let mut k = 0;
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| match (&next_q, t.terminal) {
                (Some(q), false) => {
                    k += 1;
                    bellman_target(
                        t.reward,
                        q.sample(k - 1),
                        &t.next_mask,
                        false,
                        self.config.gamma,
                    )
                }
                _ => t.reward,
            })
            .collect();
        let states = Tensor::stack(&batch.iter().map(|t| &t.state).collect::<Vec<_>>());
        let q = self.online.forward_train(&states);
        let q64: Vec<f64> = q.data.iter().map(|&v| v as f64).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, grad) = taken_action_loss(&q64, na, &actions, &targets);
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite TD loss at train step {}",
                self.train_steps
            )));
        }
        let dq = Tensor::from_vec(
            q.n,
            q.c,
            q.h,
            q.w,
            grad.into_iter().map(|g| g as f32).collect(),
        );
        self.online.backward(&dq);
        self.optimizer.step(self.online.params_mut());
        self.train_steps += 1;
        Ok(loss)
    }

    /// Hard copy θ → θ_target when `step` is a positive multiple of `period`.
    pub fn sync_target(&mut self, step: usize, period: usize) -> bool {
        if period > 0 && step > 0 && step.is_multiple_of(period) {
            self.target.copy_from(&self.online);
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub epsilon: f64,
    /// Mean TD loss over the episode's training steps, if any ran.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHeader {
    pub spec: QNetworkSpec,
    pub config: DqnConfig,
    pub seed: u64,
    pub candidate_stride: usize,
    pub candidates: Vec<Px>,
    pub n_bs: usize,
}

/// Trained policy: online network plus the lattice it acts on.
#[derive(Debug, Clone)]
pub struct Policy {
    pub header: PolicyHeader,
    pub network: QNetwork,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub curve: Vec<CurvePoint>,
    pub wall_time_s: f64,
}

/// Run Algorithm-1 style training for `config.episodes` episodes.
pub fn train(
    env: &mut PlacementEnv,
    pre_deployed: &[Px],
    config: &DqnConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = QNetworkSpec::new(env.predictor().scene().grid_size(), env.n_actions());
    let mut agent = DqnAgent::new(spec, config.clone(), &mut rng)?;
    let mut memory = ReplayMemory::new(config.replay_capacity);
    let mut curve = Vec::with_capacity(config.episodes);
    let mut env_steps = 0usize;
    for episode in 0..config.episodes {
        let eps = config.epsilon_at(episode);
        let mut state = env.reset(pre_deployed)?.to_tensor();
        let mut rewards = Vec::new();
        let mut losses = Vec::new();
        loop {
            let mask = env.action_mask();
            if !mask.iter().any(|&m| m) {
                break;
            }
            let action = select_action(&agent.q_values(&state), &mask, eps, &mut rng)?;
            let out = env.step(action)?;
            let next_state = out.state.to_tensor();
            memory.push(Transition {
                state: state.clone(),
                action,
                reward: out.reward,
                next_state: next_state.clone(),
                next_mask: env.action_mask(),
                terminal: out.terminal,
            });
            rewards.push(out.reward);
            env_steps += 1;
            if let Some(batch) = memory.sample(config.batch_size, &mut rng) {
                losses.push(agent.train_step(&batch)?);
            }
            agent.sync_target(env_steps, config.target_sync_period);
            state = next_state;
            if out.terminal {
                break;
            }
        }
        let loss = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        curve.push(CurvePoint {
            episode,
            ret: episode_return(&rewards, config.gamma)?,
            epsilon: eps,
            loss,
        });
    }
    let header = PolicyHeader {
        spec: agent.online.spec.clone(),
        config: config.clone(),
        seed,
        candidate_stride: env.config().candidate_stride,
        candidates: env.candidates().candidates().to_vec(),
        n_bs: env.config().n_bs_budget,
    };
    Ok(TrainOutcome {
        policy: Policy {
            header,
            network: agent.online,
        },
        curve,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub placements: Vec<Px>,
    pub cr: f64,
    pub er: f64,
    pub per_step: Vec<TraceRecord>,
    pub wall_time_s: f64,
}

impl Policy {
    fn check_env(&self, env: &PlacementEnv) -> Result<()> {
        if env.candidates().candidates() != self.header.candidates.as_slice() {
            return Err(Error::InvalidConfig(
                "policy was trained on a different candidate lattice".into(),
            ));
        }
        Ok(())
    }

    /// Greedy rollout of `n_bs` placements after `pre_deployed`.
    pub fn place(
        &self,
        env: &mut PlacementEnv,
        pre_deployed: &[Px],
        n_bs: usize,
    ) -> Result<Placement> {
        self.check_env(env)?;
        let start = Instant::now();
        env.reset(pre_deployed)?;
        let mut state = env.state().expect("reset").to_tensor();
        let mut placements = Vec::with_capacity(n_bs);
        let r = crate::predictor::evaluate_placement(
            env.predictor().as_ref(),
            pre_deployed,
            &env.config().thresholds,
        )?;
        let (mut cr, mut er) = (r.cr, r.er);
        for _ in 0..n_bs {
            let mask = env.action_mask();
            if !mask.iter().any(|&m| m) {
                break;
            }
            let q = self.network.forward(&state).data;
            let action = select_action(&q, &mask, 0.0, &mut ChaCha8Rng::seed_from_u64(0))?;
            let out = env.step_unbudgeted(action)?;
            placements.push(env.candidates().candidates()[action]);
            (cr, er) = (out.cr, out.er);
            state = out.state.to_tensor();
        }
        Ok(Placement {
            placements,
            cr,
            er,
            per_step: env.trace().to_vec(),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(serde_json::to_value(&self.header)?);
        ck.push("online", self.network.export_state());
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let header: PolicyHeader = serde_json::from_value(ck.header.clone())?;
        let mut network = QNetwork::new(header.spec.clone(), &mut ChaCha8Rng::seed_from_u64(0))?;
        network
            .import_state(ck.blob("online")?)
            .map_err(Error::Checkpoint)?;
        Ok(Policy { header, network })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Learning curve as CSV with columns episode, return, epsilon, loss.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("episode,return,epsilon,loss\n");
    for p in curve {
        let loss = p.loss.map(|l| format!("{l}")).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", p.episode, p.ret, p.epsilon, loss));
    }
    out
}
