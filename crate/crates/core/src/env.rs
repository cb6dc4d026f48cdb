//! Sequential base-station deployment as a Markov decision process.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, Px};
use crate::metrics::{coverage_indicator, Thresholds};
use crate::nn::Tensor;
use crate::predictor::{rates, Predictor};
use crate::scene::DeployableSet;

pub const DEFAULT_PENALTY: f64 = -0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub n_bs_budget: usize,
    pub thresholds: Thresholds,
    pub penalty: f64,
    pub candidate_stride: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_bs_budget: 1,
            thresholds: Thresholds::default(),
            penalty: DEFAULT_PENALTY,
            candidate_stride: 4,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bs_budget == 0 {
            return Err(Error::InvalidConfig("n_bs_budget must be >= 1".into()));
        }
        if !(self.penalty < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "penalty {} must be negative",
                self.penalty
            )));
        }
        if self.candidate_stride == 0 {
            return Err(Error::InvalidConfig("candidate_stride must be >= 1".into()));
        }
        self.thresholds.validate()
    }
}

/// Coverage reward gated by exposure compliance.
pub fn reward(cr: f64, er: f64, thresholds: &Thresholds, penalty: f64) -> f64 {
    if er >= thresholds.lambda_er {
        cr
    } else {
        penalty
    }
}

/// Discounted return `Σ γ^k r_k`.
pub fn episode_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "discount {gamma} must lie in (0, 1]"
        )));
    }
    Ok(rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentState {
    /// Coverage indicator of the current deployment.
    pub coverage: Mask,
    /// Outdoor indicator (building pixels are 0).
    pub outdoor: Mask,
    /// Pre-deployed stations first, then the agent's placements in order.
    pub deployed: Vec<Px>,
    pub budget_remaining: usize,
}

impl DeploymentState {
    /// `[1, 2, L, L]` network input: coverage channel, building channel.
    pub fn to_tensor(&self) -> Tensor {
        let n = self.coverage.size();
        let data = self
            .coverage
            .iter()
            .chain(self.outdoor.iter())
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        Tensor::from_vec(1, 2, n, n, data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: DeploymentState,
    pub reward: f64,
    pub terminal: bool,
    pub cr: f64,
    pub er: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub action: Px,
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(rename = "ER")]
    pub er: f64,
    pub reward: f64,
}

pub struct PlacementEnv {
    predictor: Arc<dyn Predictor>,
    config: EnvConfig,
    candidates: DeployableSet,
    state: Option<DeploymentState>,
    trace: Vec<TraceRecord>,
}

impl PlacementEnv {
    pub fn new(predictor: Arc<dyn Predictor>, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let candidates = DeployableSet::new(predictor.scene(), config.candidate_stride)?;
        Ok(PlacementEnv {
            predictor,
            config,
            candidates,
            state: None,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn candidates(&self) -> &DeployableSet {
        &self.candidates
    }

    pub fn n_actions(&self) -> usize {
        self.candidates.len()
    }

    pub fn predictor(&self) -> &Arc<dyn Predictor> {
        &self.predictor
    }

    pub fn state(&self) -> Option<&DeploymentState> {
        self.state.as_ref()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    fn coverage_of(&self, deployed: &[Px]) -> Result<Mask> {
        let scene = self.predictor.scene();
        if deployed.is_empty() {
            return Ok(Grid::filled(scene.grid_size(), false));
        }
        let maps = self.predictor.predict(deployed)?;
        Ok(coverage_indicator(
            &maps.rss_dbm,
            self.config.thresholds.phi_dbm,
        ))
    }

    pub fn reset(&mut self, pre_deployed: &[Px]) -> Result<DeploymentState> {
        let scene = self.predictor.scene();
        for (k, &p) in pre_deployed.iter().enumerate() {
            scene.check_deployable(p)?;
            if pre_deployed[..k].contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "pre-deployed station {p:?} listed twice"
                )));
            }
        }
        let state = DeploymentState {
            coverage: self.coverage_of(pre_deployed)?,
            outdoor: scene.outdoor_mask(),
            deployed: pre_deployed.to_vec(),
            budget_remaining: self.config.n_bs_budget,
        };
        self.trace.clear();
        self.state = Some(state.clone());
        Ok(state)
    }

    /// Legal actions: lattice candidates not already occupied.
    pub fn action_mask(&self) -> Vec<bool> {
        let deployed = self
            .state
            .as_ref()
            .map(|s| s.deployed.as_slice())
            .unwrap_or(&[]);
        self.candidates
            .candidates()
            .iter()
            .map(|p| !deployed.contains(p))
            .collect()
    }

    pub fn has_legal_action(&self) -> bool {
        self.action_mask().iter().any(|&m| m)
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        self.apply(action, true)
    }

    /// Like [`PlacementEnv::step`] but ignores the station budget, for greedy
    /// rollouts longer than the training horizon.
    pub fn step_unbudgeted(&mut self, action: usize) -> Result<StepOutcome> {
        self.apply(action, false)
    }

    fn apply(&mut self, action: usize, enforce_budget: bool) -> Result<StepOutcome> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("step before reset".into()))?;
        if enforce_budget && state.budget_remaining == 0 {
            return Err(Error::InvalidConfig("episode already terminated".into()));
        }
        let mask = self.action_mask();
        if !mask.get(action).copied().unwrap_or(false) {
            return Err(Error::IllegalAction(action));
        }
        let p = self.candidates.candidates()[action];
        let mut deployed = state.deployed.clone();
        deployed.push(p);
        let maps = self.predictor.predict(&deployed)?;
        let r = rates(&maps, &self.config.thresholds)?;
        let reward = reward(r.cr, r.er, &self.config.thresholds, self.config.penalty);
        let next = DeploymentState {
            coverage: coverage_indicator(&maps.rss_dbm, self.config.thresholds.phi_dbm),
            outdoor: state.outdoor.clone(),
            deployed,
            budget_remaining: state.budget_remaining.saturating_sub(1),
        };
        self.state = Some(next.clone());
        let terminal = next.budget_remaining == 0 || !self.has_legal_action();
        self.trace.push(TraceRecord {
            step: self.trace.len(),
            action: p,
            cr: r.cr,
            er: r.er,
            reward,
        });
        Ok(StepOutcome {
            state: next,
            reward,
            terminal,
            cr: r.cr,
            er: r.er,
        })
    }

    /// Step by grid position instead of action index.
    pub fn step_px(&mut self, p: Px) -> Result<StepOutcome> {
        let idx = self
            .candidates
            .index_of(p)
            .ok_or(Error::NotDeployable(p.0, p.1))?;
        self.step(idx)
    }

    /// Write the current episode's trace as JSON lines.
    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for rec in &self.trace {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        crate::io::write_bytes(path, &out)
    }
}
