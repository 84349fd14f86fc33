//! PPO training of discrete-action policies with configurable collision
//! penalties.
//!
//! Everything here is single-threaded and driven by one seeded generator,
//! so a (config, seed) pair always produces the same learning curve and the
//! same weights.

pub mod mlp;
pub mod ppo;

use std::collections::BTreeSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::json_digest;
use crate::environment::{Action, EnvConfig, EnvError, Environment, PenaltyScope, NUM_ACTIONS, OBS_DIM};
use crate::network::{argmax, Network, NetworkMetadata};
use crate::property::property_face;

pub use ppo::{
    clipped_objective, collect_rollout, compute_gae, grad_check, loss_and_grads, ppo_update, ActorCritic, Batch,
    GradCheck, LossCoefficients, LossTerms, Optimizers, RolloutBuffer, RolloutStats, Runner, UpdateSettings,
    UpdateStats,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("unknown property `{0}` in safety_mode subset")]
    UnknownProperty(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("non-finite loss in update epoch {update_epoch}, minibatch {minibatch}: {terms:?}")]
    NonFiniteLoss {
        update_epoch: usize,
        minibatch: usize,
        terms: LossTerms,
    },
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        /// Parameters after the last epoch that completed cleanly.
        last_good: Box<ActorCritic>,
    },
    #[error("failed to parse training config: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Which workspace faces carry the collision penalty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SafetyMode {
    /// Every face and obstacle, in both phases.
    AllPenalties,
    /// No penalty at all.
    None,
    /// Only the faces of the named properties.
    Subset { properties: Vec<String> },
}

impl SafetyMode {
    pub fn scope(&self) -> Result<PenaltyScope, TrainError> {
        match self {
            SafetyMode::AllPenalties => Ok(PenaltyScope::all()),
            SafetyMode::None => Ok(PenaltyScope::none()),
            SafetyMode::Subset { properties } => {
                let faces = properties
                    .iter()
                    .map(|name| property_face(name).ok_or_else(|| TrainError::UnknownProperty(name.clone())))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                Ok(PenaltyScope::from_faces(faces))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Joint gradient-norm clip; `null` disables it.
    pub max_grad_norm: Option<f64>,
    pub hidden_layers: Vec<usize>,
    pub safety_mode: SafetyMode,
    /// Keep a policy snapshot every this many epochs (0 = none).
    pub checkpoint_every: usize,
    pub env: EnvConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 500,
            steps_per_epoch: 2000,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            update_epochs: 10,
            minibatch_size: 256,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: Some(0.5),
            hidden_layers: vec![64, 64],
            safety_mode: SafetyMode::AllPenalties,
            checkpoint_every: 0,
            env: EnvConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must be in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.update_epochs == 0 || self.minibatch_size == 0 {
            return bad("epochs, steps_per_epoch, update_epochs and minibatch_size must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef > 0.0) {
            return bad("entropy_coef must be >= 0 and value_coef > 0");
        }
        if matches!(self.max_grad_norm, Some(m) if !(m > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        self.safety_mode.scope()?;
        self.env.validate()?;
        Ok(())
    }

    pub fn loss_coefficients(&self) -> LossCoefficients {
        LossCoefficients {
            clip_epsilon: self.clip_epsilon,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }

    /// Epoch (1-based) after which the early-training policy is kept.
    pub fn primitive_epoch(&self) -> usize {
        (self.epochs / 2).max(1)
    }
}

/// One learning-curve row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean return of episodes finished during the epoch.
    pub mean_reward: f64,
    pub success_rate: f64,
    /// Steps ending in an obstacle or outside the workspace.
    pub collisions: usize,
    pub episodes: usize,
    pub penalties: usize,
    pub update: UpdateStats,
}

impl EpochStats {
    pub const CSV_HEADER: &'static str =
        "epoch,mean_reward,success_rate,collisions,episodes,penalties,policy_loss,value_loss,entropy,approx_kl,clip_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.mean_reward,
            self.success_rate,
            self.collisions,
            self.episodes,
            self.penalties,
            self.update.policy_loss,
            self.update.value_loss,
            self.update.entropy,
            self.update.approx_kl,
            self.update.clip_fraction
        )
    }
}

pub struct TrainOutcome {
    pub actor_critic: ActorCritic,
    pub curve: Vec<EpochStats>,
    /// Policy after [`TrainConfig::primitive_epoch`] epochs.
    pub primitive: Network,
    /// `(epoch, policy)` snapshots taken every `checkpoint_every` epochs.
    pub checkpoints: Vec<(usize, Network)>,
}

/// Trains with `config`, calling `on_epoch` after each epoch.
pub fn train(config: &TrainConfig, mut on_epoch: impl FnMut(&EpochStats)) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let scope = config.safety_mode.scope()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ac = ActorCritic::new(OBS_DIM, &config.hidden_layers, NUM_ACTIONS, &mut rng);
    let mut opt = Optimizers::new(&ac, config.learning_rate);
    let env_seed = rng.next_u64();
    let mut runner = Runner::new(Environment::new(config.env.clone(), scope, env_seed), &mut rng);
    let settings = UpdateSettings {
        coefs: config.loss_coefficients(),
        update_epochs: config.update_epochs,
        minibatch_size: config.minibatch_size,
        max_grad_norm: config.max_grad_norm,
    };
    let metadata = |name: &str| NetworkMetadata {
        name: name.to_string(),
        training_config_digest: config.digest(),
    };
    let mut curve = Vec::with_capacity(config.epochs);
    let mut primitive = None;
    let mut checkpoints = Vec::new();
    for epoch in 1..=config.epochs {
        let (mut buf, rollout) = collect_rollout(&mut runner, &ac, config.steps_per_epoch, &mut rng);
        compute_gae(&mut buf, config.gamma, config.gae_lambda);
        let last_good = ac.clone();
        let diverged = |reason: String| TrainError::Diverged {
            epoch,
            reason,
            last_good: Box::new(last_good.clone()),
        };
        let update = ppo_update(&mut ac, &mut opt, &buf, &settings, &mut rng).map_err(|e| diverged(e.to_string()))?;
        if !ac.is_finite() {
            return Err(diverged("non-finite parameters after update".into()));
        }
        let stats = EpochStats {
            epoch,
            mean_reward: rollout.mean_return(),
            success_rate: rollout.success_rate(),
            collisions: rollout.collisions,
            episodes: rollout.episodes,
            penalties: rollout.penalties,
            update,
        };
        on_epoch(&stats);
        curve.push(stats);
        if epoch == config.primitive_epoch() {
            let mut p = ac.policy.clone();
            p.metadata = metadata(&format!("policy@{epoch}"));
            primitive = Some(p);
        }
        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            let mut p = ac.policy.clone();
            p.metadata = metadata(&format!("policy@{epoch}"));
            checkpoints.push((epoch, p));
        }
    }
    ac.policy.metadata = metadata("policy");
    ac.value.metadata = metadata("value");
    Ok(TrainOutcome {
        actor_critic: ac,
        curve,
        primitive: primitive.expect("primitive epoch is within range"),
        checkpoints,
    })
}

/// Greedy-policy evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
    pub mean_length: f64,
    /// Steps ending in an obstacle or outside the workspace, per episode.
    pub collisions_per_episode: f64,
}

/// Runs `episodes` argmax-policy episodes; episode `i` resets with
/// `seed + i`.
pub fn evaluate_greedy(policy: &Network, env: &EnvConfig, episodes: usize, seed: u64) -> EvalStats {
    let mut successes = 0;
    let mut reward = 0.0;
    let mut steps = 0;
    let mut collisions = 0;
    let scope = PenaltyScope::all();
    for i in 0..episodes {
        let (mut state, mut obs) = env.reset(seed.wrapping_add(i as u64));
        loop {
            let a = Action::new(argmax(&policy.forward_unchecked(&obs.0))).expect("27 policy outputs");
            let t = env.step(&state, a, &scope).expect("episode is running");
            reward += t.reward;
            steps += 1;
            collisions += usize::from(t.info.any_collision());
            state = t.state;
            obs = t.observation;
            if t.done {
                successes += usize::from(t.info.success);
                break;
            }
        }
    }
    let n = episodes.max(1) as f64;
    EvalStats {
        episodes,
        success_rate: successes as f64 / n,
        mean_reward: reward / n,
        mean_length: steps as f64 / n,
        collisions_per_episode: collisions as f64 / n,
    }
}
