//! Clipped-surrogate PPO: rollouts, advantage estimation, loss gradients.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{backward, forward_tape, init_network, parameter_mut, parameters, Adam, BackwardScratch, Gradients, Tape};
use super::TrainError;
use crate::environment::{Action, Environment, OBS_DIM};
use crate::network::Network;

/// Policy logits network and state-value network, trained jointly.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy: Network,
    pub value: Network,
}

impl ActorCritic {
    pub fn new(input_dim: usize, hidden: &[usize], actions: usize, rng: &mut impl Rng) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![input_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        Self {
            policy: init_network(&sizes(actions), 0.01, rng),
            value: init_network(&sizes(1), 1.0, rng),
        }
    }

    pub fn is_finite(&self) -> bool {
        super::mlp::is_finite(&self.policy) && super::mlp::is_finite(&self.value)
    }

    pub fn value_of(&self, obs: &[f64]) -> f64 {
        self.value.forward_unchecked(obs)[0]
    }
}

/// Log-softmax, stable for large logits.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// `min(r·A, clip(r, 1 − ε, 1 + ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Episode ended with success; no bootstrap past this step.
    pub terminals: Vec<bool>,
    /// Episode ended (success or step limit) after this step.
    pub episode_ends: Vec<bool>,
    /// `V(s')`, filled where the next value is not `values[t + 1]`: at
    /// truncations and at the final step of the buffer.
    pub next_values: Vec<f64>,
    pub penalized: Vec<bool>,
    pub collisions: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Counters for episodes completed during one rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutStats {
    pub episodes: usize,
    pub successes: usize,
    pub episode_return_sum: f64,
    /// Steps ending inside an obstacle or outside the workspace.
    pub collisions: usize,
    pub penalties: usize,
}

impl RolloutStats {
    pub fn mean_return(&self) -> f64 {
        if self.episodes == 0 {
            f64::NAN
        } else {
            self.episode_return_sum / self.episodes as f64
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// An environment plus the running episode, carried across rollouts.
#[derive(Debug, Clone)]
pub struct Runner {
    pub env: Environment,
    obs: [f64; OBS_DIM],
    episode_return: f64,
}

impl Runner {
    pub fn new(mut env: Environment, rng: &mut impl RngCore) -> Self {
        let obs = env.reset(rng.next_u64()).0;
        Self {
            env,
            obs,
            episode_return: 0.0,
        }
    }
}

/// Samples `steps` transitions from the softmax policy.
pub fn collect_rollout(
    runner: &mut Runner,
    ac: &ActorCritic,
    steps: usize,
    rng: &mut impl RngCore,
) -> (RolloutBuffer, RolloutStats) {
    let mut buf = RolloutBuffer::default();
    let mut stats = RolloutStats::default();
    for t in 0..steps {
        let obs = runner.obs;
        let logp = log_softmax(&ac.policy.forward_unchecked(&obs));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut a = logp.len() - 1;
        for (i, lp) in logp.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                a = i;
                break;
            }
        }
        let tr = runner
            .env
            .step(Action::new(a).expect("policy output has one logit per action"))
            .expect("runner resets finished episodes");
        buf.observations.push(obs);
        buf.actions.push(a);
        buf.log_probs.push(logp[a]);
        buf.rewards.push(tr.reward);
        buf.values.push(ac.value_of(&obs));
        buf.terminals.push(tr.info.success);
        buf.episode_ends.push(tr.done);
        buf.penalized.push(tr.info.penalized);
        buf.collisions.push(tr.info.any_collision());
        stats.collisions += usize::from(tr.info.any_collision());
        stats.penalties += usize::from(tr.info.penalized);
        runner.episode_return += tr.reward;
        let next_value = if tr.info.success {
            0.0
        } else if tr.done || t + 1 == steps {
            ac.value_of(&tr.observation.0)
        } else {
            f64::NAN
        };
        buf.next_values.push(next_value);
        if tr.done {
            stats.episodes += 1;
            stats.successes += usize::from(tr.info.success);
            stats.episode_return_sum += runner.episode_return;
            runner.episode_return = 0.0;
            runner.obs = runner.env.reset(rng.next_u64()).0;
        } else {
            runner.obs = tr.observation.0;
        }
    }
    (buf, stats)
}

/// Generalized advantage estimation. Success steps do not bootstrap;
/// truncated episodes and the buffer's last step bootstrap from
/// `next_values`. Sets `advantages` and `returns = advantages + values`.
pub fn compute_gae(buf: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let n = buf.len();
    buf.advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let last = t + 1 == n;
        let next_value = if buf.terminals[t] {
            0.0
        } else if buf.episode_ends[t] || last {
            buf.next_values[t]
        } else {
            buf.values[t + 1]
        };
        let delta = buf.rewards[t] + gamma * next_value - buf.values[t];
        let carry = if buf.episode_ends[t] || last { 0.0 } else { next_adv };
        next_adv = delta + gamma * lambda * carry;
        buf.advantages[t] = next_adv;
    }
    buf.returns = buf.advantages.iter().zip(&buf.values).map(|(a, v)| a + v).collect();
}

/// Rescales to mean 0 and standard deviation 1 (population).
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if values.is_empty() {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}

/// Samples for one loss evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub observations: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn from_indices(buf: &RolloutBuffer, idx: &[usize]) -> Self {
        Self {
            observations: idx.iter().map(|&i| buf.observations[i]).collect(),
            actions: idx.iter().map(|&i| buf.actions[i]).collect(),
            old_log_probs: idx.iter().map(|&i| buf.log_probs[i]).collect(),
            advantages: idx.iter().map(|&i| buf.advantages[i]).collect(),
            returns: idx.iter().map(|&i| buf.returns[i]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefficients {
    pub clip_epsilon: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Batch means. The minimized loss is
/// `total = policy_loss + value_coef·value_loss − entropy_coef·entropy`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    /// Negated clipped surrogate.
    pub policy_loss: f64,
    /// Mean squared error of the value head.
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    /// `mean((r − 1) − ln r)`.
    pub approx_kl: f64,
}

pub struct LossWorkspace {
    tape: Tape,
    scratch: BackwardScratch,
    dlogits: Vec<f64>,
}

impl Default for LossWorkspace {
    fn default() -> Self {
        Self {
            tape: Tape::default(),
            scratch: BackwardScratch::default(),
            dlogits: Vec::new(),
        }
    }
}

/// Loss terms and, when `grads` is given, their gradients with respect to
/// the policy and value parameters (overwriting `grads`).
pub fn loss_and_grads(
    ac: &ActorCritic,
    batch: &Batch,
    coefs: &LossCoefficients,
    mut grads: Option<(&mut Gradients, &mut Gradients)>,
    ws: &mut LossWorkspace,
) -> LossTerms {
    if let Some((gp, gv)) = grads.as_mut() {
        gp.fill(0.0);
        gv.fill(0.0);
    }
    let n = batch.len() as f64;
    let eps = coefs.clip_epsilon;
    let mut t = LossTerms::default();
    for i in 0..batch.len() {
        let obs = &batch.observations[i];
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let logits = forward_tape(&ac.policy, obs, &mut ws.tape);
        let logp = log_softmax(logits);
        let ratio = (logp[a] - batch.old_log_probs[i]).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        t.policy_loss -= unclipped.min(clipped) / n;
        if (ratio - 1.0).abs() > eps {
            t.clip_fraction += 1.0 / n;
        }
        t.approx_kl += ((ratio - 1.0) - (logp[a] - batch.old_log_probs[i])) / n;
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        t.entropy += entropy / n;

        if let Some((gp, _)) = grads.as_mut() {
            // d min(...)/d logp_a is r·A on the unclipped branch, 0 otherwise.
            let dobj = if unclipped <= clipped { unclipped } else { 0.0 };
            ws.dlogits.clear();
            for (k, (&p, &l)) in probs.iter().zip(&logp).enumerate() {
                let onehot = if k == a { 1.0 } else { 0.0 };
                let d_surrogate = dobj * (onehot - p);
                let d_entropy = -p * (l + entropy);
                ws.dlogits.push((-d_surrogate - coefs.entropy_coef * d_entropy) / n);
            }
            backward(&ac.policy, &ws.tape, &ws.dlogits, gp, &mut ws.scratch);
        }

        let v = forward_tape(&ac.value, obs, &mut ws.tape)[0];
        let err = v - batch.returns[i];
        t.value_loss += err * err / n;
        if let Some((_, gv)) = grads.as_mut() {
            let dv = [coefs.value_coef * 2.0 * err / n];
            backward(&ac.value, &ws.tape, &dv, gv, &mut ws.scratch);
        }
    }
    t.total = t.policy_loss + coefs.value_coef * t.value_loss - coefs.entropy_coef * t.entropy;
    t
}

/// Settings for [`ppo_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSettings {
    pub coefs: LossCoefficients,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    /// Clip the joint gradient norm of both networks.
    pub max_grad_norm: Option<f64>,
}

/// Optimizer state for both networks.
#[derive(Debug, Clone)]
pub struct Optimizers {
    pub policy: Adam,
    pub value: Adam,
}

impl Optimizers {
    pub fn new(ac: &ActorCritic, learning_rate: f64) -> Self {
        Self {
            policy: Adam::new(&ac.policy, learning_rate),
            value: Adam::new(&ac.value, learning_rate),
        }
    }
}

/// Means over all minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub minibatches: usize,
}

/// Normalizes advantages over the buffer, then runs `update_epochs` passes
/// of shuffled minibatch descent. A non-finite loss or gradient stops the
/// update before the offending step is applied.
pub fn ppo_update(
    ac: &mut ActorCritic,
    opt: &mut Optimizers,
    buf: &RolloutBuffer,
    settings: &UpdateSettings,
    rng: &mut impl RngCore,
) -> Result<UpdateStats, TrainError> {
    let mut advantages = buf.advantages.clone();
    normalize(&mut advantages);
    let normalized = RolloutBuffer {
        advantages,
        ..buf.clone()
    };
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut gp = Gradients::zeros_like(&ac.policy);
    let mut gv = Gradients::zeros_like(&ac.value);
    let mut ws = LossWorkspace::default();
    let mut stats = UpdateStats::default();
    let size = settings.minibatch_size.max(1);
    for epoch in 0..settings.update_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(size) {
            let batch = Batch::from_indices(&normalized, chunk);
            let t = loss_and_grads(ac, &batch, &settings.coefs, Some((&mut gp, &mut gv)), &mut ws);
            if !t.total.is_finite() || !gp.is_finite() || !gv.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    update_epoch: epoch,
                    minibatch: stats.minibatches,
                    terms: t,
                });
            }
            if let Some(max) = settings.max_grad_norm {
                let norm = (gp.norm_sq() + gv.norm_sq()).sqrt();
                if norm > max {
                    gp.scale(max / norm);
                    gv.scale(max / norm);
                }
            }
            opt.policy.step(&mut ac.policy, &gp);
            opt.value.step(&mut ac.value, &gv);
            stats.policy_loss += t.policy_loss;
            stats.value_loss += t.value_loss;
            stats.entropy += t.entropy;
            stats.clip_fraction += t.clip_fraction;
            stats.approx_kl += t.approx_kl;
            stats.minibatches += 1;
        }
    }
    if stats.minibatches > 0 {
        let m = stats.minibatches as f64;
        stats.policy_loss /= m;
        stats.value_loss /= m;
        stats.entropy /= m;
        stats.clip_fraction /= m;
        stats.approx_kl /= m;
    }
    Ok(stats)
}

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    /// Largest `|a − n| / max(|a|, |n|, floor)`.
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub parameters_checked: usize,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Denominator floor for relative errors, so near-zero gradients are judged
/// on absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Checks `count` randomly chosen parameters (spread over both
/// networks) of the total loss on `batch` against central differences.
/// Policy parameters are differenced through the policy and entropy terms,
/// value parameters through the value term; the total's derivative is the
/// same either way.
pub fn grad_check(ac: &ActorCritic, batch: &Batch, coefs: &LossCoefficients, count: usize, seed: u64) -> GradCheck {
    let mut ws = LossWorkspace::default();
    let mut gp = Gradients::zeros_like(&ac.policy);
    let mut gv = Gradients::zeros_like(&ac.value);
    loss_and_grads(ac, batch, coefs, Some((&mut gp, &mut gv)), &mut ws);
    let analytic: Vec<f64> = gp.values().chain(gv.values()).collect();
    let np = gp.len();
    let current: Vec<f64> = parameters(&ac.policy).chain(parameters(&ac.value)).collect();
    let mut picks: Vec<usize> = (0..analytic.len()).collect();
    picks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    picks.truncate(count);

    let mut probe = ac.clone();
    let h = GRAD_CHECK_STEP;
    // Only the term that depends on the perturbed network is differenced; the
    // other is constant and would add cancellation error of order ε·|L|/h.
    let mut numeric = |i: usize| -> f64 {
        if i < np {
            let mut policy_term = |v: f64| {
                *parameter_mut(&mut probe.policy, i) = v;
                let t = loss_and_grads(&probe, batch, coefs, None, &mut ws);
                t.policy_loss - coefs.entropy_coef * t.entropy
            };
            let d = policy_term(current[i] + h) - policy_term(current[i] - h);
            *parameter_mut(&mut probe.policy, i) = current[i];
            d / (2.0 * h)
        } else {
            // Mean squared error, differenced per sample as
            // (v⁺ − R)² − (v⁻ − R)² = (v⁺ − v⁻)(v⁺ + v⁻ − 2R).
            let j = i - np;
            let mut values = |v: f64| -> Vec<f64> {
                *parameter_mut(&mut probe.value, j) = v;
                batch.observations.iter().map(|o| probe.value_of(o)).collect()
            };
            let up = values(current[i] + h);
            let down = values(current[i] - h);
            *parameter_mut(&mut probe.value, j) = current[i];
            let d: f64 = up
                .iter()
                .zip(&down)
                .zip(&batch.returns)
                .map(|((u, d), r)| (u - d) * (u + d - 2.0 * r))
                .sum();
            coefs.value_coef * d / batch.len() as f64 / (2.0 * h)
        }
    };
    let mut out = GradCheck {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        parameters_checked: picks.len(),
    };
    for &i in &picks {
        let numeric = numeric(i);
        let a = analytic[i];
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        out.max_absolute_error = out.max_absolute_error.max(abs);
        out.max_relative_error = out.max_relative_error.max(rel);
    }
    out
}
