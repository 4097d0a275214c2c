//! Clipped-surrogate policy optimisation specialised to one-step episodes.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvStep;
use crate::policy::{entropy, gaussian_kl, log_prob, ActorCritic};
use crate::TrainError;

pub const LR_MIN: f64 = 1e-5;
pub const LR_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub epochs: usize,
    pub num_minibatches: usize,
    pub lr: f64,
    /// Discount and GAE factor; inert for one-step episodes.
    pub gamma: f64,
    pub lam: f64,
    pub desired_kl: f64,
    pub max_grad_norm: f64,
    /// Learning-rate multiplier of the log standard deviation parameters.
    pub log_std_lr_scale: f64,
    pub iterations: usize,
    pub n_envs: usize,
    pub seed: u64,
    /// Checkpoint period in iterations (0 writes only the final checkpoint).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            entropy_coef: 0.01,
            value_coef: 1.0,
            epochs: 10,
            num_minibatches: 1,
            lr: 1e-3,
            gamma: 0.99,
            lam: 0.95,
            desired_kl: 0.01,
            max_grad_norm: 1.0,
            log_std_lr_scale: 1.0,
            iterations: 2000,
            n_envs: 256,
            seed: 0,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err("clip must be in (0, 1)".into());
        }
        if self.epochs == 0 || self.num_minibatches == 0 || self.n_envs == 0 || self.iterations == 0 {
            return Err("epochs, num_minibatches, n_envs and iterations must be positive".into());
        }
        if self.num_minibatches > self.n_envs {
            return Err("num_minibatches cannot exceed n_envs".into());
        }
        let positive = [
            self.lr,
            self.gamma,
            self.lam,
            self.desired_kl,
            self.max_grad_norm,
            self.log_std_lr_scale,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err("lr, gamma, lam, desired_kl, max_grad_norm and log_std_lr_scale must be positive".into());
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return Err("loss coefficients must be non-negative".into());
        }
        Ok(())
    }
}

/// One batch of one-step episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub state_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    /// Sampled actions in normalized units, before clipping.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub old_means: Vec<f64>,
    pub old_log_std: Vec<f64>,
    pub steps: Vec<EnvStep>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }

    pub fn old_mean(&self, i: usize) -> &[f64] {
        &self.old_means[i * self.action_dim..(i + 1) * self.action_dim]
    }
}

/// `r - V`, shifted and scaled to zero mean and unit variance.
pub fn normalized_advantages(rewards: &[f64], values: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = rewards.iter().zip(values).map(|(r, v)| r - v).collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    raw.iter().map(|a| (a - mean) * scale).collect()
}

/// Loss components of one minibatch evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub surrogate: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    /// Mean `KL(old ‖ current)` over the minibatch.
    pub kl: f64,
}

/// Loss of the minibatch `idx` and, when `grad` is given, its gradient in
/// the flat order actor, critic, log std (accumulated into `grad`).
pub fn minibatch_loss(
    policy: &ActorCritic,
    batch: &RolloutBatch,
    idx: &[usize],
    cfg: &TrainConfig,
    grad: Option<&mut [f64]>,
) -> LossTerms {
    let (sd, ad) = (batch.state_dim, batch.action_dim);
    let b = idx.len();
    let inv_b = 1.0 / b as f64;
    let mut x = Vec::with_capacity(b * sd);
    for &i in idx {
        x.extend_from_slice(batch.state(i));
    }
    let fwd = policy.forward_batch(&x, b);
    let means = fwd.means();
    let values = fwd.values();
    let log_std = &policy.log_std;
    let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();

    let mut t = LossTerms::default();
    let mut d_mean = vec![0.0; b * ad];
    let mut d_value = vec![0.0; b];
    let mut d_log_std = vec![0.0; ad];
    for (k, &i) in idx.iter().enumerate() {
        let mu = &means[k * ad..(k + 1) * ad];
        let a = batch.action(i);
        let adv = batch.advantages[i];
        let ratio = (log_prob(a, mu, log_std) - batch.log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let (unclipped_loss, clipped_loss) = (-adv * ratio, -adv * clipped);
        t.surrogate += unclipped_loss.max(clipped_loss) * inv_b;
        // d(loss)/d(logp); zero where the clipped branch is active
        let g_logp = if unclipped_loss >= clipped_loss {
            -adv * ratio * inv_b
        } else {
            0.0
        };
        for j in 0..ad {
            let diff = a[j] - mu[j];
            d_mean[k * ad + j] = g_logp * diff * inv_var[j];
            d_log_std[j] += g_logp * (diff * diff * inv_var[j] - 1.0);
        }
        let err = values[k] - batch.rewards[i];
        t.value += err * err * inv_b;
        d_value[k] = cfg.value_coef * 2.0 * err * inv_b;
        t.kl += gaussian_kl(batch.old_mean(i), &batch.old_log_std, mu, log_std) * inv_b;
    }
    t.entropy = entropy(log_std);
    t.total = t.surrogate + cfg.value_coef * t.value - cfg.entropy_coef * t.entropy;

    if let Some(grad) = grad {
        let na = policy.actor.num_params();
        let nc = policy.critic.num_params();
        assert_eq!(grad.len(), na + nc + ad);
        let (ga, rest) = grad.split_at_mut(na);
        let (gc, gs) = rest.split_at_mut(nc);
        policy.actor.backward(&fwd.actor, &d_mean, ga);
        policy.critic.backward(&fwd.critic, &d_value, gc);
        for j in 0..ad {
            gs[j] += d_log_std[j] - cfg.entropy_coef;
        }
    }
    t
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One step with per-part learning rates `lr * scale[part]`.
    pub fn step(&mut self, parts: [&mut [f64]; 3], grad: &[f64], lr: f64, scale: [f64; 3]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut k = 0;
        for (part, s) in parts.into_iter().zip(scale) {
            let lr = lr * s;
            for p in part.iter_mut() {
                let g = grad[k];
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
                *p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
                k += 1;
            }
        }
        debug_assert_eq!(k, grad.len());
    }
}

/// Adaptive learning-rate rule: halve above twice the target KL, double
/// below half of it.
pub fn adapt_lr(lr: f64, kl: f64, desired_kl: f64) -> f64 {
    if kl > 2.0 * desired_kl {
        (lr / 2.0).max(LR_MIN)
    } else if kl < 0.5 * desired_kl {
        (lr * 2.0).min(LR_MAX)
    } else {
        lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateMetrics {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub lr: f64,
}

/// Runs `cfg.epochs` passes over the batch. On a non-finite loss or gradient
/// the policy and optimiser are restored and an error is returned.
pub fn ppo_update<R: Rng>(
    policy: &mut ActorCritic,
    adam: &mut Adam,
    batch: &RolloutBatch,
    cfg: &TrainConfig,
    lr: &mut f64,
    rng: &mut R,
) -> Result<UpdateMetrics, TrainError> {
    assert!(!batch.is_empty());
    let snapshot = (policy.clone(), adam.clone(), *lr);
    let n = batch.len();
    let chunks = cfg.num_minibatches.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; policy.num_params()];
    let mut metrics = UpdateMetrics::default();
    let mut count = 0usize;
    for _ in 0..cfg.epochs {
        if chunks > 1 {
            order.shuffle(rng);
        }
        for c in 0..chunks {
            let idx = &order[c * n / chunks..(c + 1) * n / chunks];
            grad.iter_mut().for_each(|g| *g = 0.0);
            let t = minibatch_loss(policy, batch, idx, cfg, Some(&mut grad));
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !t.total.is_finite() || !norm.is_finite() {
                (*policy, *adam, *lr) = snapshot;
                return Err(TrainError::Diverged(format!(
                    "non-finite loss {} or gradient norm {norm}",
                    t.total
                )));
            }
            *lr = adapt_lr(*lr, t.kl, cfg.desired_kl);
            if norm > cfg.max_grad_norm {
                let s = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            adam.step(policy.param_slices_mut(), &grad, *lr, [1.0, 1.0, cfg.log_std_lr_scale]);
            metrics.surrogate += t.surrogate;
            metrics.value_loss += t.value;
            metrics.entropy += t.entropy;
            metrics.approx_kl += t.kl;
            count += 1;
        }
    }
    let inv = 1.0 / count as f64;
    metrics.surrogate *= inv;
    metrics.value_loss *= inv;
    metrics.entropy *= inv;
    metrics.approx_kl *= inv;
    metrics.lr = *lr;
    Ok(metrics)
}
