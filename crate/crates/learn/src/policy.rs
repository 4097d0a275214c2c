//! Gaussian actor-critic with a state-independent log standard deviation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use pronk_core::thrust::{ACTION_DIM, STATE_DIM};

use crate::mlp::{Mlp, MlpCache};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
    pub init_std: f64,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Orthogonal-init gain of the last actor layer.
    pub actor_output_gain: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 256, 128],
            init_std: 1.0,
            state_dim: STATE_DIM,
            action_dim: ACTION_DIM,
            actor_output_gain: 0.01,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.state_dim == 0 || self.action_dim == 0 || self.hidden.contains(&0) {
            return Err("policy dimensions must be positive".into());
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err("init_std must be positive".into());
        }
        Ok(())
    }

    fn sizes(&self, out: usize) -> Vec<usize> {
        let mut s = vec![self.state_dim];
        s.extend(&self.hidden);
        s.push(out);
        s
    }
}

/// Policy and value networks plus the per-dimension log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: Vec<f64>,
}

/// Output of a single-state forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub value: f64,
}

/// Batched forward pass with caches for backpropagation.
pub struct BatchForward {
    pub actor: MlpCache,
    pub critic: MlpCache,
}

impl BatchForward {
    pub fn means(&self) -> &[f64] {
        self.actor.output()
    }

    pub fn values(&self) -> &[f64] {
        self.critic.output()
    }
}

impl ActorCritic {
    pub fn new<R: Rng>(cfg: &PolicyConfig, rng: &mut R) -> Self {
        let gain = 2f64.sqrt();
        let actor = Mlp::new(&cfg.sizes(cfg.action_dim), gain, cfg.actor_output_gain, rng);
        let critic = Mlp::new(&cfg.sizes(1), gain, 1.0, rng);
        Self {
            actor,
            critic,
            log_std: vec![cfg.init_std.ln(); cfg.action_dim],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params() + self.log_std.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn forward(&self, state: &[f64]) -> PolicyOutput {
        let f = self.forward_batch(state, 1);
        PolicyOutput {
            mean: f.means().to_vec(),
            std: self.std(),
            value: f.values()[0],
        }
    }

    /// Deterministic action (the policy mean), normalized units.
    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        self.actor.forward(state, 1)
    }

    pub fn act_batch(&self, states: &[f64], batch: usize) -> Vec<f64> {
        self.actor.forward(states, batch)
    }

    pub fn forward_batch(&self, states: &[f64], batch: usize) -> BatchForward {
        BatchForward {
            actor: self.actor.forward_cached(states, batch),
            critic: self.critic.forward_cached(states, batch),
        }
    }

    /// Parameter slices in the flat gradient order: actor, critic, log std.
    pub fn param_slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.actor.params_mut(),
            self.critic.params_mut(),
            &mut self.log_std,
        ]
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.actor.params());
        v.extend_from_slice(self.critic.params());
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut off = 0;
        for part in self.param_slices_mut() {
            let n = part.len();
            part.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }
}

/// Draws `mean + std ⊙ ε` with standard normal `ε`.
pub fn sample_action<R: Rng>(mean: &[f64], std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(std)
        .map(|(m, s)| {
            let e: f64 = rng.sample(StandardNormal);
            m + s * e
        })
        .collect()
}

/// Log density of a diagonal Gaussian.
pub fn log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), ls)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum()
}

/// `KL(old ‖ new)` between diagonal Gaussians.
pub fn gaussian_kl(mean_old: &[f64], log_std_old: &[f64], mean_new: &[f64], log_std_new: &[f64]) -> f64 {
    (0..mean_old.len())
        .map(|j| {
            let var_old = (2.0 * log_std_old[j]).exp();
            let var_new = (2.0 * log_std_new[j]).exp();
            let dm = mean_old[j] - mean_new[j];
            log_std_new[j] - log_std_old[j] + (var_old + dm * dm) / (2.0 * var_new) - 0.5
        })
        .sum()
}
