//! Parallel one-step rollout collection with per-environment seeded streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::Env;
use crate::policy::{log_prob, sample_action, ActorCritic};
use crate::ppo::{normalized_advantages, RolloutBatch};

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for `(root, stream, index)`.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index)
}

/// One episode per environment instance; episodes run concurrently and are
/// gathered in instance order, so the batch does not depend on scheduling.
pub fn collect_rollouts<E: Env>(
    policy: &ActorCritic,
    env: &E,
    n_envs: usize,
    seed: u64,
    iteration: u64,
) -> RolloutBatch {
    assert!(n_envs >= 1);
    let sd = env.state_dim();
    let ad = env.action_dim();
    let mut rngs: Vec<ChaCha8Rng> = (0..n_envs)
        .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(seed, iteration, i as u64)))
        .collect();
    let mut states = Vec::with_capacity(n_envs * sd);
    for rng in rngs.iter_mut() {
        states.extend(env.sample_state(rng));
    }
    let fwd = policy.forward_batch(&states, n_envs);
    let means = fwd.means().to_vec();
    let values = fwd.values().to_vec();
    let std = policy.std();
    let mut actions = Vec::with_capacity(n_envs * ad);
    let mut log_probs = Vec::with_capacity(n_envs);
    for (i, rng) in rngs.iter_mut().enumerate() {
        let mu = &means[i * ad..(i + 1) * ad];
        let a = sample_action(mu, &std, rng);
        log_probs.push(log_prob(&a, mu, &policy.log_std));
        actions.extend(a);
    }
    let steps: Vec<_> = (0..n_envs)
        .into_par_iter()
        .map(|i| env.step(&states[i * sd..(i + 1) * sd], &actions[i * ad..(i + 1) * ad]))
        .collect();
    let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
    RolloutBatch {
        state_dim: sd,
        action_dim: ad,
        advantages: normalized_advantages(&rewards, &values),
        states,
        actions,
        log_probs,
        rewards,
        values,
        old_means: means,
        old_log_std: policy.log_std.clone(),
        steps,
    }
}
