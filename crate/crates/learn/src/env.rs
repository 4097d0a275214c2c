//! One-step environments: the jump episode and an analytic bandit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use pronk_core::quadruped::QuadrupedModel;
use pronk_core::reward::{episode_reward, Penalties, RewardParams};
use pronk_core::simulator::{run_episode, EpisodeConfig, EpisodeOutcome};
use pronk_core::thrust::{ActionRanges, JumpCommand, ACTION_DIM, STATE_DIM};

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub reward: f64,
    pub penalties: Option<Penalties>,
    /// Weighted penalty sum entering the reward.
    pub total_penalty: f64,
    /// Distance between the final and target COM, when defined.
    pub landing_error: Option<f64>,
    pub failed: bool,
}

/// A one-step episodic task: sample a state, act once, observe a reward.
pub trait Env: Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn sample_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// `action` is in normalized units.
    fn step(&self, state: &[f64], action: &[f64]) -> EnvStep;
}

/// Box of jump targets relative to the start pose; angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskRegion {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub yaw_deg: [f64; 2],
    /// Bound on the absolute roll and pitch command.
    pub roll_pitch_max_deg: f64,
}

impl Default for TaskRegion {
    fn default() -> Self {
        Self {
            x: [-0.6, 1.2],
            y: [-0.6, 0.6],
            z: [-0.4, 0.4],
            yaw_deg: [-90.0, 90.0],
            roll_pitch_max_deg: 15.0,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

impl TaskRegion {
    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [("x", self.x), ("y", self.y), ("z", self.z), ("yaw_deg", self.yaw_deg)] {
            if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                return Err(format!("task range {name} must be ordered and finite"));
            }
        }
        if !(self.roll_pitch_max_deg >= 0.0) {
            return Err("roll_pitch_max_deg must be non-negative".into());
        }
        Ok(())
    }

    /// Uniform sample `[Δx, Δy, Δz, Δroll, Δpitch, Δyaw]` (radians).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; STATE_DIM] {
        let rp = self.roll_pitch_max_deg;
        [
            uniform(rng, self.x),
            uniform(rng, self.y),
            uniform(rng, self.z),
            uniform(rng, [-rp, rp]).to_radians(),
            uniform(rng, [-rp, rp]).to_radians(),
            uniform(rng, self.yaw_deg).to_radians(),
        ]
    }
}

/// Jump episode environment over a task region.
#[derive(Debug, Clone)]
pub struct JumpEnv {
    pub model: QuadrupedModel,
    pub reward: RewardParams,
    pub episode: EpisodeConfig,
    pub region: TaskRegion,
    pub ranges: ActionRanges,
}

impl JumpEnv {
    pub fn new(model: QuadrupedModel, reward: RewardParams, episode: EpisodeConfig, region: TaskRegion) -> Self {
        Self {
            model,
            reward,
            episode,
            region,
            ranges: ActionRanges::default(),
        }
    }

    /// Runs the episode for a normalized action.
    pub fn outcome(&self, state: &[f64], action: &[f64]) -> EpisodeOutcome {
        let s: [f64; STATE_DIM] = state.try_into().expect("state dimension");
        let raw = self.ranges.denormalize(action);
        run_episode(&self.model, &JumpCommand::from_state(&s), &raw, &self.episode)
    }
}

impl Env for JumpEnv {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn sample_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.region.sample(rng).to_vec()
    }

    fn step(&self, state: &[f64], action: &[f64]) -> EnvStep {
        let outcome = self.outcome(state, action);
        let (reward, penalties) = episode_reward(&outcome, &self.reward);
        EnvStep {
            reward,
            total_penalty: penalties.weighted_sum(&self.reward.weights),
            penalties: Some(penalties),
            landing_error: Some(outcome.landing_error().norm()),
            failed: outcome.failure != pronk_core::simulator::Failure::None,
        }
    }
}

/// Bandit with reward `-‖a - a*‖²`; the state is noise the policy must ignore.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditEnv {
    pub target: Vec<f64>,
    pub state_dim: usize,
}

impl Env for BanditEnv {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.target.len()
    }

    fn sample_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.state_dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn step(&self, _state: &[f64], action: &[f64]) -> EnvStep {
        let d2: f64 = action.iter().zip(&self.target).map(|(a, t)| (a - t).powi(2)).sum();
        EnvStep {
            reward: -d2,
            penalties: None,
            total_penalty: 0.0,
            landing_error: Some(d2.sqrt()),
            failed: false,
        }
    }
}
