//! Constraint activation, landing reward and penalty-scaled total reward.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{EpisodeOutcome, Failure};
use crate::thrust::wrap_angle;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid reward parameters: {0}")]
    Invalid(String),
    #[error("cannot read reward config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse reward config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Penalty terms, in a fixed order used by logs and weight tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PenaltyKind {
    JointPos,
    JointVel,
    JointTorque,
    Friction,
    Unilaterality,
    Singularity,
    Liftoff,
    TargetOrientation,
    TouchdownDrift,
    TouchdownAngVel,
    ActionLimit,
}

impl PenaltyKind {
    pub const ALL: [PenaltyKind; 11] = [
        PenaltyKind::JointPos,
        PenaltyKind::JointVel,
        PenaltyKind::JointTorque,
        PenaltyKind::Friction,
        PenaltyKind::Unilaterality,
        PenaltyKind::Singularity,
        PenaltyKind::Liftoff,
        PenaltyKind::TargetOrientation,
        PenaltyKind::TouchdownDrift,
        PenaltyKind::TouchdownAngVel,
        PenaltyKind::ActionLimit,
    ];

    /// The path constraints accumulated during thrust.
    pub const PATH: [PenaltyKind; 6] = [
        PenaltyKind::JointPos,
        PenaltyKind::JointVel,
        PenaltyKind::JointTorque,
        PenaltyKind::Friction,
        PenaltyKind::Unilaterality,
        PenaltyKind::Singularity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::JointPos => "joint_pos",
            PenaltyKind::JointVel => "joint_vel",
            PenaltyKind::JointTorque => "joint_torque",
            PenaltyKind::Friction => "friction",
            PenaltyKind::Unilaterality => "unilaterality",
            PenaltyKind::Singularity => "singularity",
            PenaltyKind::Liftoff => "liftoff",
            PenaltyKind::TargetOrientation => "target_orientation",
            PenaltyKind::TouchdownDrift => "touchdown_drift",
            PenaltyKind::TouchdownAngVel => "touchdown_ang_vel",
            PenaltyKind::ActionLimit => "action_limit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Named penalty values, one slot per [`PenaltyKind`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penalties([f64; 11]);

impl Penalties {
    pub fn get(&self, kind: PenaltyKind) -> f64 {
        self.0[kind.index()]
    }

    pub fn set(&mut self, kind: PenaltyKind, value: f64) {
        self.0[kind.index()] = value;
    }

    pub fn add(&mut self, kind: PenaltyKind, value: f64) {
        self.0[kind.index()] += value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (PenaltyKind, f64)> + '_ {
        PenaltyKind::ALL.into_iter().map(|k| (k, self.get(k)))
    }

    pub fn values(&self) -> &[f64; 11] {
        &self.0
    }

    /// `Σ w_i C_i`.
    pub fn weighted_sum(&self, weights: &PenaltyWeights) -> f64 {
        self.iter().map(|(k, v)| weights.get(k) * v).sum()
    }
}

/// Non-negative weight per penalty; all 1 by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights(Penalties);

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self(Penalties([1.0; 11]))
    }
}

impl PenaltyWeights {
    pub fn get(&self, kind: PenaltyKind) -> f64 {
        self.0.get(kind)
    }

    pub fn set(&mut self, kind: PenaltyKind, w: f64) {
        self.0.set(kind, w);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardFile {
    sigma_e: f64,
    sigma_d: f64,
    c_dx_default: f64,
    #[serde(default)]
    weights: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardParams {
    pub sigma_e: f64,
    pub sigma_d: f64,
    pub c_dx_default: f64,
    pub weights: PenaltyWeights,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            sigma_e: 0.1,
            sigma_d: 1.0,
            c_dx_default: 10.0,
            weights: PenaltyWeights::default(),
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |m: &str| Err(RewardError::Invalid(m.to_string()));
        if !(self.sigma_e > 0.0 && self.sigma_d > 0.0) || !self.sigma_e.is_finite() || !self.sigma_d.is_finite() {
            return bad("sigma_e and sigma_d must be positive and finite");
        }
        if !(self.c_dx_default >= 0.0) {
            return bad("c_dx_default must be non-negative");
        }
        if PenaltyKind::ALL.iter().any(|&k| !(self.weights.get(k) >= 0.0) || !self.weights.get(k).is_finite()) {
            return bad("weights must be non-negative and finite");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RewardError> {
        let file: RewardFile = toml::from_str(text)?;
        let mut weights = PenaltyWeights::default();
        for (name, w) in &file.weights {
            let kind = PenaltyKind::from_name(name)
                .ok_or_else(|| RewardError::Invalid(format!("unknown penalty `{name}`")))?;
            weights.set(kind, *w);
        }
        let params = Self {
            sigma_e: file.sigma_e,
            sigma_d: file.sigma_d,
            c_dx_default: file.c_dx_default,
            weights,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RewardError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RewardError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = RewardFile {
            sigma_e: self.sigma_e,
            sigma_d: self.sigma_d,
            c_dx_default: self.c_dx_default,
            weights: PenaltyKind::ALL
                .iter()
                .map(|&k| (k.name().to_string(), self.weights.get(k)))
                .collect(),
        };
        toml::to_string(&file).expect("reward params serialize")
    }
}

/// Linear activation: distance of `x` outside `[lo, hi]`.
pub fn activation(x: f64, lo: f64, hi: f64) -> f64 {
    ((x - lo).min(0.0) + (x - hi).max(0.0)).abs()
}

/// `exp(-e_tg / σ_e) exp(Δc / σ_d)`.
pub fn landing_reward(
    c_final: &Vector3<f64>,
    c0: &Vector3<f64>,
    c_tg: &Vector3<f64>,
    params: &RewardParams,
) -> f64 {
    landing_reward_from(
        (c_tg - c_final).norm(),
        (c_tg - c0).norm(),
        params,
    )
}

pub fn landing_reward_from(e_tg: f64, delta_c: f64, params: &RewardParams) -> f64 {
    (-e_tg / params.sigma_e).exp() * (delta_c / params.sigma_d).exp()
}

/// `R_lt exp(-(Σ w_i C_i)^2)`.
pub fn total_reward(r_lt: f64, penalties: &Penalties, weights: &PenaltyWeights) -> f64 {
    let s = penalties.weighted_sum(weights);
    r_lt * (-(s * s)).exp()
}

/// Completes the penalty map of an episode with the behavioural costs.
pub fn assemble_penalties(outcome: &EpisodeOutcome, params: &RewardParams) -> Penalties {
    let mut p = outcome.path_penalties;
    p.set(PenaltyKind::ActionLimit, outcome.clip_excess.iter().sum());
    if let Failure::FilterRejected(_) = outcome.failure {
        return p;
    }
    if let (Some(cmd), Some(act)) = (&outcome.commanded_liftoff, &outcome.achieved_liftoff) {
        p.set(PenaltyKind::Liftoff, cmd.error_norm(act));
    }
    let orient_err = (outcome.final_pose.euler - outcome.target_euler).map(wrap_angle);
    p.set(PenaltyKind::TargetOrientation, orient_err.norm());
    match (&outcome.touchdown, outcome.failure) {
        (Some(td), Failure::None) => {
            let drift = outcome.final_pose.position.xy() - td.pose.position.xy();
            p.set(PenaltyKind::TouchdownDrift, drift.norm());
            p.set(PenaltyKind::TouchdownAngVel, td.euler_rates.norm());
        }
        (td, _) => {
            p.set(PenaltyKind::TouchdownDrift, params.c_dx_default);
            if let Some(td) = td {
                p.set(PenaltyKind::TouchdownAngVel, td.euler_rates.norm());
            }
        }
    }
    p
}

/// Reward of an episode: zero for failed episodes, otherwise the landing
/// reward scaled by the penalty factor.
pub fn episode_reward(outcome: &EpisodeOutcome, params: &RewardParams) -> (f64, Penalties) {
    let penalties = assemble_penalties(outcome, params);
    if outcome.failure != Failure::None {
        return (0.0, penalties);
    }
    let r_lt = landing_reward(
        &outcome.final_pose.position,
        &outcome.start_pose.position,
        &outcome.target_position,
        params,
    );
    (total_reward(r_lt, &penalties, &params.weights), penalties)
}
