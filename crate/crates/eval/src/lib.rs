//! Evaluation of trained jump policies: target sweeps, height and yaw maps,
//! and perturbation studies, written as CSV tables with metadata sidecars.

pub mod output;
pub mod robustness;
pub mod sweeps;

use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pronk_core::quadruped::QuadrupedModel;
use pronk_core::simulator::{run_episode, EpisodeConfig, EpisodeOutcome, Failure};
use pronk_core::thrust::{wrap_angle, ActionRanges, JumpCommand, ACTION_DIM};
use pronk_learn::ActorCritic;

pub use output::{sha256_hex, write_csv, write_table, CsvRow, RunMetadata};
pub use robustness::{robustness_matrix, robustness_study, JumpType, Perturbation, RobustnessRow, RobustnessSpec};
pub use sweeps::{
    actual_vs_target, feasible_region, height_map, pass_rate, region_rows, yaw_rows, yaw_sweep, AvtRow, Direction,
    MaxUpRow, MinDownRow, RegionRow, YawRow,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Runs the deterministic policy mean on the simulator.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub policy: &'a ActorCritic,
    pub model: QuadrupedModel,
    pub episode: EpisodeConfig,
    pub ranges: ActionRanges,
}

impl<'a> Evaluator<'a> {
    pub fn new(policy: &'a ActorCritic, model: QuadrupedModel, episode: EpisodeConfig) -> Self {
        Self {
            policy,
            model,
            episode,
            ranges: ActionRanges::default(),
        }
    }

    /// Physical (unclipped) action chosen for `cmd`.
    pub fn raw_action(&self, cmd: &JumpCommand) -> [f64; ACTION_DIM] {
        self.ranges.denormalize(&self.policy.act(&cmd.to_state()))
    }

    pub fn run(&self, cmd: &JumpCommand) -> EpisodeOutcome {
        run_episode(&self.model, cmd, &self.raw_action(cmd), &self.episode)
    }

    /// Model the controller plans with; the plant model unless overridden.
    pub fn controller_model(&self) -> QuadrupedModel {
        self.episode.controller.clone().unwrap_or_else(|| self.model.clone())
    }

    /// Episodes run in parallel; outcomes are returned in command order.
    pub fn run_all(&self, cmds: &[JumpCommand]) -> Vec<EpisodeOutcome> {
        cmds.par_iter().map(|c| self.run(c)).collect()
    }
}

/// Position-only jump command.
pub fn position_command(x: f64, y: f64, z: f64) -> JumpCommand {
    JumpCommand::new(Vector3::new(x, y, z), Vector3::zeros())
}

/// Landing position error norm.
pub fn position_error(o: &EpisodeOutcome) -> f64 {
    o.landing_error().norm()
}

/// Signed landing yaw error, degrees.
pub fn yaw_error_deg(o: &EpisodeOutcome) -> f64 {
    wrap_angle(o.final_pose.euler.z - o.target_euler.z).to_degrees()
}

pub fn failed(o: &EpisodeOutcome) -> bool {
    o.failure != Failure::None
}

/// Targets and sample counts shared by the sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub yaw_deg: [f64; 2],
    pub roll_pitch_max_deg: f64,
    /// Landing error below which a jump counts as a pass, m.
    pub threshold: f64,
    pub seed: u64,
    /// Uniformly drawn flat targets of the feasible-region sweep.
    pub region_samples: usize,
    /// Distances per direction of the actual-vs-target sweep.
    pub avt_samples: usize,
    /// Grid points along x and y of the height maps.
    pub height_grid: [usize; 2],
    pub height_step: f64,
    pub yaw_step_deg: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            x: [-0.6, 1.2],
            y: [-0.6, 0.6],
            z: [-0.4, 0.4],
            yaw_deg: [-90.0, 90.0],
            roll_pitch_max_deg: 15.0,
            threshold: 0.2,
            seed: 0,
            region_samples: 1024,
            avt_samples: 25,
            height_grid: [7, 5],
            height_step: 0.05,
            yaw_step_deg: 15.0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        for (name, r) in [("x", self.x), ("y", self.y), ("z", self.z), ("yaw_deg", self.yaw_deg)] {
            if !(r[0] <= r[1] && r[0].is_finite() && r[1].is_finite()) {
                return Err(EvalError::Config(format!("sweep range {name} must be ordered and finite")));
            }
        }
        if !(self.threshold >= 0.0) {
            return Err(EvalError::Config("threshold must be non-negative".into()));
        }
        if !(self.height_step > 0.0 && self.yaw_step_deg > 0.0) {
            return Err(EvalError::Config("sweep steps must be positive".into()));
        }
        if self.height_grid.contains(&0) {
            return Err(EvalError::Config("height grid needs at least one point per axis".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EvalError> {
        let s: Self = toml::from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("sweep spec serializes")
    }
}

/// `n` evenly spaced points on `[lo, hi]`; the midpoint when `n == 1`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(linspace(-1.0, 1.0, 1), vec![0.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn mean_std_of_known_sample() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[3.0; 10]).1, 0.0);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let s = SweepSpec {
            seed: 9,
            threshold: 0.1,
            ..SweepSpec::default()
        };
        assert_eq!(SweepSpec::from_toml_str(&s.to_toml_string()).unwrap(), s);
        assert!(SweepSpec::from_toml_str("threshold = -1.0").is_err());
        assert!(SweepSpec::from_toml_str("bogus = 1").is_err());
    }
}
