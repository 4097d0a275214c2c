//! Landing accuracy under plant parameter variation: nominal, random joint
//! damping, random mass. The controller always keeps the nominal model.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pronk_core::simulator::{perturb_model, run_episode, EpisodeConfig};
use pronk_core::thrust::JumpCommand;
use pronk_learn::rollout::derive_seed;

use crate::output::{format_f64, CsvRow};
use crate::{failed, mean_std, yaw_error_deg, Evaluator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpType {
    /// 0.4 m straight ahead.
    Fwd,
    /// (0.3, 0.2) m with a 45° turn.
    Diag,
}

impl JumpType {
    pub const ALL: [JumpType; 2] = [JumpType::Fwd, JumpType::Diag];

    pub fn command(self) -> JumpCommand {
        match self {
            JumpType::Fwd => JumpCommand::new(Vector3::new(0.4, 0.0, 0.0), Vector3::zeros()),
            JumpType::Diag => {
                JumpCommand::new(Vector3::new(0.3, 0.2, 0.0), Vector3::new(0.0, 0.0, 45f64.to_radians()))
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JumpType::Fwd => "FWD",
            JumpType::Diag => "DIAG",
        }
    }
}

impl fmt::Display for JumpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JumpType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "FWD" => Ok(JumpType::Fwd),
            "DIAG" => Ok(JumpType::Diag),
            _ => Err(format!("unknown jump type `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    Nom,
    /// Joint damping drawn from `[0, damping_max]`.
    Dv,
    /// Mass scaled by `1 + p U(-1, 1)`.
    Mv,
}

impl Perturbation {
    pub const ALL: [Perturbation; 3] = [Perturbation::Nom, Perturbation::Dv, Perturbation::Mv];

    pub fn as_str(self) -> &'static str {
        match self {
            Perturbation::Nom => "NOM",
            Perturbation::Dv => "DV",
            Perturbation::Mv => "MV",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Perturbation::Nom => 0,
            Perturbation::Dv => 1,
            Perturbation::Mv => 2,
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Perturbation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NOM" => Ok(Perturbation::Nom),
            "DV" => Ok(Perturbation::Dv),
            "MV" => Ok(Perturbation::Mv),
            _ => Err(format!("unknown perturbation `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessSpec {
    pub runs: usize,
    /// Relative mass variation.
    pub mass_fraction: f64,
    /// Upper bound of the random joint damping, N m s/rad.
    pub damping_max: f64,
    pub seed: u64,
}

impl Default for RobustnessSpec {
    fn default() -> Self {
        Self {
            runs: 100,
            mass_fraction: 0.5,
            damping_max: 0.5,
            seed: 0,
        }
    }
}

/// Mean and standard deviation of the signed landing errors over the runs
/// that did not fail; NaN when every run failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessRow {
    pub jump: JumpType,
    pub test: Perturbation,
    pub runs: usize,
    pub failures: usize,
    pub e_x_mean: f64,
    pub e_x_std: f64,
    pub e_y_mean: f64,
    pub e_y_std: f64,
    /// Yaw error statistics, degrees.
    pub e_psi_mean: f64,
    pub e_psi_std: f64,
}

impl CsvRow for RobustnessRow {
    const HEADER: &'static [&'static str] = &[
        "jump", "test", "runs", "failures", "e_x_mean", "e_x_std", "e_y_mean", "e_y_std", "e_psi_mean", "e_psi_std",
    ];
    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.jump.to_string(),
            self.test.to_string(),
            self.runs.to_string(),
            self.failures.to_string(),
        ];
        f.extend(
            [self.e_x_mean, self.e_x_std, self.e_y_mean, self.e_y_std, self.e_psi_mean, self.e_psi_std]
                .map(format_f64),
        );
        f
    }
}

/// `spec.runs` episodes of one jump, each on its own perturbed plant.
pub fn robustness_study(eval: &Evaluator, jump: JumpType, test: Perturbation, spec: &RobustnessSpec) -> RobustnessRow {
    let cmd = jump.command();
    let raw = eval.raw_action(&cmd);
    let nominal = eval.controller_model();
    let cfg = EpisodeConfig {
        controller: Some(nominal.clone()),
        ..eval.episode.clone()
    };
    let outcomes: Vec<_> = (0..spec.runs)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(spec.seed, test.stream(), i as u64);
            let plant = match test {
                Perturbation::Nom => eval.model.clone(),
                Perturbation::Dv => perturb_model(&eval.model, seed, 0.0, spec.damping_max),
                Perturbation::Mv => perturb_model(&eval.model, seed, spec.mass_fraction, 0.0),
            };
            run_episode(&plant, &cmd, &raw, &EpisodeConfig { seed, ..cfg.clone() })
        })
        .collect();
    let ok: Vec<_> = outcomes.iter().filter(|o| !failed(o)).collect();
    let ex: Vec<f64> = ok.iter().map(|o| o.landing_error().x).collect();
    let ey: Vec<f64> = ok.iter().map(|o| o.landing_error().y).collect();
    let epsi: Vec<f64> = ok.iter().map(|o| yaw_error_deg(o)).collect();
    let (e_x_mean, e_x_std) = mean_std(&ex);
    let (e_y_mean, e_y_std) = mean_std(&ey);
    let (e_psi_mean, e_psi_std) = mean_std(&epsi);
    RobustnessRow {
        jump,
        test,
        runs: spec.runs,
        failures: outcomes.len() - ok.len(),
        e_x_mean,
        e_x_std,
        e_y_mean,
        e_y_std,
        e_psi_mean,
        e_psi_std,
    }
}

/// All jump types against all perturbations, jump-major.
pub fn robustness_matrix(eval: &Evaluator, spec: &RobustnessSpec) -> Vec<RobustnessRow> {
    JumpType::ALL
        .iter()
        .flat_map(|&j| Perturbation::ALL.iter().map(move |&t| (j, t)))
        .map(|(j, t)| robustness_study(eval, j, t, spec))
        .collect()
}
