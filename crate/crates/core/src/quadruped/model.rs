use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_LEGS: usize = 4;
pub const LEG_NAMES: [&str; NUM_LEGS] = ["FL", "FR", "RL", "RR"];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid robot model: {0}")]
    Invalid(String),
    #[error("cannot read robot config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse robot config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Rigid trunk with four massless 3-DoF legs (abduction, hip, knee).
///
/// Legs are ordered FL, FR, RL, RR. Hip offsets are expressed in the base
/// frame centred at the COM. Link lengths are (hip lateral offset, thigh,
/// shank). `joint_damping` is a plant-side viscous coefficient and is zero for
/// the nominal robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupedModel {
    pub mass: f64,
    pub inertia_box_dims: [f64; 3],
    pub hip_offsets: [[f64; 3]; NUM_LEGS],
    pub link_lengths: [f64; 3],
    pub q_default: [f64; 3],
    pub q_limits: [[f64; 2]; 3],
    pub qdot_max: [f64; 3],
    pub tau_max: [f64; 3],
    pub kp: f64,
    pub kd: f64,
    #[serde(default)]
    pub joint_damping: f64,
}

impl Default for QuadrupedModel {
    /// Go1-like defaults. Mass, gains, nominal posture and actuator limits are
    /// the published robot values; geometry, trunk box and joint limits are
    /// placeholders.
    fn default() -> Self {
        Self {
            mass: 13.0,
            inertia_box_dims: [0.3762, 0.0935, 0.114],
            hip_offsets: [
                [0.1881, 0.04675, 0.0],
                [0.1881, -0.04675, 0.0],
                [-0.1881, 0.04675, 0.0],
                [-0.1881, -0.04675, 0.0],
            ],
            link_lengths: [0.08, 0.213, 0.213],
            q_default: [0.0, -0.75, 1.5],
            q_limits: [[-0.863, 0.863], [-4.501, 0.686], [0.888, 2.818]],
            qdot_max: [20.0, 20.0, 30.0],
            tau_max: [23.7, 23.7, 35.5],
            kp: 50.0,
            kd: 0.8,
            joint_damping: 0.0,
        }
    }
}

impl QuadrupedModel {
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let model: Self = toml::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Invalid(m.to_string()));
        let all_finite = std::iter::once(self.mass)
            .chain(self.inertia_box_dims)
            .chain(self.hip_offsets.iter().flatten().copied())
            .chain(self.link_lengths)
            .chain(self.q_default)
            .chain(self.q_limits.iter().flatten().copied())
            .chain(self.qdot_max)
            .chain(self.tau_max)
            .chain([self.kp, self.kd, self.joint_damping])
            .all(f64::is_finite);
        if !all_finite {
            return bad("non-finite value");
        }
        if self.mass <= 0.0 {
            return bad("mass must be positive");
        }
        if self.link_lengths.iter().any(|&l| l <= 0.0) {
            return bad("link lengths must be positive");
        }
        if self.inertia_box_dims.iter().any(|&l| l <= 0.0) {
            return bad("trunk box dimensions must be positive");
        }
        if self.q_limits.iter().any(|[lo, hi]| lo > hi) {
            return bad("joint limits must be ordered");
        }
        if self.qdot_max.iter().chain(&self.tau_max).any(|&v| v <= 0.0) {
            return bad("velocity and torque limits must be positive");
        }
        if self.kp < 0.0 || self.kd < 0.0 || self.joint_damping < 0.0 {
            return bad("gains and damping must be non-negative");
        }
        Ok(())
    }

    pub fn gravity_weight(&self, g: f64) -> f64 {
        self.mass * g
    }

    /// Diagonal inertia of a homogeneous box with the trunk dimensions.
    pub fn inertia(&self) -> Vector3<f64> {
        let [a, b, c] = self.inertia_box_dims;
        let k = self.mass / 12.0;
        Vector3::new(k * (b * b + c * c), k * (a * a + c * c), k * (a * a + b * b))
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia())
    }

    pub fn hip_offset(&self, leg: usize) -> Vector3<f64> {
        Vector3::from(self.hip_offsets[leg])
    }

    /// +1 for left legs, -1 for right legs.
    pub fn side_sign(&self, leg: usize) -> f64 {
        if leg % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn q_default_vec(&self) -> Vector3<f64> {
        Vector3::from(self.q_default)
    }

    /// COM height above flat ground with all legs at `q_default`.
    pub fn nominal_height(&self) -> f64 {
        let foot = super::kinematics::leg_fk(self, &self.q_default_vec(), 0);
        -(self.hip_offset(0).z + foot.z)
    }

    /// Nominal foot positions in the base frame.
    pub fn nominal_feet_base(&self) -> [Vector3<f64>; NUM_LEGS] {
        std::array::from_fn(|leg| {
            self.hip_offset(leg) + super::kinematics::leg_fk(self, &self.q_default_vec(), leg)
        })
    }

    /// Amount by which a joint value lies outside its limits.
    pub fn joint_limit_excess(&self, joint: usize, q: f64) -> f64 {
        let [lo, hi] = self.q_limits[joint];
        (lo - q).max(0.0) + (q - hi).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_values() {
        let m = QuadrupedModel::default();
        assert_eq!(m.mass, 13.0);
        assert_eq!((m.kp, m.kd), (50.0, 0.8));
        assert_eq!(m.q_default, [0.0, -0.75, 1.5]);
        assert_eq!(m.tau_max, [23.7, 23.7, 35.5]);
        assert_eq!(m.qdot_max, [20.0, 20.0, 30.0]);
        m.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let m = QuadrupedModel::default();
        let text = m.to_toml_string();
        assert_eq!(QuadrupedModel::from_toml_str(&text).unwrap(), m);
        let parsed = QuadrupedModel::from_toml_str(&text.replace("mass = 13.0", "mass = 12.345678901234567")).unwrap();
        assert_eq!(parsed.mass, 12.345678901234567);
    }

    #[test]
    fn validation_rejects_bad_models() {
        let mut m = QuadrupedModel::default();
        m.mass = 0.0;
        assert!(m.validate().is_err());
        let mut m = QuadrupedModel::default();
        m.link_lengths[1] = -0.1;
        assert!(m.validate().is_err());
        let mut m = QuadrupedModel::default();
        m.q_limits[2] = [1.0, 0.5];
        assert!(m.validate().is_err());
        assert!(QuadrupedModel::from_toml_str("mass = 1.0").is_err());
    }

    #[test]
    fn box_inertia() {
        let mut m = QuadrupedModel::default();
        m.mass = 12.0;
        m.inertia_box_dims = [1.0, 2.0, 3.0];
        assert_eq!(m.inertia(), Vector3::new(13.0, 10.0, 5.0));
    }

    #[test]
    fn nominal_height_from_geometry() {
        let m = QuadrupedModel::default();
        let expected = 2.0 * 0.213 * 0.75f64.cos();
        assert!((m.nominal_height() - expected).abs() < 1e-15);
    }
}
