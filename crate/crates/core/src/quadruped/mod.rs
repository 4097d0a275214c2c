//! Reduced quadruped: rigid trunk, massless 3-DoF legs, joint PD with gravity compensation.

pub mod control;
pub mod kinematics;
pub mod model;

pub use control::{
    contact_force, gravity_ff, gravity_ff_forces, pd_control, ControlError, StanceState,
};
pub use kinematics::{leg_fk, leg_ik, leg_jacobian, whole_body_ik, BasePose, KinematicsError};
pub use model::{ModelError, QuadrupedModel, LEG_NAMES, NUM_LEGS};
