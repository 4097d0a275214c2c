//! Core models for learning omnidirectional jumps on a quadruped.

pub mod ballistics;
pub mod bezier;
pub mod thrust;
pub mod quadruped;
pub mod reward;
pub mod simulator;
