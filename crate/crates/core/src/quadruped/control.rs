use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use thiserror::Error;

use super::kinematics::{leg_jacobian, BasePose};
use super::model::{QuadrupedModel, NUM_LEGS};

/// Pseudo-inverse singular-value tolerance, relative to the largest one.
pub const PINV_TOL: f64 = 1e-10;
/// Leg Jacobian condition number above which forces are not recovered.
pub const SINGULARITY_CONDITION: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("stance is singular: contact Jacobian rank {rank} < 6")]
    SingularStance { rank: usize },
    #[error("leg Jacobian is near-singular (condition number {condition:.3e})")]
    SingularLeg { condition: f64 },
}

/// Trunk state, joint state and world foot positions during stance.
///
/// `omega` is the world-frame angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceState {
    pub pose: BasePose,
    pub cdot: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub q: [Vector3<f64>; NUM_LEGS],
    pub qdot: [Vector3<f64>; NUM_LEGS],
    pub foot_world: [Vector3<f64>; NUM_LEGS],
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `J_cb^T`: maps stacked world foot forces to the wrench about the COM.
pub fn contact_wrench_map(
    com: &Vector3<f64>,
    foot_world: &[Vector3<f64>; NUM_LEGS],
) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(6, 3 * NUM_LEGS);
    for (leg, foot) in foot_world.iter().enumerate() {
        a.fixed_view_mut::<3, 3>(0, 3 * leg)
            .copy_from(&Matrix3::identity());
        a.fixed_view_mut::<3, 3>(3, 3 * leg)
            .copy_from(&skew(&(foot - com)));
    }
    a
}

/// Minimum-norm foot forces producing `wrench` about the COM.
pub fn distribute_wrench(
    com: &Vector3<f64>,
    foot_world: &[Vector3<f64>; NUM_LEGS],
    wrench: &Vector6<f64>,
) -> Result<[Vector3<f64>; NUM_LEGS], ControlError> {
    let a = contact_wrench_map(com, foot_world);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > PINV_TOL * smax.max(1.0))
        .count();
    if rank < 6 {
        return Err(ControlError::SingularStance { rank });
    }
    let w = DVector::from_column_slice(wrench.as_slice());
    let f = svd
        .solve(&w, PINV_TOL * smax.max(1.0))
        .expect("svd computed with u and v");
    Ok(std::array::from_fn(|leg| {
        Vector3::new(f[3 * leg], f[3 * leg + 1], f[3 * leg + 2])
    }))
}

/// Least-squares minimum-norm foot forces producing `wrench` with only the
/// legs flagged in `contact`; swing legs get zero force. Unlike
/// [`distribute_wrench`] a rank-deficient stance is accepted.
pub fn distribute_wrench_among(
    com: &Vector3<f64>,
    foot_world: &[Vector3<f64>; NUM_LEGS],
    contact: &[bool; NUM_LEGS],
    wrench: &Vector6<f64>,
) -> [Vector3<f64>; NUM_LEGS] {
    if !contact.iter().any(|&c| c) {
        return [Vector3::zeros(); NUM_LEGS];
    }
    let mut a = contact_wrench_map(com, foot_world);
    for leg in (0..NUM_LEGS).filter(|&l| !contact[l]) {
        a.columns_mut(3 * leg, 3).fill(0.0);
    }
    let svd = a.svd(true, true);
    let eps = PINV_TOL * svd.singular_values.max().max(1.0);
    let w = DVector::from_column_slice(wrench.as_slice());
    let f = svd.solve(&w, eps).expect("svd computed with u and v");
    std::array::from_fn(|leg| {
        if contact[leg] {
            Vector3::new(f[3 * leg], f[3 * leg + 1], f[3 * leg + 2])
        } else {
            Vector3::zeros()
        }
    })
}

/// Joint torques realising world ground-reaction forces on the trunk.
pub fn forces_to_torques(
    model: &QuadrupedModel,
    pose: &BasePose,
    q: &[Vector3<f64>; NUM_LEGS],
    forces: &[Vector3<f64>; NUM_LEGS],
) -> [Vector3<f64>; NUM_LEGS] {
    let rt = pose.rotation().inverse();
    std::array::from_fn(|leg| -(leg_jacobian(model, &q[leg], leg).transpose() * (rt * forces[leg])))
}

/// Gravity-compensation forces (on the trunk, world frame) and joint torques.
pub fn gravity_ff_forces(
    stance: &StanceState,
    model: &QuadrupedModel,
    g: f64,
) -> Result<([Vector3<f64>; NUM_LEGS], [Vector3<f64>; NUM_LEGS]), ControlError> {
    let wrench = Vector6::new(0.0, 0.0, model.mass * g, 0.0, 0.0, 0.0);
    let forces = distribute_wrench(&stance.pose.position, &stance.foot_world, &wrench)?;
    let tau = forces_to_torques(model, &stance.pose, &stance.q, &forces);
    Ok((forces, tau))
}

/// Feed-forward joint torques that hold the trunk weight.
pub fn gravity_ff(
    stance: &StanceState,
    model: &QuadrupedModel,
    g: f64,
) -> Result<[Vector3<f64>; NUM_LEGS], ControlError> {
    gravity_ff_forces(stance, model, g).map(|(_, tau)| tau)
}

/// Unclamped joint PD law plus feed-forward.
pub fn pd_torque_raw(
    q_d: &Vector3<f64>,
    qdot_d: &Vector3<f64>,
    q: &Vector3<f64>,
    qdot: &Vector3<f64>,
    tau_ff: &Vector3<f64>,
    model: &QuadrupedModel,
) -> Vector3<f64> {
    model.kp * (q_d - q) + model.kd * (qdot_d - qdot) + tau_ff
}

/// Clamps a leg torque to the actuator limits.
pub fn clamp_torque(tau: &Vector3<f64>, model: &QuadrupedModel) -> Vector3<f64> {
    Vector3::from_fn(|j, _| tau[j].clamp(-model.tau_max[j], model.tau_max[j]))
}

/// Joint PD law with feed-forward, clamped to the actuator limits.
pub fn pd_control(
    q_d: &Vector3<f64>,
    qdot_d: &Vector3<f64>,
    q: &Vector3<f64>,
    qdot: &Vector3<f64>,
    tau_ff: &Vector3<f64>,
    model: &QuadrupedModel,
) -> Vector3<f64> {
    clamp_torque(&pd_torque_raw(q_d, qdot_d, q, qdot, tau_ff, model), model)
}

/// Ground-reaction force on the trunk, in the base frame, produced by a
/// massless leg applying `tau`.
pub fn contact_force(
    model: &QuadrupedModel,
    q: &Vector3<f64>,
    tau: &Vector3<f64>,
    leg: usize,
) -> Result<Vector3<f64>, ControlError> {
    let j = leg_jacobian(model, q, leg);
    let condition = condition_number(&j);
    if !(condition <= SINGULARITY_CONDITION) {
        return Err(ControlError::SingularLeg { condition });
    }
    let jt_inv = j
        .transpose()
        .try_inverse()
        .ok_or(ControlError::SingularLeg { condition })?;
    Ok(-(jt_inv * tau))
}

pub fn condition_number(j: &Matrix3<f64>) -> f64 {
    let s = j.singular_values();
    let smin = s.min();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s.max() / smin
    }
}
