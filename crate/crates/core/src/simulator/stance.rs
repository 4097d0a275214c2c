//! Stance dynamics: pinned feet, massless legs, PD joint control.

use nalgebra::{Matrix3, Vector3, Vector6};

use crate::quadruped::control::{
    clamp_torque, contact_force, distribute_wrench_among, forces_to_torques, gravity_ff_forces,
    pd_torque_raw, ControlError,
};
use crate::quadruped::kinematics::{
    angular_velocity, euler_rates, extension_ratio, feet_in_hip_frames, leg_ik,
    stance_joint_velocities, BasePose, KinematicsError,
};
use crate::quadruped::{QuadrupedModel, StanceState, NUM_LEGS};
use crate::reward::{activation, PenaltyKind, Penalties};
use crate::thrust::ThrustSample;

use super::EpisodeConfig;

/// Per-step quantities of a stance step, for penalties and traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanceStep {
    pub next: StanceState,
    /// Clamped controller torque per leg.
    pub tau: [Vector3<f64>; NUM_LEGS],
    /// Applied ground-reaction forces on the trunk, world frame.
    pub forces: [Vector3<f64>; NUM_LEGS],
    /// Path-constraint violation rates (multiply by the step length).
    pub violations: Penalties,
    /// True when no leg transmits a vertical force.
    pub unloaded: bool,
}

/// Joint angles and velocities of each leg for the given trunk state, `None`
/// for legs that cannot reach their foot.
pub fn stance_joints(
    model: &QuadrupedModel,
    pose: &BasePose,
    cdot: &Vector3<f64>,
    omega: &Vector3<f64>,
    foot_world: &[Vector3<f64>; NUM_LEGS],
) -> [Option<(Vector3<f64>, Vector3<f64>)>; NUM_LEGS] {
    let local = feet_in_hip_frames(model, pose, foot_world);
    let q: [Option<Vector3<f64>>; NUM_LEGS] =
        std::array::from_fn(|leg| leg_ik(model, &local[leg], leg).ok());
    let filled = q.map(|v| v.unwrap_or_else(|| model.q_default_vec()));
    let qdot = stance_joint_velocities(model, pose, cdot, omega, foot_world, &filled);
    std::array::from_fn(|leg| q[leg].map(|v| (v, qdot[leg])))
}

/// Joint limit, velocity and torque violation rates for one leg.
pub fn joint_violations(
    model: &QuadrupedModel,
    q: &Vector3<f64>,
    qdot: &Vector3<f64>,
    tau_raw: &Vector3<f64>,
    out: &mut Penalties,
) {
    for j in 0..3 {
        let [lo, hi] = model.q_limits[j];
        out.add(PenaltyKind::JointPos, activation(q[j], lo, hi));
        let vmax = model.qdot_max[j];
        out.add(PenaltyKind::JointVel, activation(qdot[j], -vmax, vmax) / vmax);
        let tmax = model.tau_max[j];
        out.add(PenaltyKind::JointTorque, activation(tau_raw[j], -tmax, tmax) / tmax);
    }
}

/// Singularity violation rate for a reachable leg.
pub fn singularity_violation(model: &QuadrupedModel, q: &Vector3<f64>, leg: usize, ratio: f64) -> f64 {
    activation(extension_ratio(model, q, leg), 0.0, ratio) / (1.0 - ratio)
}

/// Unilateral and friction projection of a world force; returns the applied
/// force and the (unilaterality, friction) violations in newtons.
pub fn project_force(f: &Vector3<f64>, mu: f64) -> (Vector3<f64>, f64, f64) {
    if f.z <= 0.0 {
        return (Vector3::zeros(), (-f.z).max(0.0), 0.0);
    }
    let ft = f.xy().norm();
    let limit = mu * f.z;
    if ft > limit {
        let scale = limit / ft;
        (Vector3::new(f.x * scale, f.y * scale, f.z), 0.0, ft - limit)
    } else {
        (*f, 0.0, 0.0)
    }
}

/// One semi-implicit Euler step of the trunk with pinned feet tracking the
/// joint targets `q_d`, `qdot_d` (per leg).
///
/// `plant` supplies mass, inertia and joint damping; `controller` supplies the
/// gains and the mass used for gravity compensation.
pub fn stance_step(
    state: &StanceState,
    q_d: &[Vector3<f64>; NUM_LEGS],
    qdot_d: &[Vector3<f64>; NUM_LEGS],
    plant: &QuadrupedModel,
    controller: &QuadrupedModel,
    cfg: &EpisodeConfig,
) -> StanceStep {
    stance_step_with_contacts(state, &[true; NUM_LEGS], q_d, qdot_d, plant, controller, cfg)
}

/// [`stance_step`] where only the legs flagged in `contact` are pinned at
/// `state.foot_world`. Swing legs are massless and sit at their joint targets.
pub fn stance_step_with_contacts(
    state: &StanceState,
    contact: &[bool; NUM_LEGS],
    q_d: &[Vector3<f64>; NUM_LEGS],
    qdot_d: &[Vector3<f64>; NUM_LEGS],
    plant: &QuadrupedModel,
    controller: &QuadrupedModel,
    cfg: &EpisodeConfig,
) -> StanceStep {
    let pinned = stance_joints(plant, &state.pose, &state.cdot, &state.omega, &state.foot_world);
    let joints: [Option<(Vector3<f64>, Vector3<f64>)>; NUM_LEGS] =
        std::array::from_fn(|leg| if contact[leg] { pinned[leg] } else { None });
    let mut stance = *state;
    stance.q = std::array::from_fn(|leg| match joints[leg] {
        Some(j) => j.0,
        None if contact[leg] => controller.q_default_vec(),
        None => q_d[leg],
    });
    stance.qdot = std::array::from_fn(|leg| match joints[leg] {
        Some(j) => j.1,
        None if contact[leg] => Vector3::zeros(),
        None => qdot_d[leg],
    });
    let tau_ff = if contact.iter().all(|&c| c) {
        gravity_ff_forces(&stance, controller, cfg.g)
            .map(|(_, t)| t)
            .unwrap_or([Vector3::zeros(); NUM_LEGS])
    } else {
        let wrench = Vector6::new(0.0, 0.0, controller.mass * cfg.g, 0.0, 0.0, 0.0);
        let f = distribute_wrench_among(&state.pose.position, &state.foot_world, contact, &wrench);
        forces_to_torques(controller, &state.pose, &stance.q, &f)
    };

    let rot = state.pose.rotation();
    let weight = plant.mass * cfg.g;
    let mut violations = Penalties::default();
    let mut tau_out = [Vector3::zeros(); NUM_LEGS];
    let mut forces = [Vector3::zeros(); NUM_LEGS];
    for leg in 0..NUM_LEGS {
        let Some((q, qdot)) = joints[leg] else {
            if contact[leg] {
                violations.add(PenaltyKind::Singularity, 1.0);
            }
            continue;
        };
        let raw = pd_torque_raw(&q_d[leg], &qdot_d[leg], &q, &qdot, &tau_ff[leg], controller);
        joint_violations(plant, &q, &qdot, &raw, &mut violations);
        violations.add(
            PenaltyKind::Singularity,
            singularity_violation(plant, &q, leg, cfg.singularity_ratio),
        );
        let tau = clamp_torque(&raw, controller);
        tau_out[leg] = tau;
        let applied = tau - plant.joint_damping * qdot;
        match contact_force(plant, &q, &applied, leg) {
            Ok(f_body) => {
                let (f, unilateral, friction) = project_force(&(rot * f_body), cfg.friction_mu);
                violations.add(PenaltyKind::Unilaterality, unilateral / weight);
                violations.add(PenaltyKind::Friction, friction / weight);
                forces[leg] = f;
            }
            Err(ControlError::SingularLeg { .. }) | Err(ControlError::SingularStance { .. }) => {
                violations.add(PenaltyKind::Singularity, 1.0);
            }
        }
    }

    let mut next = integrate_trunk(state, &forces, plant, cfg);
    next.q = stance.q;
    next.qdot = stance.qdot;
    StanceStep {
        next,
        tau: tau_out,
        forces,
        violations,
        unloaded: forces.iter().all(|f| f.z == 0.0),
    }
}

/// Semi-implicit Euler update of the trunk under foot forces and gravity.
pub fn integrate_trunk(
    state: &StanceState,
    forces: &[Vector3<f64>; NUM_LEGS],
    plant: &QuadrupedModel,
    cfg: &EpisodeConfig,
) -> StanceState {
    let dt = cfg.dt;
    let c = state.pose.position;
    let mut total_f = Vector3::new(0.0, 0.0, -plant.mass * cfg.g);
    let mut moment = Vector3::zeros();
    for leg in 0..NUM_LEGS {
        total_f += forces[leg];
        moment += (state.foot_world[leg] - c).cross(&forces[leg]);
    }
    let r = state.pose.rotation();
    let i_w: Matrix3<f64> = r.matrix() * plant.inertia_matrix() * r.matrix().transpose();
    let h = i_w * state.omega;
    let omega_dot = i_w
        .try_inverse()
        .expect("box inertia is positive definite")
        * (moment - state.omega.cross(&h));
    let cdot = state.cdot + total_f / plant.mass * dt;
    let omega = state.omega + omega_dot * dt;
    let euler = state.pose.euler + euler_rates(&state.pose.euler, &omega) * dt;
    StanceState {
        pose: BasePose::new(c + cdot * dt, euler),
        cdot,
        omega,
        q: state.q,
        qdot: state.qdot,
        foot_world: state.foot_world,
    }
}

/// Leg IK that saturates at the workspace boundary: an unreachable hip-frame
/// foot target is pulled toward the hip (by at most half its distance) until
/// it becomes reachable.
pub fn leg_ik_saturated(
    model: &QuadrupedModel,
    foot: &Vector3<f64>,
    leg: usize,
) -> Result<Vector3<f64>, KinematicsError> {
    let err = match leg_ik(model, foot, leg) {
        Ok(q) => return Ok(q),
        Err(e) => e,
    };
    let (mut lo, mut hi) = (0.5, 1.0);
    let mut best = leg_ik(model, &(foot * lo), leg).map_err(|_| err)?;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        match leg_ik(model, &(foot * mid), leg) {
            Ok(q) => {
                best = q;
                lo = mid;
            }
            Err(_) => hi = mid,
        }
    }
    Ok(best)
}

/// Joint references for a thrust reference sample with pinned feet. Targets
/// past the workspace boundary saturate at it.
pub fn thrust_joint_reference(
    model: &QuadrupedModel,
    reference: &ThrustSample,
    foot_world: &[Vector3<f64>; NUM_LEGS],
) -> Result<([Vector3<f64>; NUM_LEGS], [Vector3<f64>; NUM_LEGS]), KinematicsError> {
    let pose = BasePose::new(reference.c, reference.phi);
    let local = feet_in_hip_frames(model, &pose, foot_world);
    let mut q = [Vector3::zeros(); NUM_LEGS];
    for leg in 0..NUM_LEGS {
        q[leg] = leg_ik_saturated(model, &local[leg], leg)?;
    }
    let omega = angular_velocity(&reference.phi, &reference.phidot);
    let qdot = stance_joint_velocities(model, &pose, &reference.cdot, &omega, foot_world, &q);
    Ok((q, qdot))
}

/// One tracked thrust step: joint references from the sampled Cartesian
/// reference, then a stance step. Legs the trunk has moved out of reach
/// transmit no force.
pub fn thrust_step(
    state: &StanceState,
    reference: &ThrustSample,
    plant: &QuadrupedModel,
    controller: &QuadrupedModel,
    cfg: &EpisodeConfig,
) -> Result<StanceStep, KinematicsError> {
    let (q_d, qdot_d) = thrust_joint_reference(controller, reference, &state.foot_world)?;
    Ok(stance_step(state, &q_d, &qdot_d, plant, controller, cfg))
}
