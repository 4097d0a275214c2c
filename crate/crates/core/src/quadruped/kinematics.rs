use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use super::model::{QuadrupedModel, LEG_NAMES, NUM_LEGS};

/// Full-reach tolerance: points this close outside the workspace are snapped onto it.
const REACH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("foot target of leg {leg} is out of workspace by {distance:.6} m")]
    OutOfWorkspace { leg: &'static str, distance: f64 },
}

/// Trunk position and ZYX Euler angles (roll, pitch, yaw).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePose {
    pub position: Vector3<f64>,
    pub euler: Vector3<f64>,
}

impl BasePose {
    pub fn new(position: Vector3<f64>, euler: Vector3<f64>) -> Self {
        Self { position, euler }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        euler_rotation(&self.euler)
    }
}

/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_rotation(euler: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::from_euler_angles(euler.x, euler.y, euler.z)
}

/// Maps ZYX Euler rates to the world-frame angular velocity.
pub fn euler_rate_matrix(euler: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = euler.y.sin_cos();
    let (sy, cy) = euler.z.sin_cos();
    Matrix3::new(cy * cp, -sy, 0.0, sy * cp, cy, 0.0, -sp, 0.0, 1.0)
}

/// Time derivative of [`euler_rate_matrix`].
pub fn euler_rate_matrix_dot(euler: &Vector3<f64>, rates: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = euler.y.sin_cos();
    let (sy, cy) = euler.z.sin_cos();
    let (dp, dy) = (rates.y, rates.z);
    Matrix3::new(
        -sy * dy * cp - cy * sp * dp,
        -cy * dy,
        0.0,
        cy * dy * cp - sy * sp * dp,
        -sy * dy,
        0.0,
        -cp * dp,
        0.0,
        0.0,
    )
}

pub fn angular_velocity(euler: &Vector3<f64>, rates: &Vector3<f64>) -> Vector3<f64> {
    euler_rate_matrix(euler) * rates
}

/// World angular acceleration from Euler angles, rates and accelerations.
pub fn angular_acceleration(
    euler: &Vector3<f64>,
    rates: &Vector3<f64>,
    accels: &Vector3<f64>,
) -> Vector3<f64> {
    euler_rate_matrix(euler) * accels + euler_rate_matrix_dot(euler, rates) * rates
}

/// Euler rates from a world angular velocity (singular at pitch = ±π/2).
pub fn euler_rates(euler: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    euler_rate_matrix(euler)
        .try_inverse()
        .map(|inv| inv * omega)
        .unwrap_or_else(Vector3::zeros)
}

fn rot_x(q: f64) -> Matrix3<f64> {
    let (s, c) = q.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn planar(model: &QuadrupedModel, q: &Vector3<f64>, leg: usize) -> Vector3<f64> {
    let [l_h, l1, l2] = model.link_lengths;
    let (s2, c2) = q.y.sin_cos();
    let (s23, c23) = (q.y + q.z).sin_cos();
    Vector3::new(
        l1 * s2 + l2 * s23,
        model.side_sign(leg) * l_h,
        -l1 * c2 - l2 * c23,
    )
}

/// Foot position in the hip frame (base-aligned axes, origin at the hip).
pub fn leg_fk(model: &QuadrupedModel, q: &Vector3<f64>, leg: usize) -> Vector3<f64> {
    rot_x(q.x) * planar(model, q, leg)
}

/// Closed-form inverse kinematics with the knee bent backward (knee > 0).
pub fn leg_ik(
    model: &QuadrupedModel,
    foot: &Vector3<f64>,
    leg: usize,
) -> Result<Vector3<f64>, KinematicsError> {
    let [l_h, l1, l2] = model.link_lengths;
    let s = model.side_sign(leg);
    let out = |distance: f64| KinematicsError::OutOfWorkspace {
        leg: LEG_NAMES[leg],
        distance,
    };
    let r_yz2 = foot.y * foot.y + foot.z * foot.z;
    let d2 = r_yz2 - l_h * l_h;
    if d2 < -REACH_TOL {
        return Err(out(l_h - r_yz2.sqrt()));
    }
    let z_p = -d2.max(0.0).sqrt();
    let q1 = wrap(foot.z.atan2(foot.y) - z_p.atan2(s * l_h));
    let len2 = foot.x * foot.x + z_p * z_p;
    let len = len2.sqrt();
    if len > l1 + l2 + REACH_TOL {
        return Err(out(len - (l1 + l2)));
    }
    if len < (l1 - l2).abs() - REACH_TOL {
        return Err(out((l1 - l2).abs() - len));
    }
    let cos_knee = ((len2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let q3 = cos_knee.acos();
    let q2 = foot.x.atan2(-z_p) - (l2 * q3.sin()).atan2(l1 + l2 * q3.cos());
    Ok(Vector3::new(q1, q2, q3))
}

fn wrap(a: f64) -> f64 {
    crate::thrust::wrap_angle(a)
}

/// Foot Jacobian `∂foot/∂q` in the hip frame.
pub fn leg_jacobian(model: &QuadrupedModel, q: &Vector3<f64>, leg: usize) -> Matrix3<f64> {
    let [_, l1, l2] = model.link_lengths;
    let v = planar(model, q, leg);
    let (s1, c1) = q.x.sin_cos();
    let (s2, c2) = q.y.sin_cos();
    let (s23, c23) = (q.y + q.z).sin_cos();
    let r = rot_x(q.x);
    let d_rot = Matrix3::new(0.0, 0.0, 0.0, 0.0, -s1, -c1, 0.0, c1, -s1);
    let col1 = d_rot * v;
    let col2 = r * Vector3::new(l1 * c2 + l2 * c23, 0.0, l1 * s2 + l2 * s23);
    let col3 = r * Vector3::new(l2 * c23, 0.0, l2 * s23);
    Matrix3::from_columns(&[col1, col2, col3])
}

/// Foot positions in the hip frames of each leg for a world stance.
pub fn feet_in_hip_frames(
    model: &QuadrupedModel,
    pose: &BasePose,
    foot_world: &[Vector3<f64>; NUM_LEGS],
) -> [Vector3<f64>; NUM_LEGS] {
    let rt = pose.rotation().inverse();
    std::array::from_fn(|leg| rt * (foot_world[leg] - pose.position) - model.hip_offset(leg))
}

/// Joint angles of all legs that place the feet at `foot_world`.
pub fn whole_body_ik(
    model: &QuadrupedModel,
    pose: &BasePose,
    foot_world: &[Vector3<f64>; NUM_LEGS],
) -> Result<[Vector3<f64>; NUM_LEGS], KinematicsError> {
    let local = feet_in_hip_frames(model, pose, foot_world);
    let mut q = [Vector3::zeros(); NUM_LEGS];
    for leg in 0..NUM_LEGS {
        q[leg] = leg_ik(model, &local[leg], leg)?;
    }
    Ok(q)
}

/// Joint velocities keeping world-fixed feet fixed while the trunk moves with
/// linear velocity `cdot` and world angular velocity `omega`.
pub fn stance_joint_velocities(
    model: &QuadrupedModel,
    pose: &BasePose,
    cdot: &Vector3<f64>,
    omega: &Vector3<f64>,
    foot_world: &[Vector3<f64>; NUM_LEGS],
    q: &[Vector3<f64>; NUM_LEGS],
) -> [Vector3<f64>; NUM_LEGS] {
    let rt = pose.rotation().inverse();
    std::array::from_fn(|leg| {
        let rel = foot_world[leg] - pose.position;
        // d/dt R^T (p - c) for fixed p
        let rel_dot = rt * (-cdot - omega.cross(&rel));
        leg_jacobian(model, &q[leg], leg)
            .try_inverse()
            .map(|inv| inv * rel_dot)
            .unwrap_or_else(Vector3::zeros)
    })
}

/// World foot positions for the given pose and joint angles.
pub fn feet_world(
    model: &QuadrupedModel,
    pose: &BasePose,
    q: &[Vector3<f64>; NUM_LEGS],
) -> [Vector3<f64>; NUM_LEGS] {
    let r = pose.rotation();
    std::array::from_fn(|leg| {
        pose.position + r * (model.hip_offset(leg) + leg_fk(model, &q[leg], leg))
    })
}

/// Ratio of hip-to-foot distance to the maximum leg reach.
pub fn extension_ratio(model: &QuadrupedModel, q: &Vector3<f64>, leg: usize) -> f64 {
    let [l_h, l1, l2] = model.link_lengths;
    let p = leg_fk(model, q, leg);
    let planar2 = (p.norm_squared() - l_h * l_h).max(0.0);
    planar2.sqrt() / (l1 + l2)
}
