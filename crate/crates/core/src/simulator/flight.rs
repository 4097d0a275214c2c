//! Flight phase: ballistic COM, constant Euler rates, scheduled leg motion.

use nalgebra::Vector3;

use crate::ballistics::{BallisticState, Ballistics};
use crate::quadruped::kinematics::{euler_rotation, feet_world, BasePose};
use crate::quadruped::{QuadrupedModel, NUM_LEGS};

use super::LiftoffState;

/// Cubic Hermite blend with zero end velocities, `s` clamped to `[0, 1]`.
pub fn hermite_blend(a: &Vector3<f64>, b: &Vector3<f64>, s: f64) -> Vector3<f64> {
    let s = s.clamp(0.0, 1.0);
    let h = s * s * (3.0 - 2.0 * s);
    a + (b - a) * h
}

/// Retract-then-extend joint schedule of the flight phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegSchedule {
    pub q_liftoff: [Vector3<f64>; NUM_LEGS],
    pub q_retract: Vector3<f64>,
    pub q_default: Vector3<f64>,
    /// Heuristic time of the apex after lift-off.
    pub t_apex: f64,
    /// Time after lift-off at which the legs are back at `q_default`.
    pub t_extended: f64,
}

impl LegSchedule {
    pub fn joints(&self, tau: f64) -> [Vector3<f64>; NUM_LEGS] {
        std::array::from_fn(|leg| {
            let start = if self.t_apex > 0.0 {
                if tau < self.t_apex {
                    return hermite_blend(&self.q_liftoff[leg], &self.q_retract, tau / self.t_apex);
                }
                self.q_retract
            } else {
                self.q_liftoff[leg]
            };
            let span = self.t_extended - self.t_apex;
            if span <= 0.0 {
                self.q_default
            } else {
                hermite_blend(&start, &self.q_default, (tau - self.t_apex) / span)
            }
        })
    }
}

/// Closed-form flight from a lift-off state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightPlan {
    pub liftoff: LiftoffState,
    pub schedule: LegSchedule,
    pub ballistics: Ballistics,
}

/// Flight state `tau` seconds after lift-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightSample {
    pub tau: f64,
    pub pose: BasePose,
    pub cdot: Vector3<f64>,
    pub q: [Vector3<f64>; NUM_LEGS],
}

impl FlightPlan {
    /// Builds the plan; the schedule's heuristic touchdown is the arrival at
    /// `z_land` (or the apex when that height is never reached).
    pub fn new(
        liftoff: LiftoffState,
        q_liftoff: [Vector3<f64>; NUM_LEGS],
        q_retract: Vector3<f64>,
        model: &QuadrupedModel,
        z_land: f64,
        extension_fraction: f64,
        g: f64,
    ) -> Self {
        let ballistics = Ballistics::new(g);
        let t_apex = liftoff.cdot.z.max(0.0) / g;
        let t_land = ballistics
            .flight_time(liftoff.c.z, liftoff.cdot.z, z_land)
            .unwrap_or(t_apex)
            .max(t_apex);
        Self {
            liftoff,
            schedule: LegSchedule {
                q_liftoff,
                q_retract,
                q_default: model.q_default_vec(),
                t_apex,
                t_extended: t_apex + extension_fraction * (t_land - t_apex),
            },
            ballistics,
        }
    }

    pub fn sample(&self, tau: f64) -> FlightSample {
        let (c, cdot) = self.ballistics.propagate(
            &BallisticState::new(self.liftoff.c, self.liftoff.cdot),
            tau,
        );
        FlightSample {
            tau,
            pose: BasePose::new(c, self.liftoff.phi + self.liftoff.phidot * tau),
            cdot,
            q: self.schedule.joints(tau),
        }
    }
}

/// Advances a flight sample by `h`.
pub fn flight_step(plan: &FlightPlan, current: &FlightSample, h: f64) -> FlightSample {
    plan.sample(current.tau + h)
}

/// Ground contact event during flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContactEvent {
    Feet,
    NonFoot,
}

/// Corners of the trunk bounding box, world frame, box centred at the COM.
pub fn trunk_corners(model: &QuadrupedModel, pose: &BasePose) -> [Vector3<f64>; 8] {
    let r = euler_rotation(&pose.euler);
    let half = Vector3::from(model.inertia_box_dims) * 0.5;
    std::array::from_fn(|i| {
        let s = Vector3::new(
            if i & 1 == 0 { -1.0 } else { 1.0 },
            if i & 2 == 0 { -1.0 } else { 1.0 },
            if i & 4 == 0 { -1.0 } else { 1.0 },
        );
        pose.position + r * half.component_mul(&s)
    })
}

pub fn lowest_trunk_point(model: &QuadrupedModel, pose: &BasePose) -> f64 {
    trunk_corners(model, pose)
        .iter()
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min)
}

/// Foot contact when the lowest foot reaches the terrain; otherwise a trunk
/// corner at or below the terrain is a non-foot contact.
pub fn detect_touchdown(
    model: &QuadrupedModel,
    pose: &BasePose,
    q: &[Vector3<f64>; NUM_LEGS],
    terrain_z: f64,
) -> Option<ContactEvent> {
    let lowest_foot = feet_world(model, pose, q)
        .iter()
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min);
    if lowest_foot <= terrain_z {
        Some(ContactEvent::Feet)
    } else if lowest_trunk_point(model, pose) <= terrain_z {
        Some(ContactEvent::NonFoot)
    } else {
        None
    }
}
