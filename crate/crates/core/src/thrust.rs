//! Thrust-phase trajectory synthesis.
//!
//! A 13-parameter action is decoded into lift-off boundary conditions
//! (spherical lift-off position/velocity in the jump plane plus an explosive
//! constant-acceleration extension), and those are turned into a piecewise
//! reference: cubic position Bézier, straight-line uniformly accelerated
//! segment, and a cubic orientation Bézier spanning the whole thrust.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};
use std::io::Write;

use nalgebra::Vector3;
use thiserror::Error;

use crate::bezier::{BezierError, ControlPolygon};

pub const ACTION_DIM: usize = 13;
pub const STATE_DIM: usize = 6;

/// Minimum admissible COM height along a thrust reference.
pub const DEFAULT_FLOOR_CLEARANCE: f64 = 0.15;

/// Field names of the action vector, in order.
pub const ACTION_NAMES: [&str; ACTION_DIM] = [
    "t_th_b", "r_p", "theta_p", "r_v", "theta_v", "k", "d", "roll_lo", "pitch_lo", "yaw_lo",
    "roll_rate_lo", "pitch_rate_lo", "yaw_rate_lo",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThrustError {
    #[error("Bézier lift-off velocity is zero, so the explosive segment has no direction")]
    DegenerateDirection,
    #[error("thrust duration must be positive, got {0}")]
    Duration(f64),
    #[error(transparent)]
    Bezier(#[from] BezierError),
    #[error("time t = {t} outside the thrust interval [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
}

/// Legal range of every action component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionRanges {
    pub lo: [f64; ACTION_DIM],
    pub hi: [f64; ACTION_DIM],
}

impl Default for ActionRanges {
    fn default() -> Self {
        Self {
            lo: [
                0.4, 0.2, FRAC_PI_4, 0.5, -FRAC_PI_6, 1.0, 0.0, -FRAC_PI_6, -FRAC_PI_6, -FRAC_PI_4,
                -1.0, -1.0, -4.0,
            ],
            hi: [
                1.0, 0.4, FRAC_PI_2, 5.0, FRAC_PI_2, 3.0, 0.3, FRAC_PI_6, FRAC_PI_6, FRAC_PI_4, 1.0,
                1.0, 4.0,
            ],
        }
    }
}

impl ActionRanges {
    /// Affine map from `[-1, 1]` per component onto the physical range (no clipping).
    pub fn denormalize(&self, normalized: &[f64]) -> [f64; ACTION_DIM] {
        let mut out = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            out[i] = self.lo[i] + 0.5 * (normalized[i] + 1.0) * (self.hi[i] - self.lo[i]);
        }
        out
    }

    pub fn normalize(&self, physical: &[f64]) -> [f64; ACTION_DIM] {
        let mut out = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            out[i] = 2.0 * (physical[i] - self.lo[i]) / (self.hi[i] - self.lo[i]) - 1.0;
        }
        out
    }

    /// Clamps each component into range and reports the clipped distance.
    pub fn clip(&self, raw: &[f64; ACTION_DIM]) -> (JumpAction, [f64; ACTION_DIM]) {
        let mut clipped = [0.0; ACTION_DIM];
        let mut excess = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            // NaN maps to the lower bound with infinite excess
            let v = if raw[i].is_nan() { f64::NEG_INFINITY } else { raw[i] };
            clipped[i] = v.clamp(self.lo[i], self.hi[i]);
            excess[i] = (v - clipped[i]).abs();
        }
        (JumpAction::from_array(&clipped), excess)
    }
}

/// Displacement command: target minus start, in position and ZYX Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpCommand {
    pub delta_c: Vector3<f64>,
    pub delta_phi: Vector3<f64>,
}

impl JumpCommand {
    pub fn new(delta_c: Vector3<f64>, delta_phi: Vector3<f64>) -> Self {
        Self { delta_c, delta_phi }
    }

    pub fn from_state(s: &[f64; STATE_DIM]) -> Self {
        Self {
            delta_c: Vector3::new(s[0], s[1], s[2]),
            delta_phi: Vector3::new(s[3], s[4], s[5]),
        }
    }

    pub fn to_state(&self) -> [f64; STATE_DIM] {
        [
            self.delta_c.x,
            self.delta_c.y,
            self.delta_c.z,
            self.delta_phi.x,
            self.delta_phi.y,
            self.delta_phi.z,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_state().iter().all(|v| v.is_finite())
    }
}

/// The 13 thrust parameters chosen by the policy.
///
/// `phi_lo` is (roll, pitch, yaw) relative to the initial orientation;
/// `phidot_lo` are the lift-off Euler rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpAction {
    pub t_th_b: f64,
    pub r_p: f64,
    pub theta_p: f64,
    pub r_v: f64,
    pub theta_v: f64,
    pub k: f64,
    pub d: f64,
    pub phi_lo: Vector3<f64>,
    pub phidot_lo: Vector3<f64>,
}

impl JumpAction {
    pub fn from_array(a: &[f64; ACTION_DIM]) -> Self {
        Self {
            t_th_b: a[0],
            r_p: a[1],
            theta_p: a[2],
            r_v: a[3],
            theta_v: a[4],
            k: a[5],
            d: a[6],
            phi_lo: Vector3::new(a[7], a[8], a[9]),
            phidot_lo: Vector3::new(a[10], a[11], a[12]),
        }
    }

    pub fn to_array(&self) -> [f64; ACTION_DIM] {
        [
            self.t_th_b,
            self.r_p,
            self.theta_p,
            self.r_v,
            self.theta_v,
            self.k,
            self.d,
            self.phi_lo.x,
            self.phi_lo.y,
            self.phi_lo.z,
            self.phidot_lo.x,
            self.phidot_lo.y,
            self.phidot_lo.z,
        ]
    }
}

/// Clamps a raw action to the default ranges. See [`ActionRanges::clip`].
pub fn clip_action(raw: &[f64; ACTION_DIM]) -> (JumpAction, [f64; ACTION_DIM]) {
    ActionRanges::default().clip(raw)
}

/// Boundary conditions of the thrust phase derived from an action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftoffBoundary {
    pub c_lo_b: Vector3<f64>,
    pub cdot_lo_b: Vector3<f64>,
    pub c_lo_e: Vector3<f64>,
    pub cdot_lo_e: Vector3<f64>,
    pub phi_lo: Vector3<f64>,
    pub phidot_lo: Vector3<f64>,
    pub t_th_b: f64,
    pub t_th_e: f64,
    pub t_th: f64,
    pub a_uarm: f64,
    /// Velocity multiplier actually applied (1 when the explosive segment is absent).
    pub k_effective: f64,
    /// Yaw of the jump plane.
    pub plane_yaw: f64,
}

/// Yaw of the vertical plane through start and target; zero for in-place jumps.
pub fn jump_plane_yaw(c0: &Vector3<f64>, c_tg: &Vector3<f64>) -> f64 {
    let (dx, dy) = (c_tg.x - c0.x, c_tg.y - c0.y);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Decodes an in-range action into lift-off boundary conditions.
///
/// The spherical coordinates are centred on the ground projection of `c0`
/// (ground at `z = 0`). `phi_lo` is added to `phi0`. With `d = 0` there is no
/// explosive segment and `k` has no effect; with `d > 0, k = 1` the segment is
/// travelled at constant speed.
pub fn decode(
    action: &JumpAction,
    c0: &Vector3<f64>,
    phi0: &Vector3<f64>,
    c_tg: &Vector3<f64>,
) -> Result<LiftoffBoundary, ThrustError> {
    if !(action.t_th_b > 0.0) {
        return Err(ThrustError::Duration(action.t_th_b));
    }
    let yaw = jump_plane_yaw(c0, c_tg);
    let (sy, cy) = yaw.sin_cos();
    let origin = Vector3::new(c0.x, c0.y, 0.0);
    let (sp, cp) = action.theta_p.sin_cos();
    let c_lo_b = origin + action.r_p * Vector3::new(cp * cy, cp * sy, sp);
    let (sv, cv) = action.theta_v.sin_cos();
    let cdot_lo_b = action.r_v * Vector3::new(cv * cy, cv * sy, sv);
    let v_b = cdot_lo_b.norm();

    let (c_lo_e, cdot_lo_e, t_th_e, a_uarm, k_effective) = if action.d > 0.0 {
        if v_b == 0.0 {
            return Err(ThrustError::DegenerateDirection);
        }
        let unit = cdot_lo_b / v_b;
        let cdot_lo_e = action.k * cdot_lo_b;
        let v_e = cdot_lo_e.norm();
        let (t_e, a) = if action.k > 1.0 {
            let a = (v_e * v_e - v_b * v_b) / (2.0 * action.d);
            ((v_e - v_b) / a, a)
        } else {
            (action.d / v_b, 0.0)
        };
        (c_lo_b + action.d * unit, cdot_lo_e, t_e, a, action.k)
    } else {
        (c_lo_b, cdot_lo_b, 0.0, 0.0, 1.0)
    };

    Ok(LiftoffBoundary {
        c_lo_b,
        cdot_lo_b,
        c_lo_e,
        cdot_lo_e,
        phi_lo: phi0 + action.phi_lo,
        phidot_lo: action.phidot_lo,
        t_th_b: action.t_th_b,
        t_th_e,
        t_th: action.t_th_b + t_th_e,
        a_uarm,
        k_effective,
        plane_yaw: yaw,
    })
}

fn cubic_hermite_polygon(
    p0: &Vector3<f64>,
    v0: &Vector3<f64>,
    p3: &Vector3<f64>,
    v3: &Vector3<f64>,
    duration: f64,
) -> Result<ControlPolygon, ThrustError> {
    if !(duration > 0.0) {
        return Err(ThrustError::Duration(duration));
    }
    let p1 = p0 + duration / 3.0 * v0;
    let p2 = p3 - duration / 3.0 * v3;
    Ok(ControlPolygon::from_points3(
        &[(*p0).into(), p1.into(), p2.into(), (*p3).into()],
        duration,
    )?)
}

/// Position Bézier from `(c0, ċ0)` to the Bézier lift-off state over `T_th_b`.
pub fn solve_position_bezier(
    c0: &Vector3<f64>,
    cdot0: &Vector3<f64>,
    boundary: &LiftoffBoundary,
) -> Result<ControlPolygon, ThrustError> {
    cubic_hermite_polygon(c0, cdot0, &boundary.c_lo_b, &boundary.cdot_lo_b, boundary.t_th_b)
}

/// Orientation Bézier over the whole thrust duration `T_th`.
pub fn solve_orientation_bezier(
    phi0: &Vector3<f64>,
    phidot0: &Vector3<f64>,
    phi_lo: &Vector3<f64>,
    phidot_lo: &Vector3<f64>,
    t_th: f64,
) -> Result<ControlPolygon, ThrustError> {
    cubic_hermite_polygon(phi0, phidot0, phi_lo, phidot_lo, t_th)
}

/// How the explosive straight-line segment is interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UarmInterpolation {
    /// Exact constant-acceleration kinematics (position quadratic in time).
    #[default]
    Kinematic,
    /// Position and velocity both linearly interpolated over the segment.
    LiteralLerp,
}

/// Reference sample: COM position/velocity/acceleration and Euler angles/rates/accelerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustSample {
    pub c: Vector3<f64>,
    pub cdot: Vector3<f64>,
    pub cddot: Vector3<f64>,
    pub phi: Vector3<f64>,
    pub phidot: Vector3<f64>,
    pub phiddot: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UarmSegment {
    pub c_start: Vector3<f64>,
    pub cdot_start: Vector3<f64>,
    pub c_end: Vector3<f64>,
    pub cdot_end: Vector3<f64>,
    pub accel: f64,
    pub direction: Vector3<f64>,
    pub duration: f64,
}

/// Piecewise thrust reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrustTrajectory {
    pub pos_bezier: ControlPolygon,
    pos_vel: ControlPolygon,
    pos_acc: ControlPolygon,
    pub uarm: UarmSegment,
    pub ori_bezier: ControlPolygon,
    ori_vel: ControlPolygon,
    ori_acc: ControlPolygon,
    pub interpolation: UarmInterpolation,
}

fn v3(p: [f64; 3]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

impl ThrustTrajectory {
    /// Builds the reference from the initial state and decoded boundary.
    pub fn new(
        c0: &Vector3<f64>,
        cdot0: &Vector3<f64>,
        phi0: &Vector3<f64>,
        phidot0: &Vector3<f64>,
        boundary: &LiftoffBoundary,
        interpolation: UarmInterpolation,
    ) -> Result<Self, ThrustError> {
        let pos_bezier = solve_position_bezier(c0, cdot0, boundary)?;
        let ori_bezier = solve_orientation_bezier(
            phi0,
            phidot0,
            &boundary.phi_lo,
            &boundary.phidot_lo,
            boundary.t_th,
        )?;
        let v_b = boundary.cdot_lo_b.norm();
        let direction = if v_b > 0.0 {
            boundary.cdot_lo_b / v_b
        } else {
            Vector3::zeros()
        };
        let pos_vel = pos_bezier.derivative();
        let ori_vel = ori_bezier.derivative();
        Ok(Self {
            pos_acc: pos_vel.derivative(),
            pos_vel,
            pos_bezier,
            uarm: UarmSegment {
                c_start: boundary.c_lo_b,
                cdot_start: boundary.cdot_lo_b,
                c_end: boundary.c_lo_e,
                cdot_end: boundary.cdot_lo_e,
                accel: boundary.a_uarm,
                direction,
                duration: boundary.t_th_e,
            },
            ori_acc: ori_vel.derivative(),
            ori_vel,
            ori_bezier,
            interpolation,
        })
    }

    pub fn bezier_duration(&self) -> f64 {
        self.pos_bezier.duration()
    }

    pub fn duration(&self) -> f64 {
        self.ori_bezier.duration()
    }

    /// Reference at time `t ∈ [0, T_th]`.
    pub fn sample(&self, t: f64) -> Result<ThrustSample, ThrustError> {
        let total = self.duration();
        if t.is_nan() || t < -1e-12 || t > total + 1e-12 {
            return Err(ThrustError::TimeOutOfRange { t, duration: total });
        }
        let t = t.clamp(0.0, total);
        let tb = self.bezier_duration();
        let mut buf = [0.0; 3];
        let (c, cdot, cddot) = if t <= tb {
            self.pos_bezier.eval_into(t, &mut buf)?;
            let c = v3(buf);
            self.pos_vel.eval_into(t, &mut buf)?;
            let cdot = v3(buf);
            self.pos_acc.eval_into(t, &mut buf)?;
            (c, cdot, v3(buf))
        } else {
            self.sample_uarm(t - tb)
        };
        self.ori_bezier.eval_into(t, &mut buf)?;
        let phi = v3(buf);
        self.ori_vel.eval_into(t, &mut buf)?;
        let phidot = v3(buf);
        self.ori_acc.eval_into(t, &mut buf)?;
        Ok(ThrustSample {
            c,
            cdot,
            cddot,
            phi,
            phidot,
            phiddot: v3(buf),
        })
    }

    fn sample_uarm(&self, tau: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let u = &self.uarm;
        if u.duration <= 0.0 {
            return (u.c_end, u.cdot_end, Vector3::zeros());
        }
        let tau = tau.min(u.duration);
        match self.interpolation {
            UarmInterpolation::Kinematic => {
                let v0 = u.cdot_start.norm();
                let s = v0 * tau + 0.5 * u.accel * tau * tau;
                (
                    u.c_start + s * u.direction,
                    (v0 + u.accel * tau) * u.direction,
                    u.accel * u.direction,
                )
            }
            UarmInterpolation::LiteralLerp => {
                let f = tau / u.duration;
                (
                    u.c_start + f * (u.c_end - u.c_start),
                    u.cdot_start + f * (u.cdot_end - u.cdot_start),
                    (u.cdot_end - u.cdot_start) / u.duration,
                )
            }
        }
    }

    /// Lowest sampled COM height with the given sampling period (endpoint included).
    pub fn min_height(&self, period: f64) -> f64 {
        self.sample_times(period)
            .map(|t| self.sample(t).map(|s| s.c.z).unwrap_or(f64::NAN))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the COM stays at or above `floor` everywhere sampled.
    pub fn respects_clearance(&self, floor: f64, period: f64) -> bool {
        self.min_height(period) >= floor
    }

    /// `0, period, 2 period, …` up to and including `T_th`.
    pub fn sample_times(&self, period: f64) -> impl Iterator<Item = f64> {
        let total = self.duration();
        let n = (total / period).floor() as usize;
        (0..=n)
            .map(move |i| i as f64 * period)
            .chain((n as f64 * period < total).then_some(total))
    }

    /// Writes the sampled reference as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W, period: f64) -> std::io::Result<()> {
        writeln!(w, "t,cx,cy,cz,vx,vy,vz,roll,pitch,yaw,wr,wp,wy")?;
        for t in self.sample_times(period) {
            let s = self.sample(t).map_err(std::io::Error::other)?;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                t,
                s.c.x,
                s.c.y,
                s.c.z,
                s.cdot.x,
                s.cdot.y,
                s.cdot.z,
                s.phi.x,
                s.phi.y,
                s.phi.z,
                s.phidot.x,
                s.phidot.y,
                s.phidot.z
            )?;
        }
        Ok(())
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Policy observation: position and orientation displacement, yaw wrapped.
pub fn encode_state(
    c0: &Vector3<f64>,
    phi0: &Vector3<f64>,
    c_tg: &Vector3<f64>,
    phi_tg: &Vector3<f64>,
) -> [f64; STATE_DIM] {
    let dc = c_tg - c0;
    let dphi = phi_tg - phi0;
    [dc.x, dc.y, dc.z, dphi.x, dphi.y, wrap_angle(dphi.z)]
}
