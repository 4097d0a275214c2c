//! Single-jump episode engine.
//!
//! An episode clips and decodes one action, applies the ballistic safety
//! filter, runs the thrust (exactly in `ideal` mode, PD-tracked in `tracked`
//! mode), the flight with scheduled leg motion, touchdown detection and, in
//! tracked mode, settling until the timeout.

pub mod flight;
pub mod stance;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ballistics::{BallisticState, Ballistics, FilterDecision, RejectReason};
use crate::quadruped::control::{distribute_wrench, forces_to_torques};
use crate::quadruped::kinematics::{
    angular_acceleration, angular_velocity, euler_rates, feet_in_hip_frames, feet_world, leg_ik, whole_body_ik,
    BasePose,
};
use crate::quadruped::{QuadrupedModel, StanceState, NUM_LEGS};
use crate::reward::{PenaltyKind, Penalties};
use crate::thrust::{
    decode, ActionRanges, JumpAction, JumpCommand, LiftoffBoundary, ThrustSample,
    ThrustTrajectory, UarmInterpolation, ACTION_DIM,
};

use flight::{detect_touchdown, lowest_trunk_point, ContactEvent, FlightPlan};
use stance::{
    joint_violations, leg_ik_saturated, project_force, singularity_violation, stance_joints,
    stance_step_with_contacts, thrust_step,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Commanded lift-off achieved exactly; path constraints checked on the reference.
    #[default]
    Ideal,
    /// PD-tracked trunk dynamics with pinned feet.
    Tracked,
}

impl SimMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMode::Ideal => "ideal",
            SimMode::Tracked => "tracked",
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(SimMode::Ideal),
            "tracked" => Ok(SimMode::Tracked),
            other => Err(format!("unknown mode `{other}` (expected ideal or tracked)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub mode: SimMode,
    /// Integration step of the tracked mode.
    pub dt: f64,
    /// Sampling period of path checks and touchdown search in ideal mode.
    pub ideal_dt: f64,
    pub timeout: f64,
    pub friction_mu: f64,
    pub g: f64,
    /// Flat terrain height; by default the landing height of the target.
    pub terrain_z: Option<f64>,
    pub seed: u64,
    pub uarm_literal_lerp: bool,
    /// Leg posture at the flight apex.
    pub q_retract: [f64; 3],
    /// Fraction of the apex-to-touchdown interval used to extend the legs.
    pub extension_fraction: f64,
    /// Leg extension ratio above which the singularity penalty grows.
    pub singularity_ratio: f64,
    /// Model used by the controller; the plant model when absent.
    #[serde(skip)]
    pub controller: Option<QuadrupedModel>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            mode: SimMode::Ideal,
            dt: 0.001,
            ideal_dt: 0.001,
            timeout: 1.5,
            friction_mu: 0.8,
            g: crate::ballistics::STANDARD_GRAVITY,
            terrain_z: None,
            seed: 0,
            uarm_literal_lerp: false,
            q_retract: [0.0, -1.2, 2.4],
            extension_fraction: 0.8,
            singularity_ratio: 0.95,
            controller: None,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.dt > 0.0 && self.ideal_dt > 0.0) {
            return Err("time steps must be positive".into());
        }
        if !(self.timeout > 0.0) {
            return Err("timeout must be positive".into());
        }
        if !(self.friction_mu >= 0.0 && self.g > 0.0) {
            return Err("friction must be non-negative and gravity positive".into());
        }
        if !(self.extension_fraction > 0.0 && self.extension_fraction <= 1.0) {
            return Err("extension_fraction must be in (0, 1]".into());
        }
        if !(self.singularity_ratio > 0.0 && self.singularity_ratio < 1.0) {
            return Err("singularity_ratio must be in (0, 1)".into());
        }
        Ok(())
    }

    pub fn interpolation(&self) -> UarmInterpolation {
        if self.uarm_literal_lerp {
            UarmInterpolation::LiteralLerp
        } else {
            UarmInterpolation::Kinematic
        }
    }
}

/// Trunk state at lift-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftoffState {
    pub c: Vector3<f64>,
    pub cdot: Vector3<f64>,
    pub phi: Vector3<f64>,
    pub phidot: Vector3<f64>,
}

impl LiftoffState {
    pub fn from_boundary(b: &LiftoffBoundary) -> Self {
        Self {
            c: b.c_lo_e,
            cdot: b.cdot_lo_e,
            phi: b.phi_lo,
            phidot: b.phidot_lo,
        }
    }

    /// Norm of the stacked position, velocity, angle and rate errors.
    pub fn error_norm(&self, other: &LiftoffState) -> f64 {
        let dphi = (self.phi - other.phi).map(crate::thrust::wrap_angle);
        ((self.c - other.c).norm_squared()
            + (self.cdot - other.cdot).norm_squared()
            + dphi.norm_squared()
            + (self.phidot - other.phidot).norm_squared())
        .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touchdown {
    /// Time since the start of the episode.
    pub time: f64,
    pub pose: BasePose,
    pub euler_rates: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Failure {
    #[default]
    None,
    NonFootContact,
    FilterRejected(RejectReason),
    /// A foot left the leg workspace during thrust.
    Unreachable,
    /// The state became non-finite.
    Diverged,
}

impl Failure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Failure::None => "none",
            Failure::NonFootContact => "non-foot-contact",
            Failure::FilterRejected(_) => "filter-rejected",
            Failure::Unreachable => "unreachable",
            Failure::Diverged => "diverged",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::FilterRejected(r) => write!(f, "filter-rejected ({r})"),
            other => f.write_str(other.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub mode: SimMode,
    pub start_pose: BasePose,
    pub target_position: Vector3<f64>,
    pub target_euler: Vector3<f64>,
    pub action: JumpAction,
    pub clip_excess: [f64; ACTION_DIM],
    pub boundary: Option<LiftoffBoundary>,
    pub commanded_liftoff: Option<LiftoffState>,
    pub achieved_liftoff: Option<LiftoffState>,
    pub touchdown: Option<Touchdown>,
    /// Pose at the timeout (or at the failure instant).
    pub final_pose: BasePose,
    /// Time-integrated path-constraint violations during thrust.
    pub path_penalties: Penalties,
    pub bounce_count: u32,
    pub failure: Failure,
    pub terrain_z: f64,
}

impl EpisodeOutcome {
    pub fn landing_error(&self) -> Vector3<f64> {
        self.final_pose.position - self.target_position
    }
}

/// One row of an episode trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub phase: Phase,
    pub c: Vector3<f64>,
    pub cdot: Vector3<f64>,
    pub phi: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub q: [Vector3<f64>; NUM_LEGS],
    pub qdot: [Vector3<f64>; NUM_LEGS],
    pub tau: [Vector3<f64>; NUM_LEGS],
    pub force: [Vector3<f64>; NUM_LEGS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Thrust,
    Flight,
    Landing,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Thrust => "thrust",
            Phase::Flight => "flight",
            Phase::Landing => "landing",
        }
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> std::io::Result<()> {
    let mut header = vec!["t", "phase", "cx", "cy", "cz", "vx", "vy", "vz", "roll", "pitch", "yaw", "wx", "wy", "wz"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for prefix in ["q", "qd", "tau"] {
        for leg in crate::quadruped::LEG_NAMES {
            for j in 0..3 {
                header.push(format!("{prefix}_{leg}_{j}"));
            }
        }
    }
    for leg in crate::quadruped::LEG_NAMES {
        for axis in ["x", "y", "z"] {
            header.push(format!("f_{leg}_{axis}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut fields = vec![r.t.to_string(), r.phase.as_str().to_string()];
        for v in [r.c, r.cdot, r.phi, r.omega] {
            fields.extend(v.iter().map(f64::to_string));
        }
        for group in [&r.q, &r.qdot, &r.tau, &r.force] {
            fields.extend(group.iter().flat_map(|v| v.iter().map(f64::to_string)));
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Start pose of every episode: COM above the origin at nominal height, level.
pub fn start_pose(model: &QuadrupedModel) -> BasePose {
    BasePose::new(Vector3::new(0.0, 0.0, model.nominal_height()), Vector3::zeros())
}

/// Nominal stance feet on the ground plane `z = 0` under `pose`.
pub fn start_feet(model: &QuadrupedModel, pose: &BasePose) -> [Vector3<f64>; NUM_LEGS] {
    feet_world(model, pose, &[model.q_default_vec(); NUM_LEGS]).map(|f| Vector3::new(f.x, f.y, 0.0))
}

/// Runs one jump episode.
pub fn run_episode(
    model: &QuadrupedModel,
    command: &JumpCommand,
    raw_action: &[f64; ACTION_DIM],
    cfg: &EpisodeConfig,
) -> EpisodeOutcome {
    run_episode_traced(model, command, raw_action, cfg, None)
}

/// Runs one jump episode, optionally recording a trace.
pub fn run_episode_traced(
    model: &QuadrupedModel,
    command: &JumpCommand,
    raw_action: &[f64; ACTION_DIM],
    cfg: &EpisodeConfig,
    trace: Option<&mut Vec<TraceRow>>,
) -> EpisodeOutcome {
    let start = start_pose(model);
    let c_tg = start.position + command.delta_c;
    let h_nom = model.nominal_height();
    let terrain_z = cfg.terrain_z.unwrap_or(c_tg.z - h_nom);
    let (action, clip_excess) = ActionRanges::default().clip(raw_action);
    let mut out = EpisodeOutcome {
        mode: cfg.mode,
        start_pose: start,
        target_position: c_tg,
        target_euler: start.euler + command.delta_phi,
        action,
        clip_excess,
        boundary: None,
        commanded_liftoff: None,
        achieved_liftoff: None,
        touchdown: None,
        final_pose: start,
        path_penalties: Penalties::default(),
        bounce_count: 0,
        failure: Failure::None,
        terrain_z,
    };
    let Ok(boundary) = decode(&action, &start.position, &start.euler, &c_tg) else {
        out.failure = Failure::FilterRejected(RejectReason::Unreachable);
        return out;
    };
    let commanded = LiftoffState::from_boundary(&boundary);
    let ballistics = Ballistics::new(cfg.g);
    if let FilterDecision::Reject(reason) =
        ballistics.safety_filter(&BallisticState::new(commanded.c, commanded.cdot), &c_tg)
    {
        out.failure = Failure::FilterRejected(reason);
        return out;
    }
    let Ok(trajectory) = ThrustTrajectory::new(
        &start.position,
        &Vector3::zeros(),
        &start.euler,
        &Vector3::zeros(),
        &boundary,
        cfg.interpolation(),
    ) else {
        out.failure = Failure::FilterRejected(RejectReason::Unreachable);
        return out;
    };
    out.boundary = Some(boundary);
    out.commanded_liftoff = Some(commanded);
    let mut sim = Episode {
        model,
        controller: cfg.controller.as_ref().unwrap_or(model),
        cfg,
        feet: start_feet(model, &start),
        terrain_z,
        z_land: terrain_z + h_nom,
        trace,
        out,
    };
    match cfg.mode {
        SimMode::Ideal => sim.run_ideal(&trajectory, &commanded),
        SimMode::Tracked => sim.run_tracked(&trajectory),
    }
    sim.out
}

struct Episode<'a> {
    model: &'a QuadrupedModel,
    controller: &'a QuadrupedModel,
    cfg: &'a EpisodeConfig,
    feet: [Vector3<f64>; NUM_LEGS],
    terrain_z: f64,
    z_land: f64,
    trace: Option<&'a mut Vec<TraceRow>>,
    out: EpisodeOutcome,
}

/// Outcome of the stepped flight search.
enum FlightEnd {
    Touchdown { tau: f64, sample: flight::FlightSample },
    NonFoot(flight::FlightSample),
    Timeout(flight::FlightSample),
}

impl Episode<'_> {
    fn record(&mut self, row: TraceRow) {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(row);
        }
    }

    fn flight_plan(&self, liftoff: &LiftoffState, q_liftoff: [Vector3<f64>; NUM_LEGS]) -> FlightPlan {
        FlightPlan::new(
            *liftoff,
            q_liftoff,
            Vector3::from(self.cfg.q_retract),
            self.model,
            self.z_land,
            self.cfg.extension_fraction,
            self.cfg.g,
        )
    }

    /// Steps the flight until contact or timeout; contact is only checked
    /// while the COM descends.
    fn fly(&mut self, plan: &FlightPlan, t_liftoff: f64, h: f64) -> FlightEnd {
        let mut k = 1u64;
        loop {
            let tau = k as f64 * h;
            if t_liftoff + tau > self.cfg.timeout {
                return FlightEnd::Timeout(plan.sample(self.cfg.timeout - t_liftoff));
            }
            let s = plan.sample(tau);
            self.record(TraceRow {
                t: t_liftoff + tau,
                phase: Phase::Flight,
                c: s.pose.position,
                cdot: s.cdot,
                phi: s.pose.euler,
                omega: angular_velocity(&s.pose.euler, &plan.liftoff.phidot),
                q: s.q,
                qdot: [Vector3::zeros(); NUM_LEGS],
                tau: [Vector3::zeros(); NUM_LEGS],
                force: [Vector3::zeros(); NUM_LEGS],
            });
            if s.cdot.z <= 0.0 {
                match detect_touchdown(self.model, &s.pose, &s.q, self.terrain_z) {
                    Some(ContactEvent::Feet) => return FlightEnd::Touchdown { tau, sample: s },
                    Some(ContactEvent::NonFoot) => return FlightEnd::NonFoot(s),
                    None => {}
                }
            }
            k += 1;
        }
    }

    fn run_ideal(&mut self, trajectory: &ThrustTrajectory, commanded: &LiftoffState) {
        let h = self.cfg.ideal_dt;
        let t_th = trajectory.duration();
        let mut i = 0u64;
        loop {
            let t = i as f64 * h;
            let w = h.min(t_th - t);
            if w <= 0.0 {
                break;
            }
            let s = trajectory.sample(t).expect("t within thrust");
            let v = self.reference_violations(t, &s);
            for (k, val) in v.iter() {
                self.out.path_penalties.add(k, val * w);
            }
            i += 1;
        }
        self.out.achieved_liftoff = Some(*commanded);

        let lo_pose = BasePose::new(commanded.c, commanded.phi);
        let q_lo = whole_body_ik(self.model, &lo_pose, &self.feet)
            .unwrap_or([self.model.q_default_vec(); NUM_LEGS]);
        let plan = self.flight_plan(commanded, q_lo);
        match self.fly(&plan, t_th, h) {
            FlightEnd::Touchdown { tau, sample } => {
                let predicted = plan.ballistics.predict_landing(
                    &BallisticState::new(commanded.c, commanded.cdot),
                    self.z_land,
                );
                let pose = match predicted {
                    Ok(p) => BasePose::new(p.c_td, commanded.phi + commanded.phidot * p.flight_time),
                    Err(_) => sample.pose,
                };
                self.out.touchdown = Some(Touchdown {
                    time: t_th + tau,
                    pose,
                    euler_rates: commanded.phidot,
                });
                self.out.final_pose = pose;
            }
            FlightEnd::NonFoot(s) => {
                self.out.failure = Failure::NonFootContact;
                self.out.final_pose = s.pose;
            }
            FlightEnd::Timeout(s) => self.out.final_pose = s.pose,
        }
    }

    /// Path-constraint violation rates along the reference with the wrench
    /// required by the reference motion distributed over the feet.
    fn reference_violations(&mut self, t: f64, s: &ThrustSample) -> Penalties {
        let model = self.model;
        let cfg = self.cfg;
        let pose = BasePose::new(s.c, s.phi);
        let omega = angular_velocity(&s.phi, &s.phidot);
        let omega_dot = angular_acceleration(&s.phi, &s.phidot, &s.phiddot);
        let r = pose.rotation();
        let i_w: Matrix3<f64> = r.matrix() * model.inertia_matrix() * r.matrix().transpose();
        let force = model.mass * (s.cddot + Vector3::new(0.0, 0.0, cfg.g));
        let moment = i_w * omega_dot + omega.cross(&(i_w * omega));
        let wrench = Vector6::new(force.x, force.y, force.z, moment.x, moment.y, moment.z);
        let forces = distribute_wrench(&s.c, &self.feet, &wrench).ok();
        let joints = stance_joints(model, &pose, &s.cdot, &omega, &self.feet);
        let q_filled = joints.map(|j| j.map_or(model.q_default_vec(), |j| j.0));
        let tau = forces.map(|f| forces_to_torques(model, &pose, &q_filled, &f));

        let mut v = Penalties::default();
        let weight = model.mass * cfg.g;
        if forces.is_none() {
            v.add(PenaltyKind::Singularity, 1.0);
        }
        for leg in 0..NUM_LEGS {
            let Some((q, qdot)) = joints[leg] else {
                v.add(PenaltyKind::Singularity, 1.0);
                continue;
            };
            let t = tau.map_or(Vector3::zeros(), |t| t[leg]);
            joint_violations(model, &q, &qdot, &t, &mut v);
            v.add(PenaltyKind::Singularity, singularity_violation(model, &q, leg, cfg.singularity_ratio));
        }
        if let Some(f) = forces {
            for leg_force in f {
                let (_, unilateral, friction) = project_force(&leg_force, cfg.friction_mu);
                v.add(PenaltyKind::Unilaterality, unilateral / weight);
                v.add(PenaltyKind::Friction, friction / weight);
            }
        }
        self.record(TraceRow {
            t,
            phase: Phase::Thrust,
            c: s.c,
            cdot: s.cdot,
            phi: s.phi,
            omega,
            q: q_filled,
            qdot: joints.map(|j| j.map_or(Vector3::zeros(), |j| j.1)),
            tau: tau.unwrap_or([Vector3::zeros(); NUM_LEGS]),
            force: forces.unwrap_or([Vector3::zeros(); NUM_LEGS]),
        });
        v
    }

    fn run_tracked(&mut self, trajectory: &ThrustTrajectory) {
        let dt = self.cfg.dt;
        let t_th = trajectory.duration();
        let steps = ((t_th / dt).round() as u64).max(1);
        let start = self.out.start_pose;
        let mut state = StanceState {
            pose: start,
            cdot: Vector3::zeros(),
            omega: Vector3::zeros(),
            q: [self.model.q_default_vec(); NUM_LEGS],
            qdot: [Vector3::zeros(); NUM_LEGS],
            foot_world: self.feet,
        };
        let mut t = 0.0;
        for k in 0..steps {
            t = k as f64 * dt;
            let reference = trajectory.sample(t.min(t_th)).expect("t within thrust");
            match thrust_step(&state, &reference, self.model, self.controller, self.cfg) {
                Ok(step) => {
                    for (kind, val) in step.violations.iter() {
                        self.out.path_penalties.add(kind, val * dt);
                    }
                    self.record_stance(t, Phase::Thrust, &state, &step);
                    state = step.next;
                    t = (k + 1) as f64 * dt;
                }
                Err(_) => {
                    self.out.failure = Failure::Unreachable;
                    break;
                }
            }
            if !is_finite_state(&state) {
                self.out.failure = Failure::Diverged;
                self.out.final_pose = state.pose;
                return;
            }
        }
        let achieved = LiftoffState {
            c: state.pose.position,
            cdot: state.cdot,
            phi: state.pose.euler,
            phidot: euler_rates(&state.pose.euler, &state.omega),
        };
        self.out.achieved_liftoff = Some(achieved);
        let plan = self.flight_plan(&achieved, state.q);
        let sample = match self.fly(&plan, t, dt) {
            FlightEnd::Touchdown { tau, sample } => {
                t += tau;
                sample
            }
            FlightEnd::NonFoot(s) => {
                if self.out.failure == Failure::None {
                    self.out.failure = Failure::NonFootContact;
                }
                self.out.final_pose = s.pose;
                return;
            }
            FlightEnd::Timeout(s) => {
                self.out.final_pose = s.pose;
                return;
            }
        };
        self.out.touchdown = Some(Touchdown {
            time: t,
            pose: sample.pose,
            euler_rates: achieved.phidot,
        });
        self.settle(&sample, &achieved, t);
    }

    /// Each foot is pinned where it touches the terrain and released when it
    /// stops carrying load or the trunk moves out of its reach; legs in the
    /// air hold their touchdown joint angles. PD with gravity compensation
    /// drives the trunk to a level standing posture over the feet until the
    /// timeout.
    fn settle(&mut self, sample: &flight::FlightSample, liftoff: &LiftoffState, mut t: f64) {
        let dt = self.cfg.dt;
        let terrain = self.terrain_z;
        let q_swing = sample.q;
        let touch = feet_world(self.model, &sample.pose, &q_swing);
        let mut contact = touch.map(|f| f.z <= terrain);
        let mut state = StanceState {
            pose: sample.pose,
            cdot: sample.cdot,
            omega: angular_velocity(&sample.pose.euler, &liftoff.phidot),
            q: q_swing,
            qdot: [Vector3::zeros(); NUM_LEGS],
            foot_world: touch.map(|f| Vector3::new(f.x, f.y, terrain)),
        };
        let yaw = sample.pose.euler.z;
        let zero = [Vector3::zeros(); NUM_LEGS];
        let mut loaded = false;
        while t + dt <= self.cfg.timeout + 1e-12 {
            if !contact.iter().all(|&c| c) {
                let swing = feet_world(self.model, &state.pose, &q_swing);
                for leg in 0..NUM_LEGS {
                    if !contact[leg] {
                        state.foot_world[leg] = Vector3::new(swing[leg].x, swing[leg].y, terrain);
                        contact[leg] = swing[leg].z <= terrain;
                    }
                }
            }
            let posture = landing_posture(self.controller, &state.foot_world, yaw, terrain);
            let q_d = std::array::from_fn(|leg| if contact[leg] { posture[leg] } else { q_swing[leg] });
            let step = stance_step_with_contacts(&state, &contact, &q_d, &zero, self.model, self.controller, self.cfg);
            self.record_stance(t, Phase::Landing, &state, &step);
            if step.unloaded {
                if loaded && step.next.cdot.z > 0.0 {
                    self.out.bounce_count += 1;
                    loaded = false;
                }
            } else {
                loaded = true;
            }
            state = step.next;
            t += dt;
            if !is_finite_state(&state) {
                self.out.failure = Failure::Diverged;
                break;
            }
            let local = feet_in_hip_frames(self.model, &state.pose, &state.foot_world);
            for leg in 0..NUM_LEGS {
                if contact[leg] && (step.forces[leg].z == 0.0 || leg_ik(self.model, &local[leg], leg).is_err()) {
                    contact[leg] = false;
                }
            }
            if lowest_trunk_point(self.model, &state.pose) <= terrain {
                self.out.failure = Failure::NonFootContact;
                break;
            }
        }
        self.out.final_pose = state.pose;
    }

    fn record_stance(&mut self, t: f64, phase: Phase, state: &StanceState, step: &stance::StanceStep) {
        if self.trace.is_none() {
            return;
        }
        self.record(TraceRow {
            t,
            phase,
            c: state.pose.position,
            cdot: state.cdot,
            phi: state.pose.euler,
            omega: state.omega,
            q: step.next.q,
            qdot: step.next.qdot,
            tau: step.tau,
            force: step.forces,
        });
    }
}

/// Joint targets standing level at nominal height over the landed feet, with
/// the touchdown yaw.
fn landing_posture(
    model: &QuadrupedModel,
    feet: &[Vector3<f64>; NUM_LEGS],
    yaw: f64,
    terrain_z: f64,
) -> [Vector3<f64>; NUM_LEGS] {
    let nominal = start_pose(model);
    let offset = start_feet(model, &nominal).iter().map(|f| f - nominal.position).sum::<Vector3<f64>>() / 4.0;
    let centroid = feet.iter().sum::<Vector3<f64>>() / 4.0;
    let euler = Vector3::new(0.0, 0.0, yaw);
    let mut pose = BasePose::new(Vector3::zeros(), euler);
    let c = centroid - pose.rotation() * offset;
    pose.position = Vector3::new(c.x, c.y, terrain_z + model.nominal_height());
    let local = feet_in_hip_frames(model, &pose, feet);
    std::array::from_fn(|leg| leg_ik_saturated(model, &local[leg], leg).unwrap_or_else(|_| model.q_default_vec()))
}

fn is_finite_state(s: &StanceState) -> bool {
    s.pose.position.iter().chain(s.pose.euler.iter()).chain(s.cdot.iter()).chain(s.omega.iter()).all(|v| v.is_finite())
}

/// Model with mass scaled by `1 + p U(-1, 1)` and plant joint damping
/// `d_max U(0, 1)`, drawn from a seeded stream.
pub fn perturb_model(model: &QuadrupedModel, seed: u64, p: f64, d_max: f64) -> QuadrupedModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random_range(-1.0..=1.0);
    let d: f64 = rng.random_range(0.0..=1.0);
    let mut m = model.clone();
    m.mass = model.mass + model.mass * p * u;
    m.joint_damping = d_max * d;
    m
}
