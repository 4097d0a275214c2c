//! Closed-form projectile flight: flight time, landing point, apex and the
//! pre-execution safety filter that rejects lift-off states which cannot reach
//! the target height.

use nalgebra::Vector3;
use thiserror::Error;

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BallisticsError {
    #[error("target height {z_tg} m is not reachable from z = {z_lo} m with vz = {vz} m/s")]
    Unreachable { z_lo: f64, vz: f64, z_tg: f64 },
    #[error("horizontal lift-off velocity must be nonzero")]
    ZeroHorizontalVelocity,
    #[error("lift-off and target share the same horizontal coordinate")]
    ZeroHorizontalGap,
}

/// COM position and velocity at the instant of lift-off (world frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallisticState {
    pub c_lo: Vector3<f64>,
    pub cdot_lo: Vector3<f64>,
}

impl BallisticState {
    pub fn new(c_lo: Vector3<f64>, cdot_lo: Vector3<f64>) -> Self {
        Self { c_lo, cdot_lo }
    }

    pub fn is_finite(&self) -> bool {
        self.c_lo.iter().chain(self.cdot_lo.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandingPrediction {
    /// COM position when it reaches the target height.
    pub c_td: Vector3<f64>,
    pub flight_time: f64,
    pub apex_z: f64,
    /// Time from lift-off to apex (zero when not ascending).
    pub time_to_apex: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    ApexBelowTarget,
    Unreachable,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::ApexBelowTarget => "apex-below-target",
            RejectReason::Unreachable => "unreachable",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterDecision {
    Accept(LandingPrediction),
    Reject(RejectReason),
}

impl FilterDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, FilterDecision::Accept(_))
    }
}

/// Projectile model under uniform gravity `g` along `-z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ballistics {
    pub g: f64,
}

impl Default for Ballistics {
    fn default() -> Self {
        Self {
            g: STANDARD_GRAVITY,
        }
    }
}

impl Ballistics {
    pub fn new(g: f64) -> Self {
        Self { g }
    }

    /// Largest non-negative root of `z_lo + vz T - g T^2 / 2 = z_tg`, i.e. the
    /// arrival at `z_tg` while descending.
    pub fn flight_time(&self, z_lo: f64, vz: f64, z_tg: f64) -> Result<f64, BallisticsError> {
        let unreachable = BallisticsError::Unreachable { z_lo, vz, z_tg };
        let disc = vz * vz - 2.0 * self.g * (z_tg - z_lo);
        if !(disc >= 0.0) {
            return Err(unreachable);
        }
        let s = disc.sqrt();
        // Pick the cancellation-free form of the larger root.
        let t = if vz >= 0.0 {
            (vz + s) / self.g
        } else if s - vz > 0.0 {
            2.0 * (z_lo - z_tg) / (s - vz)
        } else {
            0.0
        };
        if t < 0.0 || !t.is_finite() {
            return Err(unreachable);
        }
        Ok(t)
    }

    pub fn predict_landing(
        &self,
        state: &BallisticState,
        z_tg: f64,
    ) -> Result<LandingPrediction, BallisticsError> {
        let t = self.flight_time(state.c_lo.z, state.cdot_lo.z, z_tg)?;
        let (apex_z, time_to_apex) = self.apex(state);
        let c_td = Vector3::new(
            state.c_lo.x + state.cdot_lo.x * t,
            state.c_lo.y + state.cdot_lo.y * t,
            z_tg,
        );
        Ok(LandingPrediction {
            c_td,
            flight_time: t,
            apex_z,
            time_to_apex,
        })
    }

    /// COM position and velocity `t` seconds after lift-off.
    pub fn propagate(&self, state: &BallisticState, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let g = Vector3::new(0.0, 0.0, -self.g);
        (
            state.c_lo + state.cdot_lo * t + 0.5 * g * t * t,
            state.cdot_lo + g * t,
        )
    }

    /// Vertical lift-off velocity that lands on `c_tg` for a given horizontal
    /// velocity, in the jump-plane side view (`x` is the in-plane horizontal axis).
    pub fn vz_of_vx(
        &self,
        c_lo: &Vector3<f64>,
        c_tg: &Vector3<f64>,
        vx: f64,
    ) -> Result<f64, BallisticsError> {
        if vx == 0.0 {
            return Err(BallisticsError::ZeroHorizontalVelocity);
        }
        let gap = c_tg.x - c_lo.x;
        if gap == 0.0 {
            return Err(BallisticsError::ZeroHorizontalGap);
        }
        Ok((c_tg.z - c_lo.z) / gap * vx + gap / 2.0 * self.g / vx)
    }

    /// Apex elevation and time to apex; a non-ascending lift-off peaks immediately.
    pub fn apex(&self, state: &BallisticState) -> (f64, f64) {
        let vz = state.cdot_lo.z.max(0.0);
        (state.c_lo.z + 0.5 * vz * vz / self.g, vz / self.g)
    }

    /// Rejects lift-off states whose apex lies below the target or that never
    /// reach the target height; otherwise returns the landing prediction.
    pub fn safety_filter(&self, state: &BallisticState, c_tg: &Vector3<f64>) -> FilterDecision {
        let (apex_z, _) = self.apex(state);
        if c_tg.z > apex_z {
            return FilterDecision::Reject(RejectReason::ApexBelowTarget);
        }
        match self.predict_landing(state, c_tg.z) {
            Ok(p) => FilterDecision::Accept(p),
            Err(_) => FilterDecision::Reject(RejectReason::Unreachable),
        }
    }
}
