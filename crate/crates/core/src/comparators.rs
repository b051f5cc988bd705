//! Controllers the optimal policy is compared against: an intelligent-driver
//! car-following law standing in for human drivers, and a simple speed
//! harmonization law that ramps the commanded speed down towards the
//! speed-reduction zone.

use serde::{Deserialize, Serialize};

use crate::domain::{ControlParams, VehicleState};

/// Intelligent-driver car-following parameters.
///
/// Drivers keep `time_headway` on the open road and the longer
/// `srz_time_headway` inside the speed-reduction zone, as observed in work
/// zones. With the defaults the zone carries about 1800 veh/h at 15.6 m/s
/// while the open road carries well over 2000 veh/h
/// (see [`CarFollowingParams::capacity_at`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarFollowingParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub min_spacing: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub accel_exponent: f64,
    pub srz_time_headway: f64,
}

impl Default for CarFollowingParams {
    fn default() -> Self {
        Self {
            desired_speed: 25.0,
            time_headway: 1.4,
            min_spacing: 2.0,
            max_accel: 0.73,
            comfortable_decel: 1.67,
            accel_exponent: 4.0,
            srz_time_headway: 1.87,
        }
    }
}

impl CarFollowingParams {
    /// Equilibrium spacing at speed `v`.
    pub fn equilibrium_spacing(&self, v: f64) -> f64 {
        self.min_spacing + v * self.time_headway
    }

    /// Steady-state flow, veh/h, of a platoon driving at `v`.
    pub fn capacity_at(&self, v: f64) -> f64 {
        3600.0 * v / self.equilibrium_spacing(v)
    }

    /// Parameters drivers use inside the speed-reduction zone.
    pub fn in_reduced_zone(&self, v_srz: f64) -> Self {
        Self {
            desired_speed: v_srz,
            time_headway: self.srz_time_headway,
            ..self.clone()
        }
    }

    /// Same parameters with a different desired speed.
    pub fn with_desired_speed(&self, v: f64) -> Self {
        Self {
            desired_speed: v,
            ..self.clone()
        }
    }
}

/// Dynamic desired gap `s*`.
pub fn desired_gap(v: f64, dv_closing: f64, params: &CarFollowingParams) -> f64 {
    let dynamic = v * params.time_headway
        + v * dv_closing / (2.0 * (params.max_accel * params.comfortable_decel).sqrt());
    params.min_spacing + dynamic.max(0.0)
}

/// Intelligent-driver acceleration of `follower` behind `leader`.
///
/// Free-road law when there is no leader. A non-positive gap returns
/// `u_min`; the caller records the collision.
pub fn baseline_accel(
    follower: &VehicleState,
    leader: Option<&VehicleState>,
    params: &CarFollowingParams,
    lim: &ControlParams,
) -> f64 {
    let v = follower.v.max(0.0);
    let free = 1.0 - (v / params.desired_speed).powf(params.accel_exponent);
    let interaction = match leader {
        None => 0.0,
        Some(lead) => {
            let gap = lead.p - follower.p;
            if gap <= 0.0 {
                return lim.u_min;
            }
            (desired_gap(v, v - lead.v, params) / gap).powi(2)
        }
    };
    lim.clamp_accel(params.max_accel * (free - interaction))
}

/// Default speed-harmonization settings.
///
/// The upstream speed `s_m` is the mean speed of vehicles within
/// `measurement_length` upstream of the control zone, averaged over the last
/// `measurement_window` seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdHarmSettings {
    pub measurement_window: f64,
    pub measurement_length: f64,
    pub tracking_time: f64,
}

impl Default for SpdHarmSettings {
    fn default() -> Self {
        Self {
            measurement_window: 60.0,
            measurement_length: 300.0,
            tracking_time: 1.0,
        }
    }
}

/// Instantaneous inputs of the harmonization law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdHarmParams {
    /// Upstream measured speed.
    pub s_m: f64,
    /// Downstream target speed.
    pub s_n: f64,
    /// Distance between the two measurement points.
    pub dx_mn: f64,
    pub measurement_window: f64,
}

/// Commanded speed `x_rel` meters past the upstream measurement point:
/// linear from `s_m` down to `s_n` over `dx_mn`, clamped to the speed limits.
pub fn spdharm_speed(x_rel: f64, params: &SpdHarmParams, lim: &ControlParams) -> f64 {
    let x = x_rel.clamp(0.0, params.dx_mn);
    let s = params.s_m + (params.s_n - params.s_m) * x / params.dx_mn;
    lim.clamp_speed(s)
}

/// Proportional tracking of a commanded speed with time constant `tau`.
///
/// `tau` is floored at `dt` so one step never overshoots the command.
pub fn spdharm_accel(
    current_v: f64,
    commanded_v: f64,
    lim: &ControlParams,
    dt: f64,
    tau: f64,
) -> f64 {
    lim.clamp_accel((commanded_v - current_v) / tau.max(dt))
}
