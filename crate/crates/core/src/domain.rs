//! Shared value types, scenario configuration and its validation.
//!
//! Everything is SI: meters, seconds, m/s, m/s². Positions are measured from
//! the corridor entry and increase downstream. Vehicles are point masses, so
//! the gap between two vehicles is the plain difference of their positions.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comparators::{CarFollowingParams, SpdHarmSettings};
use crate::fuel_metrics::FuelModelConfig;
use crate::Error;

/// Corridor layout: upstream segment, control zone, speed-reduction zone.
///
/// The segments are contiguous and in that order, with the speed-reduction
/// zone terminating the corridor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZoneGeometry {
    pub corridor_length: f64,
    pub upstream_length: f64,
    pub control_zone_length: f64,
    pub srz_length: f64,
    /// Imposed speed limit inside the speed-reduction zone.
    pub v_srz: f64,
}

impl Default for ZoneGeometry {
    fn default() -> Self {
        ZoneGeometry {
            corridor_length: 2000.0,
            upstream_length: 1400.0,
            control_zone_length: 300.0,
            srz_length: 300.0,
            v_srz: 15.6,
        }
    }
}

impl ZoneGeometry {
    /// Position of the control-zone entrance.
    pub fn control_zone_start(&self) -> f64 {
        self.upstream_length
    }

    /// Position of the speed-reduction-zone entrance.
    pub fn srz_start(&self) -> f64 {
        self.upstream_length + self.control_zone_length
    }

    pub fn corridor_end(&self) -> f64 {
        self.corridor_length
    }

    /// Zone a position falls into. Anything at or past the corridor end is
    /// `Exited`.
    pub fn phase_at(&self, p: f64) -> Phase {
        if p >= self.corridor_end() {
            Phase::Exited
        } else if p >= self.srz_start() {
            Phase::SpeedReductionZone
        } else if p >= self.control_zone_start() {
            Phase::ControlZone
        } else {
            Phase::Upstream
        }
    }
}

/// Actuation and speed limits inside the control zone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlParams {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            u_min: -4.5,
            u_max: 4.5,
            v_min: 10.0,
            v_max: 35.0,
        }
    }
}

impl ControlParams {
    pub fn clamp_accel(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }

    pub fn clamp_speed(&self, v: f64) -> f64 {
        v.clamp(self.v_min, self.v_max)
    }
}

/// Linear safe-distance model: standstill distance plus headway time times
/// the average speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyParams {
    /// Standstill distance, meters.
    pub c0: f64,
    /// Headway time, seconds.
    pub c1: f64,
}

impl Default for SafetyParams {
    fn default() -> Self {
        SafetyParams { c0: 1.5, c1: 1.2 }
    }
}

/// Where a vehicle is along the corridor. Transitions only move forward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Upstream,
    ControlZone,
    SpeedReductionZone,
    Exited,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Upstream => "upstream",
            Phase::ControlZone => "control_zone",
            Phase::SpeedReductionZone => "srz",
            Phase::Exited => "exited",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kinematic state of one vehicle at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleState {
    pub id: u64,
    pub t: f64,
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub phase: Phase,
    pub t_entry_corridor: Option<f64>,
    /// Control-zone entry time.
    pub t0: Option<f64>,
    /// Assigned speed-reduction-zone entry time.
    pub tm: Option<f64>,
    /// Speed-reduction-zone exit time.
    pub tf: Option<f64>,
}

impl VehicleState {
    pub fn new(id: u64, t: f64, p: f64, v: f64, phase: Phase) -> Self {
        VehicleState {
            id,
            t,
            p,
            v,
            u: 0.0,
            phase,
            t_entry_corridor: None,
            t0: None,
            tm: None,
            tf: None,
        }
    }
}

/// Endpoint states of a closed-form solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryConditions {
    pub t0: f64,
    pub p0: f64,
    pub v0: f64,
    pub tm: f64,
    pub pm: f64,
    pub vm: f64,
}

impl BoundaryConditions {
    pub fn new(t0: f64, p0: f64, v0: f64, tm: f64, pm: f64, vm: f64) -> Self {
        BoundaryConditions {
            t0,
            p0,
            v0,
            tm,
            pm,
            vm,
        }
    }
}

/// Controller used inside the control zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Baseline,
    SpdHarm,
    Optimal,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::Baseline,
        ControllerKind::SpdHarm,
        ControllerKind::Optimal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::Baseline => "baseline",
            ControllerKind::SpdHarm => "spd_harm",
            ControllerKind::Optimal => "optimal",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One complete scenario description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub geometry: ZoneGeometry,
    pub control: ControlParams,
    pub safety: SafetyParams,
    pub fuel: FuelModelConfig,
    pub baseline: CarFollowingParams,
    pub spdharm: SpdHarmSettings,
    /// Demand, vehicles per hour.
    pub volume: f64,
    /// Demand window, seconds.
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub replications: u32,
    pub controller: ControllerKind,
    pub entry_speed_mean: f64,
    pub entry_speed_stddev: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            geometry: ZoneGeometry::default(),
            control: ControlParams::default(),
            safety: SafetyParams::default(),
            fuel: FuelModelConfig::default(),
            baseline: CarFollowingParams::default(),
            spdharm: SpdHarmSettings::default(),
            volume: 1620.0,
            duration: 1000.0,
            dt: 0.1,
            seed: 2017,
            replications: 5,
            controller: ControllerKind::Optimal,
            entry_speed_mean: 25.0,
            entry_speed_stddev: 2.0,
        }
    }
}

impl SimConfig {
    /// Parses a TOML document. Unknown keys are rejected.
    pub fn from_toml_str(s: &str) -> Result<Self, Error> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, Error> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Mean inter-arrival time implied by `volume`.
    pub fn mean_headway(&self) -> f64 {
        3600.0 / self.volume
    }
}

/// A single failed check, addressed by its field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Outcome of [`validate_config`]: either clean or every violated invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationResult {
    Ok,
    Invalid(Vec<Violation>),
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        matches!(self, ValidationResult::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            ValidationResult::Ok => &[],
            ValidationResult::Invalid(v) => v,
        }
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.out.push(Violation {
                field: field.to_string(),
                message: message.into(),
            });
        }
    }

    fn finite(&mut self, x: f64, field: &str) -> bool {
        self.check(x.is_finite(), field, "must be a finite number");
        x.is_finite()
    }
}

/// Checks every invariant of `config` and reports all violations at once.
pub fn validate_config(config: &SimConfig) -> ValidationResult {
    let mut c = Checker { out: Vec::new() };

    let g = &config.geometry;
    let geometry_finite = [
        (g.corridor_length, "geometry.corridor_length"),
        (g.upstream_length, "geometry.upstream_length"),
        (g.control_zone_length, "geometry.control_zone_length"),
        (g.srz_length, "geometry.srz_length"),
        (g.v_srz, "geometry.v_srz"),
    ]
    .iter()
    .fold(true, |acc, &(x, f)| c.finite(x, f) && acc);
    c.check(
        g.control_zone_length > 0.0,
        "geometry.control_zone_length",
        "must be > 0",
    );
    c.check(g.srz_length > 0.0, "geometry.srz_length", "must be > 0");
    c.check(g.v_srz > 0.0, "geometry.v_srz", "must be > 0");
    c.check(
        g.upstream_length >= 0.0,
        "geometry.upstream_length",
        "must be >= 0",
    );
    if geometry_finite {
        let total = g.upstream_length + g.control_zone_length + g.srz_length;
        c.check(
            (total - g.corridor_length).abs() <= 1e-9 * g.corridor_length.abs().max(1.0),
            "geometry.corridor_length",
            format!(
                "upstream_length + control_zone_length + srz_length = {total} must equal corridor_length = {}",
                g.corridor_length
            ),
        );
    }

    let l = &config.control;
    for (x, f) in [
        (l.u_min, "control.u_min"),
        (l.u_max, "control.u_max"),
        (l.v_min, "control.v_min"),
        (l.v_max, "control.v_max"),
    ] {
        c.finite(x, f);
    }
    c.check(l.u_min < 0.0, "control.u_min", "must be < 0");
    c.check(l.u_max > 0.0, "control.u_max", "must be > 0");
    c.check(l.v_min > 0.0, "control.v_min", "must be > 0");
    c.check(
        l.v_min < l.v_max,
        "control.v_max",
        format!("v_min = {} must be < v_max = {}", l.v_min, l.v_max),
    );
    c.check(
        g.v_srz >= l.v_min && g.v_srz <= l.v_max,
        "geometry.v_srz",
        format!(
            "v_srz = {} must lie within [v_min, v_max] = [{}, {}]",
            g.v_srz, l.v_min, l.v_max
        ),
    );

    let s = &config.safety;
    c.finite(s.c0, "safety.c0");
    c.finite(s.c1, "safety.c1");
    c.check(s.c0 >= 0.0, "safety.c0", "must be >= 0");
    c.check(s.c1 >= 0.0, "safety.c1", "must be >= 0");
    c.check(
        s.c0 > 0.0 || s.c1 > 0.0,
        "safety",
        "c0 and c1 must not both be zero",
    );

    for (i, w) in config.fuel.w.iter().enumerate() {
        c.finite(*w, &format!("fuel.w[{i}]"));
    }
    for (i, n) in config.fuel.n.iter().enumerate() {
        c.finite(*n, &format!("fuel.n[{i}]"));
    }
    if l.v_min.is_finite() && l.v_max.is_finite() && l.v_min <= l.v_max {
        let negative = (0..=100)
            .map(|k| l.v_min + (l.v_max - l.v_min) * k as f64 / 100.0)
            .find(|&v| config.fuel.cruise_rate(v) < 0.0);
        c.check(
            negative.is_none(),
            "fuel.w",
            format!(
                "cruise fuel rate is negative at v = {:?}",
                negative.unwrap_or(0.0)
            ),
        );
    }

    let b = &config.baseline;
    for (x, f) in [
        (b.desired_speed, "baseline.desired_speed"),
        (b.time_headway, "baseline.time_headway"),
        (b.min_spacing, "baseline.min_spacing"),
        (b.max_accel, "baseline.max_accel"),
        (b.comfortable_decel, "baseline.comfortable_decel"),
        (b.accel_exponent, "baseline.accel_exponent"),
    ] {
        if c.finite(x, f) {
            c.check(x > 0.0, f, "must be > 0");
        }
    }

    let h = &config.spdharm;
    for (x, f) in [
        (h.measurement_window, "spdharm.measurement_window"),
        (h.measurement_length, "spdharm.measurement_length"),
        (h.tracking_time, "spdharm.tracking_time"),
    ] {
        if c.finite(x, f) {
            c.check(x > 0.0, f, "must be > 0");
        }
    }

    c.check(
        config.volume.is_finite() && config.volume > 0.0,
        "volume",
        "must be > 0",
    );
    c.check(
        config.duration.is_finite() && config.duration >= 0.0,
        "duration",
        "must be >= 0",
    );
    c.check(
        config.dt.is_finite() && config.dt > 0.0,
        "dt",
        "must be > 0",
    );
    c.check(config.replications >= 1, "replications", "must be >= 1");
    c.check(
        config.entry_speed_mean.is_finite()
            && config.entry_speed_mean >= l.v_min
            && config.entry_speed_mean <= l.v_max,
        "entry_speed_mean",
        format!(
            "must lie within [v_min, v_max] = [{}, {}]",
            l.v_min, l.v_max
        ),
    );
    c.check(
        config.entry_speed_stddev.is_finite() && config.entry_speed_stddev >= 0.0,
        "entry_speed_stddev",
        "must be >= 0",
    );

    if c.out.is_empty() {
        ValidationResult::Ok
    } else {
        ValidationResult::Invalid(c.out)
    }
}
