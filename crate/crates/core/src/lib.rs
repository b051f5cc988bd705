//! Energy-optimal speed control for automated vehicles approaching a freeway
//! speed-reduction zone.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`]: value types, configuration and validation.
//! * [`optimal_control`]: the closed-form minimum-energy cubic trajectory,
//!   its evaluation, feedback replanning and bound checking.
//! * [`scheduler`]: terminal-time assignment at the zone boundary and the
//!   rear-end safety certificate with its exact min-gap oracle.
//! * [`comparators`]: the car-following baseline and the speed-harmonization
//!   law the optimal controller is compared against.
//! * [`fuel_metrics`]: polynomial fuel metamodel and per-run metrics.
//! * [`sim`]: deterministic fixed-step single-lane simulator.

pub mod comparators;
pub mod domain;
pub mod fuel_metrics;
pub mod optimal_control;
pub mod scheduler;
pub mod sim;

mod error;
mod poly;

pub use comparators::{CarFollowingParams, SpdHarmParams, SpdHarmSettings};
pub use domain::{
    validate_config, BoundaryConditions, ControlParams, ControllerKind, Phase, SafetyParams,
    SimConfig, ValidationResult, VehicleState, Violation, ZoneGeometry,
};
pub use error::Error;
pub use fuel_metrics::{FuelModelConfig, MetricsReport, VehicleRecord};
pub use optimal_control::{BoundKind, BoundViolation, TrajectoryCoefficients};
pub use scheduler::{LeaderInfo, SafetyVerdict};

pub type Result<T, E = Error> = std::result::Result<T, E>;
