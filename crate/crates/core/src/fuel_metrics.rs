//! Polynomial fuel metamodel and per-run metrics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Vehicle description the fuel polynomial was fitted for. Informational
/// only; the coefficients already account for it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleMetadata {
    pub mass_kg: f64,
    pub drag_coefficient: f64,
    pub air_density: f64,
    pub frontal_area_m2: f64,
    pub rolling_resistance: f64,
}

impl Default for VehicleMetadata {
    fn default() -> Self {
        Self {
            mass_kg: 1200.0,
            drag_coefficient: 0.32,
            air_density: 1.184,
            frontal_area_m2: 2.5,
            rolling_resistance: 0.015,
        }
    }
}

/// Coefficients of the fuel-rate polynomial
/// `w0 + w1 v + w2 v² + w3 v³ + u (n0 + n1 v + n2 v²)`.
///
/// The defaults are illustrative, in arbitrary fuel units per second, and
/// only meaningful for comparing controllers against each other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuelModelConfig {
    pub w: [f64; 4],
    pub n: [f64; 3],
    pub vehicle: VehicleMetadata,
}

impl Default for FuelModelConfig {
    fn default() -> Self {
        Self {
            w: [0.1569, 2.450e-2, -7.415e-4, 5.975e-5],
            n: [0.07224, 9.681e-2, 1.075e-3],
            vehicle: VehicleMetadata::default(),
        }
    }
}

impl FuelModelConfig {
    /// Rate at constant speed, before the idle floor.
    pub fn cruise_rate(&self, v: f64) -> f64 {
        let w = &self.w;
        w[0] + v * (w[1] + v * (w[2] + v * w[3]))
    }

    fn accel_factor(&self, v: f64) -> f64 {
        let n = &self.n;
        n[0] + v * (n[1] + v * n[2])
    }
}

/// Fuel rate at speed `v` and acceleration `u`, floored at zero.
pub fn fuel_rate(v: f64, u: f64, cfg: &FuelModelConfig) -> f64 {
    (cfg.cruise_rate(v) + u * cfg.accel_factor(v)).max(0.0)
}

/// Trapezoidal integral of the fuel rate over `(t, v, u)` samples.
pub fn trip_fuel(samples: &[(f64, f64, f64)], cfg: &FuelModelConfig) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::EmptyTrace(samples.len()));
    }
    Ok(samples
        .windows(2)
        .map(|w| {
            let (t0, v0, u0) = w[0];
            let (t1, v1, u1) = w[1];
            0.5 * (fuel_rate(v0, u0, cfg) + fuel_rate(v1, u1, cfg)) * (t1 - t0)
        })
        .sum())
}

/// One vehicle's trip through the corridor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: u64,
    /// Scheduled arrival at the corridor entrance.
    pub t_entry: f64,
    pub t_exit: f64,
    pub travel_time_s: f64,
    pub fuel: f64,
    /// Smallest gap to the leader while in the corridor; infinite when it
    /// never had one.
    pub min_gap_m: f64,
    pub distance_m: f64,
    /// Time spent upstream, in the control zone and in the speed-reduction
    /// zone; the wait at a held entrance counts as upstream time.
    pub segment_times_s: [f64; 3],
}

/// Metrics of one replication, or of several after [`summarize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<VehicleRecord>,
    pub mean_travel_time_s: f64,
    pub mean_fuel_per_vehicle: f64,
    pub throughput_vph: f64,
    /// 95% half-widths across replications; `None` with a single one.
    pub ci95_travel_time_s: Option<f64>,
    pub ci95_fuel_per_vehicle: Option<f64>,
    pub ci95_throughput_vph: Option<f64>,
    pub observation_window_s: f64,
    pub replications: u32,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

impl MetricsReport {
    /// Aggregates of a single replication. Throughput counts vehicles that
    /// left the corridor within the observation window.
    pub fn from_rows(rows: Vec<VehicleRecord>, observation_window_s: f64) -> Self {
        let exited = rows
            .iter()
            .filter(|r| r.t_exit <= observation_window_s)
            .count();
        let throughput_vph = if observation_window_s > 0.0 {
            exited as f64 * 3600.0 / observation_window_s
        } else {
            0.0
        };
        Self {
            mean_travel_time_s: mean(rows.iter().map(|r| r.travel_time_s)),
            mean_fuel_per_vehicle: mean(rows.iter().map(|r| r.fuel)),
            throughput_vph,
            ci95_travel_time_s: None,
            ci95_fuel_per_vehicle: None,
            ci95_throughput_vph: None,
            observation_window_s,
            replications: 1,
            rows,
        }
    }
}

/// Mean and 95% t-interval half-width of `xs`; no half-width for fewer than
/// two values.
pub fn mean_ci95(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    let m = mean(xs.iter().copied());
    if n < 2 {
        return (m, None);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (m, Some(t * (var / n as f64).sqrt()))
}

/// Combines replications: each aggregate becomes the mean of the
/// per-replication values with its 95% half-width; rows are concatenated.
pub fn summarize(reports: &[MetricsReport]) -> MetricsReport {
    let collect = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let (tt, tt_ci) = mean_ci95(&collect(|r| r.mean_travel_time_s));
    let (fuel, fuel_ci) = mean_ci95(&collect(|r| r.mean_fuel_per_vehicle));
    let (q, q_ci) = mean_ci95(&collect(|r| r.throughput_vph));
    MetricsReport {
        rows: reports
            .iter()
            .flat_map(|r| r.rows.iter().cloned())
            .collect(),
        mean_travel_time_s: tt,
        mean_fuel_per_vehicle: fuel,
        throughput_vph: q,
        ci95_travel_time_s: tt_ci,
        ci95_fuel_per_vehicle: fuel_ci,
        ci95_throughput_vph: q_ci,
        observation_window_s: reports.first().map_or(0.0, |r| r.observation_window_s),
        replications: reports.iter().map(|r| r.replications).sum(),
    }
}
