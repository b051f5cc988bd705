//! Seeded vehicle arrival schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::domain::SafetyParams;
use crate::scheduler::safe_distance;
use crate::{Error, Result};

/// Entry-speed distribution: a normal truncated to `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntrySpeed {
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl EntrySpeed {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.stddev == 0.0 {
            return self.mean.clamp(self.min, self.max);
        }
        let normal = Normal::new(self.mean, self.stddev).expect("finite, non-negative stddev");
        // Rejection stays cheap while the mean lies inside the bounds; the
        // clamp only guards pathological configurations.
        for _ in 0..1000 {
            let v = normal.sample(rng);
            if v >= self.min && v <= self.max {
                return v;
            }
        }
        self.mean.clamp(self.min, self.max)
    }
}

/// One scheduled arrival at the corridor entrance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub t: f64,
    pub v0: f64,
}

/// Arrivals ordered by time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArrivalSchedule {
    pub arrivals: Vec<Arrival>,
}

impl ArrivalSchedule {
    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }
}

/// Smallest headway at which a vehicle entering at `v` keeps the safe
/// distance to the one before it.
pub fn min_entry_headway(v: f64, safety: &SafetyParams) -> f64 {
    safe_distance(v, safety) / v
}

/// Draws arrivals over `[0, duration)` with shifted-exponential headways.
///
/// Each headway is the follower's minimum safe entry headway plus an
/// exponential remainder, so the mean headway is exactly `3600 / volume`.
/// Fails when even the slowest admissible entry needs a longer headway than
/// the mean.
pub fn spawn_arrivals(
    volume: f64,
    duration: f64,
    seed: u64,
    entry: &EntrySpeed,
    safety: &SafetyParams,
) -> Result<ArrivalSchedule> {
    let mean_headway = 3600.0 / volume;
    let worst_shift = min_entry_headway(entry.min, safety);
    if mean_headway <= worst_shift {
        return Err(Error::InfeasibleVolume {
            mean_headway,
            min_headway: worst_shift,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    loop {
        let v0 = entry.sample(&mut rng);
        let shift = min_entry_headway(v0, safety);
        let rest = Exp::new(1.0 / (mean_headway - shift)).expect("positive rate");
        if !arrivals.is_empty() {
            t += shift + rest.sample(&mut rng);
        }
        if t >= duration {
            break;
        }
        arrivals.push(Arrival { t, v0 });
    }
    Ok(ArrivalSchedule { arrivals })
}
