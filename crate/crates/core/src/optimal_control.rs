//! Closed-form minimum-energy trajectories for a double integrator.
//!
//! With no state or control bound active, minimising ½∫u² between two fixed
//! endpoint states gives an affine control `u(t) = a t + b`, hence a quadratic
//! speed and a cubic position:
//!
//! ```text
//! u(t) = a t + b
//! v(t) = a t²/2 + b t + c
//! p(t) = a t³/6 + b t²/2 + c t + d
//! ```
//!
//! The four constants are fixed by the endpoint states. They are solved after
//! shifting time to start at zero, where the 4×4 boundary matrix has the
//! closed-form inverse with determinant `T⁴/12`.

use crate::domain::{BoundaryConditions, ControlParams, VehicleState};
use crate::poly::quadratic_roots;
use crate::{Error, Result};

/// Smallest horizon the closed form accepts, seconds.
pub const HORIZON_EPSILON: f64 = 1e-6;

/// A planned cubic trajectory on `[valid_from, valid_to]`.
///
/// Stored as Taylor coefficients about `valid_from` (jerk, acceleration,
/// speed and position there), which keeps evaluation well conditioned at
/// large absolute clock values. [`a`](Self::a) .. [`d`](Self::d) give the
/// equivalent absolute-time constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryCoefficients {
    jerk: f64,
    accel0: f64,
    speed0: f64,
    pos0: f64,
    valid_from: f64,
    valid_to: f64,
}

impl TrajectoryCoefficients {
    /// Builds from absolute-time constants `p(t) = a t³/6 + b t²/2 + c t + d`.
    pub fn from_absolute(a: f64, b: f64, c: f64, d: f64, valid_from: f64, valid_to: f64) -> Self {
        let t = valid_from;
        TrajectoryCoefficients {
            jerk: a,
            accel0: a * t + b,
            speed0: (a * t / 2.0 + b) * t + c,
            pos0: ((a * t / 6.0 + b / 2.0) * t + c) * t + d,
            valid_from,
            valid_to,
        }
    }

    /// Builds from the state at `valid_from` (position, speed, acceleration)
    /// and the constant jerk.
    pub fn from_local(
        valid_from: f64,
        valid_to: f64,
        pos: f64,
        speed: f64,
        accel: f64,
        jerk: f64,
    ) -> Self {
        TrajectoryCoefficients {
            jerk,
            accel0: accel,
            speed0: speed,
            pos0: pos,
            valid_from,
            valid_to,
        }
    }

    /// Constant-speed motion through `(t_from, p)`.
    pub fn cruise(t_from: f64, t_to: f64, p: f64, v: f64) -> Self {
        Self::from_local(t_from, t_to, p, v, 0.0, 0.0)
    }

    pub fn valid_from(&self) -> f64 {
        self.valid_from
    }

    pub fn valid_to(&self) -> f64 {
        self.valid_to
    }

    /// Jerk, m/s³.
    pub fn a(&self) -> f64 {
        self.jerk
    }

    /// Acceleration at absolute time zero, m/s².
    pub fn b(&self) -> f64 {
        self.accel0 - self.jerk * self.valid_from
    }

    /// Speed at absolute time zero, m/s.
    pub fn c(&self) -> f64 {
        let t = self.valid_from;
        self.speed0 - self.accel0 * t + self.jerk * t * t / 2.0
    }

    /// Position at absolute time zero, m.
    pub fn d(&self) -> f64 {
        let t = self.valid_from;
        self.pos0 - self.speed0 * t + self.accel0 * t * t / 2.0 - self.jerk * t * t * t / 6.0
    }

    /// `(p, v, u)` at `t`, without checking the validity window.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        let s = t - self.valid_from;
        let u = self.accel0 + self.jerk * s;
        let v = self.speed0 + s * (self.accel0 + s * self.jerk / 2.0);
        let p = self.pos0 + s * (self.speed0 + s * (self.accel0 / 2.0 + s * self.jerk / 6.0));
        (p, v, u)
    }

    /// Same trajectory re-expanded about `t`: `(jerk, u(t), v(t), p(t))`.
    pub fn taylor_at(&self, t: f64) -> (f64, f64, f64, f64) {
        let (p, v, u) = self.state_at(t);
        (self.jerk, u, v, p)
    }

    /// ½∫u² over the validity window.
    pub fn energy(&self) -> f64 {
        let h = self.valid_to - self.valid_from;
        let (a, b) = (self.jerk, self.accel0);
        0.5 * (a * a * h * h * h / 3.0 + a * b * h * h + b * b * h)
    }

    /// The same coefficients with a different validity window.
    pub fn with_window(&self, from: f64, to: f64) -> Self {
        let (p, v, u) = self.state_at(from);
        Self::from_local(from, to, p, v, u, self.jerk)
    }
}

/// Solves for the unique cubic meeting both endpoint states.
pub fn solve_coefficients(bc: &BoundaryConditions) -> Result<TrajectoryCoefficients> {
    let horizon = bc.tm - bc.t0;
    if horizon.is_nan() || horizon <= HORIZON_EPSILON {
        return Err(Error::DegenerateHorizon {
            horizon,
            epsilon: HORIZON_EPSILON,
        });
    }
    // Shifted frame: s = t - t0, so d = p0 and c = v0 directly; the remaining
    // pair follows from the closed-form inverse.
    let h = horizon;
    let distance = bc.pm - bc.p0 - bc.v0 * h;
    let dv = bc.vm - bc.v0;
    let jerk = 6.0 * dv / (h * h) - 12.0 * distance / (h * h * h);
    let accel = 6.0 * distance / (h * h) - 2.0 * dv / h;
    Ok(TrajectoryCoefficients::from_local(
        bc.t0, bc.tm, bc.p0, bc.v0, accel, jerk,
    ))
}

/// Position, speed and acceleration at `t`.
pub fn eval_trajectory(coeffs: &TrajectoryCoefficients, t: f64) -> Result<(f64, f64, f64)> {
    let slack = 1e-12 * coeffs.valid_to.abs().max(1.0);
    if !(t >= coeffs.valid_from - slack && t <= coeffs.valid_to + slack) {
        return Err(Error::OutOfInterval {
            t,
            from: coeffs.valid_from,
            to: coeffs.valid_to,
        });
    }
    Ok(coeffs.state_at(t))
}

/// Re-solves from the current state toward the same terminal condition.
///
/// On an existing optimal trajectory this reproduces the original
/// constants: the feedback form of the closed-form controller.
pub fn replan(current: &VehicleState, tm: f64, pm: f64, vm: f64) -> Result<TrajectoryCoefficients> {
    solve_coefficients(&BoundaryConditions::new(
        current.t, current.p, current.v, tm, pm, vm,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    SpeedHigh,
    SpeedLow,
    AccelHigh,
    AccelLow,
}

/// One exceeded limit: when it is first crossed and how far the trajectory
/// goes beyond it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundViolation {
    pub kind: BoundKind,
    pub t_first: f64,
    pub extremal_value: f64,
}

const BOUND_TOLERANCE: f64 = 1e-9;

/// Exact extremal analysis of a planned trajectory against `limits`.
///
/// `u` is affine so its extremes sit at the window endpoints; `v` is quadratic
/// so its extremes sit at the endpoints or at the interior stationary point.
/// An empty result means the unconstrained closed form is admissible.
pub fn check_bounds(
    coeffs: &TrajectoryCoefficients,
    limits: &ControlParams,
) -> Vec<BoundViolation> {
    let h = coeffs.valid_to - coeffs.valid_from;
    let t0 = coeffs.valid_from;
    let (a, b, c) = (coeffs.jerk, coeffs.accel0, coeffs.speed0);
    let mut out = Vec::new();

    // Acceleration, affine in s.
    let u_end = b + a * h;
    let (u_lo, u_hi) = (b.min(u_end), b.max(u_end));
    if u_hi > limits.u_max + BOUND_TOLERANCE {
        let s = if b > limits.u_max {
            0.0
        } else {
            (limits.u_max - b) / a
        };
        out.push(BoundViolation {
            kind: BoundKind::AccelHigh,
            t_first: t0 + s.clamp(0.0, h),
            extremal_value: u_hi,
        });
    }
    if u_lo < limits.u_min - BOUND_TOLERANCE {
        let s = if b < limits.u_min {
            0.0
        } else {
            (limits.u_min - b) / a
        };
        out.push(BoundViolation {
            kind: BoundKind::AccelLow,
            t_first: t0 + s.clamp(0.0, h),
            extremal_value: u_lo,
        });
    }

    // Speed, quadratic in s.
    let speed = |s: f64| c + s * (b + s * a / 2.0);
    let mut candidates = vec![0.0, h];
    if a != 0.0 {
        let s_star = -b / a;
        if s_star > 0.0 && s_star < h {
            candidates.push(s_star);
        }
    }
    let v_hi = candidates
        .iter()
        .map(|&s| speed(s))
        .fold(f64::NEG_INFINITY, f64::max);
    let v_lo = candidates
        .iter()
        .map(|&s| speed(s))
        .fold(f64::INFINITY, f64::min);
    let first_crossing = |level: f64, above: bool| -> f64 {
        let outside = |v: f64| if above { v > level } else { v < level };
        if outside(c) {
            return 0.0;
        }
        quadratic_roots(a / 2.0, b, c - level)
            .into_iter()
            .filter(|&s| s >= 0.0 && s <= h)
            .find(|&s| {
                let probe = (s + 1e-9 * h.max(1.0)).min(h);
                outside(speed(probe)) || outside(speed(s))
            })
            .unwrap_or(h)
    };
    if v_hi > limits.v_max + BOUND_TOLERANCE {
        out.push(BoundViolation {
            kind: BoundKind::SpeedHigh,
            t_first: t0 + first_crossing(limits.v_max, true),
            extremal_value: v_hi,
        });
    }
    if v_lo < limits.v_min - BOUND_TOLERANCE {
        out.push(BoundViolation {
            kind: BoundKind::SpeedLow,
            t_first: t0 + first_crossing(limits.v_min, false),
            extremal_value: v_lo,
        });
    }
    out.sort_by(|x, y| x.t_first.total_cmp(&y.t_first));
    out
}
