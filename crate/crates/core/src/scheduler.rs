//! Terminal-time assignment and rear-end safety certification.
//!
//! Each vehicle entering the control zone is given the time at which it must
//! reach the speed-reduction zone, one safe headway behind its leader. The
//! certificate then decides whether the two unconstrained optimal
//! trajectories keep the gap above the safe distance, and an exact cubic
//! min-gap computation serves as the independent oracle for it.
//!
//! # Certificate algebra
//!
//! Shift time so the follower enters at `t = 0` with gap `l` and speed
//! difference `dv = v_lead(0) - v_follow(0)`. With both vehicles planned to
//! reach their terminal points at `T` with equal speed (leader `δ` ahead of
//! the follower), the difference of the two cubics is
//!
//! ```text
//! g(t) - δ = (1 - s)² [ (l - δ)(1 + 2s) + dv·T·s ],   s = t/T
//! ```
//!
//! so `g(t) ≥ δ` on `(0, T]` iff `dv ≥ f(t)` everywhere, with
//!
//! ```text
//! f(t) = -(l - δ)(T + 2t) / (t T)
//! ```
//!
//! This is derived from the integration constants of both trajectories and
//! replaces the form with flipped signs on the `(l - δ)` terms, which is not
//! consistent with `g(T) = δ`.

use crate::domain::{ControlParams, Phase, SafetyParams, VehicleState, ZoneGeometry};
use crate::optimal_control::{solve_coefficients, TrajectoryCoefficients, HORIZON_EPSILON};
use crate::poly::{cubic_roots, quadratic_roots};
use crate::{BoundaryConditions, Error, Result};

/// Gap tolerance used by the min-gap oracle, meters.
pub const GAP_TOLERANCE: f64 = 1e-6;

/// Step used when searching for a later terminal time, seconds.
pub const TERMINAL_TIME_STEP: f64 = 0.1;

/// Minimum safe following distance at average speed `v_ave`.
pub fn safe_distance(v_ave: f64, sp: &SafetyParams) -> f64 {
    sp.c0 + sp.c1 * v_ave
}

/// What a follower knows about its immediate leader.
///
/// `tm_prev` is expressed relative to the follower's own control-zone entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeaderInfo {
    pub tm_prev: f64,
    /// Leader speed when it reaches the speed-reduction zone.
    pub v_at_tm: f64,
    pub gap_now: f64,
    pub v_now: f64,
}

/// Terminal time for a vehicle that still has `distance` to cover to the
/// speed-reduction zone.
///
/// Same rule as [`assign_terminal_time`], with the remaining distance in
/// place of the zone length; the simulator uses it for vehicles that start
/// planning a little past the zone entrance.
pub fn terminal_time_for_distance(
    distance: f64,
    entry_v: f64,
    leader: Option<&LeaderInfo>,
    delta: f64,
    lim: &ControlParams,
    external_t1m: Option<f64>,
) -> Result<f64> {
    let v = lim.clamp_speed(entry_v);
    let slowest = distance / lim.v_min;
    let fastest = distance / lim.v_max;
    let tm = match leader {
        None => match external_t1m {
            Some(t) => return Ok(t),
            None => (distance / v).clamp(fastest, slowest),
        },
        Some(lead) => {
            let queued = (lead.tm_prev + delta / lead.v_at_tm).min(slowest);
            queued.max(distance / v).max(fastest)
        }
    };
    if tm > slowest + HORIZON_EPSILON {
        return Err(Error::InfeasibleWindow { tm, max: slowest });
    }
    Ok(tm)
}

/// Time, relative to the vehicle's control-zone entry, at which it must
/// reach the speed-reduction zone.
///
/// Without a leader the time is `external_t1m` when given, else the time to
/// cross the zone at the entry speed. With a leader it is one safe headway
/// behind the leader's terminal time, but never slower than `v_min`, never
/// faster than `v_max` and never faster than the entry speed on average.
pub fn assign_terminal_time(
    entry_v: f64,
    leader: Option<&LeaderInfo>,
    delta: f64,
    geo: &ZoneGeometry,
    lim: &ControlParams,
    external_t1m: Option<f64>,
) -> Result<f64> {
    terminal_time_for_distance(
        geo.control_zone_length,
        entry_v,
        leader,
        delta,
        lim,
        external_t1m,
    )
}

/// Outcome of the certificate: whether the rear-end constraint stays
/// inactive, where the bound is tightest and by how much it is met.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyVerdict {
    pub holds: bool,
    pub t_star: f64,
    /// `dv - f(t_star)`, m/s. Non-negative iff `holds`.
    pub margin: f64,
}

/// Right-hand side of the certificate at `t ∈ (0, tm]`.
pub fn certificate_bound(l: f64, delta: f64, t: f64, tm: f64) -> f64 {
    -(l - delta) * (tm + 2.0 * t) / (t * tm)
}

/// Gap slack `g(t) - δ` implied by a margin at `t` on the proof pair.
pub fn margin_to_gap(margin: f64, t: f64, tm: f64) -> f64 {
    let r = tm - t;
    margin * t * r * r / (tm * tm)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const SEED_POINTS: usize = 256;
const MAXIMIZER_TOLERANCE: f64 = 1e-8;

/// Maximises `f` on `(0, hi]` by seeding a grid and refining with a
/// golden-section search around the best grid point.
fn maximize_on_horizon(f: impl Fn(f64) -> f64, hi: f64) -> (f64, f64) {
    let step = hi / SEED_POINTS as f64;
    let (mut best_t, mut best_f) = (hi, f(hi));
    for k in 1..SEED_POINTS {
        let t = step * k as f64;
        let y = f(t);
        if y > best_f {
            best_t = t;
            best_f = y;
        }
    }
    let (mut lo, mut up) = ((best_t - step).max(step * 1e-3), (best_t + step).min(hi));
    let mut x1 = up - GOLDEN * (up - lo);
    let mut x2 = lo + GOLDEN * (up - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while up - lo > MAXIMIZER_TOLERANCE {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (up - lo);
            f2 = f(x2);
        } else {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - GOLDEN * (up - lo);
            f1 = f(x1);
        }
    }
    for (t, y) in [(x1, f1), (x2, f2), (up, f(up))] {
        if y > best_f {
            best_t = t;
            best_f = y;
        }
    }
    (best_t, best_f)
}

/// Rear-end certificate for a follower entering with gap `l` behind a leader
/// whose speed exceeds its own by `dv`, both due at the zone boundary at `tm`.
pub fn theorem1_condition(l: f64, delta: f64, dv: f64, tm: f64) -> Result<SafetyVerdict> {
    if l < delta {
        return Err(Error::HypothesisViolated { gap: l, delta });
    }
    if tm.is_nan() || tm <= HORIZON_EPSILON {
        return Err(Error::DegenerateHorizon {
            horizon: tm,
            epsilon: HORIZON_EPSILON,
        });
    }
    let (t_star, bound) = maximize_on_horizon(|t| certificate_bound(l, delta, t, tm), tm);
    let margin = dv - bound;
    Ok(SafetyVerdict {
        holds: margin >= 0.0,
        t_star,
        margin,
    })
}

/// Exact minimum of `p_lead - p_follow` over `[t_a, t_b]`.
///
/// The gap is a cubic, so the minimum is at an endpoint or at a real root of
/// its quadratic derivative. Ties resolve to the earliest time.
pub fn min_gap(
    lead: &TrajectoryCoefficients,
    follow: &TrajectoryCoefficients,
    t_a: f64,
    t_b: f64,
) -> (f64, f64) {
    let (jl, ul, vl, pl) = lead.taylor_at(t_a);
    let (jf, uf, vf, pf) = follow.taylor_at(t_a);
    let (j, u, v, p) = (jl - jf, ul - uf, vl - vf, pl - pf);
    let gap = |s: f64| p + s * (v + s * (u / 2.0 + s * j / 6.0));
    let h = t_b - t_a;
    let mut best = (t_a, p);
    let mut consider = |s: f64| {
        let g = gap(s);
        if g < best.1 {
            best = (t_a + s, g);
        }
    };
    for s in quadratic_roots(j / 2.0, u, v) {
        if s > 0.0 && s < h {
            consider(s);
        }
    }
    consider(h);
    best
}

/// [`min_gap`] over piecewise trajectories.
///
/// Each slice is a list of consecutive segments; the last one of each is
/// extended to `t_b` if needed.
pub fn min_gap_piecewise(
    lead: &[TrajectoryCoefficients],
    follow: &[TrajectoryCoefficients],
    t_a: f64,
    t_b: f64,
) -> (f64, f64) {
    let mut cuts: Vec<f64> = lead
        .iter()
        .chain(follow)
        .flat_map(|s| [s.valid_from(), s.valid_to()])
        .filter(|&t| t > t_a && t < t_b)
        .collect();
    cuts.push(t_a);
    cuts.push(t_b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pick = |segs: &[TrajectoryCoefficients], mid: f64| -> TrajectoryCoefficients {
        *segs
            .iter()
            .find(|s| mid >= s.valid_from() && mid <= s.valid_to())
            .unwrap_or_else(|| segs.last().expect("non-empty trajectory"))
    };
    let mut best = (t_a, f64::INFINITY);
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let r = min_gap(&pick(lead, mid), &pick(follow, mid), w[0], w[1]);
        if r.1 < best.1 {
            best = r;
        }
    }
    best
}

/// Inputs needed to rebuild the leader/follower pair used by the certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairInstance {
    pub l: f64,
    pub delta: f64,
    pub dv: f64,
    pub follower_speed: f64,
    pub control_zone_length: f64,
    pub v_srz: f64,
}

impl PairInstance {
    /// Leader from `(l, v_f + dv)` to `(L + δ, v_srz)` and follower from
    /// `(0, v_f)` to `(L, v_srz)`, both over `[0, tm]`.
    pub fn trajectories(
        &self,
        tm: f64,
    ) -> Result<(TrajectoryCoefficients, TrajectoryCoefficients)> {
        let lead = solve_coefficients(&BoundaryConditions::new(
            0.0,
            self.l,
            self.follower_speed + self.dv,
            tm,
            self.control_zone_length + self.delta,
            self.v_srz,
        ))?;
        let follow = self.follower(tm)?;
        Ok((lead, follow))
    }

    fn follower(&self, tm: f64) -> Result<TrajectoryCoefficients> {
        solve_coefficients(&BoundaryConditions::new(
            0.0,
            0.0,
            self.follower_speed,
            tm,
            self.control_zone_length,
            self.v_srz,
        ))
    }

    /// Exact minimum gap when the leader keeps its plan for `tm_lead` and the
    /// follower instead arrives at `tm_follow`; both cruise at `v_srz` after
    /// their terminal times.
    pub fn retimed_min_gap(&self, tm_lead: f64, tm_follow: f64) -> Result<(f64, f64)> {
        let (lead, _) = self.trajectories(tm_lead)?;
        let follow = self.follower(tm_follow)?;
        let end = tm_lead.max(tm_follow);
        let lead_segs = [
            lead,
            TrajectoryCoefficients::cruise(
                tm_lead,
                end,
                self.control_zone_length + self.delta,
                self.v_srz,
            ),
        ];
        let follow_segs = [
            follow,
            TrajectoryCoefficients::cruise(tm_follow, end, self.control_zone_length, self.v_srz),
        ];
        Ok(min_gap_piecewise(&lead_segs, &follow_segs, 0.0, end))
    }
}

/// Smallest terminal time at or after `tm_current` for which the follower's
/// rebuilt trajectory keeps the gap above `δ` against the leader's unchanged
/// plan.
///
/// The quadratic-in-`T` condition at `t_s` supplies a seed; candidates on a
/// 0.1 s grid up to the seed, then the seed itself, then the grid beyond it
/// are checked with the exact min-gap oracle.
pub fn correct_terminal_time(
    pair: &PairInstance,
    t_s: f64,
    tm_current: f64,
    tm_max: f64,
) -> Result<f64> {
    let verdict = theorem1_condition(pair.l, pair.delta, pair.dv, tm_current)?;
    let passes = |tm: f64| -> Result<bool> {
        let (_, g) = pair.retimed_min_gap(tm_current, tm)?;
        Ok(g >= pair.delta - GAP_TOLERANCE)
    };
    if verdict.holds && passes(tm_current)? {
        return Ok(tm_current);
    }

    let x = pair.l - pair.delta;
    let (t, z) = (t_s, pair.dv);
    let seed = cubic_roots(
        z * t + x,
        -2.0 * z * t * t,
        z * t * t * t - 3.0 * x * t * t,
        2.0 * x * t * t * t,
    )
    .into_iter()
    .find(|&r| r > tm_current + 1e-9 && r <= tm_max);

    let mut k = 1;
    let mut seed_pending = seed;
    loop {
        let grid = tm_current + TERMINAL_TIME_STEP * k as f64;
        let candidate = match seed_pending {
            Some(s) if s <= grid => {
                seed_pending = None;
                s
            }
            _ => {
                k += 1;
                grid
            }
        };
        if candidate > tm_max + 1e-9 {
            break;
        }
        if passes(candidate)? {
            return Ok(candidate);
        }
    }
    if tm_max > tm_current && passes(tm_max)? {
        return Ok(tm_max);
    }
    Err(Error::NoFeasibleTime { max: tm_max })
}

/// Deceleration that restores the safe distance before optimal control
/// takes over.
///
/// Brakes at `u_min`, eased so speed does not drop below `v_min` within the
/// step; no command once the gap is already safe.
pub fn enforce_entry_feasibility(
    state: &VehicleState,
    gap: f64,
    delta: f64,
    lim: &ControlParams,
    dt: f64,
) -> f64 {
    if gap >= delta || state.v <= lim.v_min {
        return 0.0;
    }
    ((lim.v_min - state.v) / dt).clamp(lim.u_min, 0.0)
}

const SRZ_SPEED_TOLERANCE: f64 = 1e-9;

/// Runtime check that two vehicles inside the speed-reduction zone both
/// cruise at the imposed limit, which keeps their gap constant.
pub fn theorem2_check(lead: &VehicleState, follow: &VehicleState, geo: &ZoneGeometry) -> bool {
    let inside = |s: &VehicleState| s.phase == Phase::SpeedReductionZone;
    inside(lead)
        && inside(follow)
        && (lead.v - geo.v_srz).abs() <= SRZ_SPEED_TOLERANCE
        && (follow.v - geo.v_srz).abs() <= SRZ_SPEED_TOLERANCE
}

#[cfg(test)]
mod tests {
    use super::*;

    const DELTA: f64 = 20.22;

    fn geo() -> ZoneGeometry {
        ZoneGeometry::default()
    }

    fn lim() -> ControlParams {
        ControlParams::default()
    }

    #[test]
    fn safe_distance_examples() {
        let sp = SafetyParams::default();
        assert_eq!(safe_distance(0.0, &sp), 1.5);
        assert!((safe_distance(15.6, &sp) - DELTA).abs() < 1e-12);
        assert_eq!(
            safe_distance(10.0, &SafetyParams { c0: 0.0, c1: 1.0 }),
            10.0
        );
    }

    #[test]
    fn terminal_time_examples() {
        let leader = |tm_prev| LeaderInfo {
            tm_prev,
            v_at_tm: 15.6,
            gap_now: 50.0,
            v_now: 20.0,
        };
        let t =
            assign_terminal_time(25.0, Some(&leader(10.0)), DELTA, &geo(), &lim(), None).unwrap();
        assert!((t - 12.0).abs() <= 1e-9, "{t}");

        let t =
            assign_terminal_time(35.0, Some(&leader(20.0)), DELTA, &geo(), &lim(), None).unwrap();
        assert!((t - (20.0 + DELTA / 15.6)).abs() <= 1e-9, "{t}");
        assert!((t - 21.296).abs() < 1e-3);

        let t = assign_terminal_time(25.0, None, DELTA, &geo(), &lim(), Some(19.23)).unwrap();
        assert_eq!(t, 19.23);

        let t = assign_terminal_time(25.0, None, DELTA, &geo(), &lim(), None).unwrap();
        assert!((t - 12.0).abs() < 1e-12);
        // Entry speed outside the limits is clamped.
        let t = assign_terminal_time(5.0, None, DELTA, &geo(), &lim(), None).unwrap();
        assert!((t - 30.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_time_saturates_at_slowest_crossing() {
        let lead = LeaderInfo {
            tm_prev: 100.0,
            v_at_tm: 15.6,
            gap_now: 50.0,
            v_now: 20.0,
        };
        let t = assign_terminal_time(25.0, Some(&lead), DELTA, &geo(), &lim(), None).unwrap();
        assert_eq!(t, 30.0);
    }

    #[test]
    fn certificate_with_zero_slack_needs_nonnegative_dv() {
        for tm in [8.6, 15.0, 30.0] {
            let v = theorem1_condition(DELTA, DELTA, 0.0, tm).unwrap();
            assert!(v.holds);
            assert_eq!(v.margin, 0.0);
            assert!(!theorem1_condition(DELTA, DELTA, -1e-3, tm).unwrap().holds);
        }
    }

    #[test]
    fn certificate_examples_agree_with_oracle() {
        let pair = |l, dv| PairInstance {
            l,
            delta: DELTA,
            dv,
            follower_speed: 20.0,
            control_zone_length: 300.0,
            v_srz: 15.6,
        };
        // Comfortable gap, no speed difference.
        let v = theorem1_condition(50.0, DELTA, 0.0, 15.0).unwrap();
        assert!(v.holds);
        for k in 1..1000 {
            let t = 15.0 * k as f64 / 1000.0;
            assert!(certificate_bound(50.0, DELTA, t, 15.0) < 0.0);
        }
        let (lead, follow) = pair(50.0, 0.0).trajectories(15.0).unwrap();
        assert!(min_gap(&lead, &follow, 0.0, 15.0).1 >= DELTA - GAP_TOLERANCE);

        // Barely above δ and closing fast.
        let v = theorem1_condition(20.3, DELTA, -5.0, 15.0).unwrap();
        let (lead, follow) = pair(20.3, -5.0).trajectories(15.0).unwrap();
        let (_, g) = min_gap(&lead, &follow, 0.0, 15.0);
        assert!(!v.holds);
        assert!(g < DELTA - GAP_TOLERANCE);
    }

    #[test]
    fn maximizer_lands_on_the_terminal_time() {
        // f is increasing on (0, tm], so the tightest point is the end.
        let v = theorem1_condition(60.0, DELTA, -1.0, 20.0).unwrap();
        assert!((v.t_star - 20.0).abs() < 1e-6, "{}", v.t_star);
        let expected = -1.0 + 3.0 * (60.0 - DELTA) / 20.0;
        assert!((v.margin - expected).abs() < 1e-6);
    }

    #[test]
    fn certificate_rejects_gap_below_delta() {
        assert!(matches!(
            theorem1_condition(10.0, DELTA, 0.0, 15.0),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn margin_maps_to_gap_slack() {
        // g(t) - δ = margin(t) · t (tm - t)² / tm² holds at every t.
        let p = PairInstance {
            l: 35.0,
            delta: DELTA,
            dv: -2.5,
            follower_speed: 22.0,
            control_zone_length: 300.0,
            v_srz: 15.6,
        };
        let tm = 14.0;
        let (lead, follow) = p.trajectories(tm).unwrap();
        for k in 1..20 {
            let t = tm * k as f64 / 20.0;
            let slack = lead.state_at(t).0 - follow.state_at(t).0 - DELTA;
            let margin = p.dv - certificate_bound(p.l, DELTA, t, tm);
            assert!((slack - margin_to_gap(margin, t, tm)).abs() < 1e-9);
        }
    }

    #[test]
    fn translated_trajectories_have_constant_gap() {
        let f = solve_coefficients(&BoundaryConditions::new(3.0, 10.0, 20.0, 15.0, 250.0, 15.6))
            .unwrap();
        let l = TrajectoryCoefficients::from_absolute(f.a(), f.b(), f.c(), f.d() + 42.0, 3.0, 15.0);
        let (t, g) = min_gap(&l, &f, 3.0, 15.0);
        assert!((g - 42.0).abs() < 1e-9);
        assert_eq!(t, 3.0);
    }

    #[test]
    fn min_gap_matches_dense_sampling() {
        let l = solve_coefficients(&BoundaryConditions::new(0.0, 30.0, 14.0, 12.0, 330.0, 15.6))
            .unwrap();
        let f = solve_coefficients(&BoundaryConditions::new(0.0, 0.0, 28.0, 12.0, 300.0, 15.6))
            .unwrap();
        let (t, g) = min_gap(&l, &f, 0.0, 12.0);
        let sampled = (0..=120_000)
            .map(|k| k as f64 * 1e-4)
            .map(|t| l.state_at(t).0 - f.state_at(t).0)
            .fold(f64::INFINITY, f64::min);
        assert!(g <= sampled + 1e-12);
        assert!(sampled - g < 1e-6, "{g} vs {sampled}");
        assert!(t > 0.0 && t < 12.0);
    }

    #[test]
    fn piecewise_gap_covers_segment_switch() {
        // Leader cruises from t = 5 on; follower still decelerating.
        let lead = [
            solve_coefficients(&BoundaryConditions::new(0.0, 60.0, 20.0, 5.0, 150.0, 15.6))
                .unwrap(),
            TrajectoryCoefficients::cruise(5.0, 20.0, 150.0, 15.6),
        ];
        let follow =
            [
                solve_coefficients(&BoundaryConditions::new(0.0, 0.0, 22.0, 10.0, 200.0, 15.6))
                    .unwrap(),
            ];
        let (_, g) = min_gap_piecewise(&lead, &follow, 0.0, 10.0);
        let sampled = (0..=10_000)
            .map(|k| k as f64 * 1e-3)
            .map(|t| {
                let lp = if t <= 5.0 {
                    lead[0].state_at(t).0
                } else {
                    lead[1].state_at(t).0
                };
                lp - follow[0].state_at(t).0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((g - sampled).abs() < 1e-4, "{g} vs {sampled}");
    }

    fn failing_pair() -> PairInstance {
        PairInstance {
            l: 40.0,
            delta: DELTA,
            dv: -5.0,
            follower_speed: 25.0,
            control_zone_length: 300.0,
            v_srz: 15.6,
        }
    }

    #[test]
    fn correction_is_a_no_op_when_certified() {
        let p = PairInstance {
            dv: 2.0,
            ..failing_pair()
        };
        let v = theorem1_condition(p.l, p.delta, p.dv, 12.0).unwrap();
        assert!(v.holds);
        assert_eq!(
            correct_terminal_time(&p, v.t_star, 12.0, 30.0).unwrap(),
            12.0
        );
    }

    #[test]
    fn correction_finds_a_safe_later_time() {
        let p = failing_pair();
        let v = theorem1_condition(p.l, p.delta, p.dv, 12.0).unwrap();
        assert!(!v.holds);
        let tm = correct_terminal_time(&p, v.t_star, 12.0, 30.0).unwrap();
        assert!(tm > 12.0);
        let (_, g) = p.retimed_min_gap(12.0, tm).unwrap();
        assert!(g >= DELTA - GAP_TOLERANCE, "{g}");
        // Nothing earlier on the search grid passes.
        let earlier = tm - TERMINAL_TIME_STEP;
        if earlier > 12.0 {
            assert!(p.retimed_min_gap(12.0, earlier).unwrap().1 < DELTA - GAP_TOLERANCE);
        }
    }

    #[test]
    fn correction_saturates() {
        let p = PairInstance {
            l: DELTA,
            dv: -8.0,
            ..failing_pair()
        };
        let v = theorem1_condition(p.l, p.delta, p.dv, 30.0).unwrap();
        assert!(matches!(
            correct_terminal_time(&p, v.t_star, 30.0, 30.0),
            Err(Error::NoFeasibleTime { .. })
        ));
    }

    #[test]
    fn entry_feasibility_commands() {
        let mut s = VehicleState::new(1, 0.0, 1400.0, 20.0, Phase::ControlZone);
        assert_eq!(
            enforce_entry_feasibility(&s, DELTA, DELTA, &lim(), 0.1),
            0.0
        );
        assert_eq!(
            enforce_entry_feasibility(&s, DELTA - 5.0, DELTA, &lim(), 0.1),
            -4.5
        );
        s.v = 10.0;
        assert_eq!(
            enforce_entry_feasibility(&s, DELTA - 5.0, DELTA, &lim(), 0.1),
            0.0
        );
        s.v = 10.2;
        let u = enforce_entry_feasibility(&s, DELTA - 5.0, DELTA, &lim(), 0.1);
        assert!((u + 2.0).abs() < 1e-9);
    }

    #[test]
    fn srz_cruise_check() {
        let g = geo();
        let lead = VehicleState {
            v: 15.6,
            ..VehicleState::new(1, 0.0, 1800.0, 15.6, Phase::SpeedReductionZone)
        };
        let follow = VehicleState::new(2, 0.0, 1800.0 - DELTA, 15.6, Phase::SpeedReductionZone);
        assert!(theorem2_check(&lead, &follow, &g));
        let slow = VehicleState {
            v: 14.6,
            ..lead.clone()
        };
        assert!(!theorem2_check(&slow, &follow, &g));
        let outside = VehicleState {
            phase: Phase::ControlZone,
            ..follow.clone()
        };
        assert!(!theorem2_check(&lead, &outside, &g));

        // Equal speeds keep the gap fixed step after step.
        let (mut pl, mut pf) = (1800.0, 1800.0 - DELTA);
        for _ in 0..100 {
            pl += 15.6 * 0.1;
            pf += 15.6 * 0.1;
            assert!((pl - pf - DELTA).abs() < 1e-9);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn terminal_time_within_window(
                v in 0.0f64..50.0,
                tm_prev in -50.0f64..80.0,
                delta in 1.5f64..60.0,
                has_leader in any::<bool>(),
            ) {
                let lead = LeaderInfo { tm_prev, v_at_tm: 15.6, gap_now: 30.0, v_now: 20.0 };
                let t = assign_terminal_time(v, has_leader.then_some(&lead), delta, &geo(), &lim(), None).unwrap();
                prop_assert!((300.0 / 35.0 - 1e-12..=30.0 + 1e-12).contains(&t));
            }

            #[test]
            fn terminal_time_monotone_in_leader_time(
                v in 10.0f64..35.0,
                a in -50.0f64..80.0,
                b in -50.0f64..80.0,
            ) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let mk = |tm_prev| LeaderInfo { tm_prev, v_at_tm: 15.6, gap_now: 30.0, v_now: 20.0 };
                let t_lo = assign_terminal_time(v, Some(&mk(lo)), DELTA, &geo(), &lim(), None).unwrap();
                let t_hi = assign_terminal_time(v, Some(&mk(hi)), DELTA, &geo(), &lim(), None).unwrap();
                prop_assert!(t_hi >= t_lo);
            }

            #[test]
            fn correction_result_is_certified(
                l in DELTA..DELTA + 60.0,
                dv in -10.0f64..0.0,
                vf in 12.0f64..35.0,
                tm in 300.0f64 / 35.0..25.0,
            ) {
                let p = PairInstance { l, delta: DELTA, dv, follower_speed: vf, control_zone_length: 300.0, v_srz: 15.6 };
                let v = theorem1_condition(l, DELTA, dv, tm).unwrap();
                if let Ok(t) = correct_terminal_time(&p, v.t_star, tm, 30.0) {
                    prop_assert!(t >= tm);
                    let (_, g) = p.retimed_min_gap(tm, t).unwrap();
                    prop_assert!(g >= DELTA - GAP_TOLERANCE);
                }
            }
        }
    }
}
