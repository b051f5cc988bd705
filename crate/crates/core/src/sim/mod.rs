//! Deterministic fixed-step single-lane simulator.
//!
//! Vehicles arrive at the corridor entrance on a seeded schedule, follow an
//! intelligent-driver law upstream, are handed to the selected controller in
//! the control zone and cruise at the imposed limit in the speed-reduction
//! zone. Under the optimal controller each vehicle receives its terminal
//! time on control-zone entry, its plan is certified against the leader's
//! known trajectory with the exact min-gap computation, and it then follows
//! the closed form exactly.

mod arrivals;
mod events;

use std::collections::VecDeque;

use rayon::prelude::*;

pub use arrivals::{min_entry_headway, spawn_arrivals, Arrival, ArrivalSchedule, EntrySpeed};
pub use events::{Event, EventKind, SimStats, TraceRow};

use crate::comparators::{
    baseline_accel, spdharm_accel, spdharm_speed, CarFollowingParams, SpdHarmParams,
};
use crate::domain::{ControllerKind, Phase, SimConfig, VehicleState};
use crate::fuel_metrics::{fuel_rate, MetricsReport, VehicleRecord};
use crate::optimal_control::{check_bounds, solve_coefficients, TrajectoryCoefficients};
use crate::scheduler::{
    enforce_entry_feasibility, safe_distance, terminal_time_for_distance, theorem1_condition,
    theorem2_check, LeaderInfo, GAP_TOLERANCE, TERMINAL_TIME_STEP,
};
use crate::{BoundaryConditions, Result};

/// Tolerance below the frozen safe distance that counts as a rear-end event.
pub const REAR_END_TOLERANCE: f64 = 0.01;
/// Relative growth of the safe distance that triggers re-certification.
pub const RECERTIFY_GROWTH: f64 = 1.05;
/// Largest allowed gap change per step for pairs cruising in the zone.
pub const SRZ_DRIFT_TOLERANCE: f64 = 1e-9;
/// How long the simulation keeps running after the demand window to let
/// admitted vehicles leave.
pub const DRAIN_LIMIT: f64 = 7200.0;
/// Remaining distance below which a vehicle no longer starts a new plan.
const PLAN_MIN_DISTANCE: f64 = 1.0;

/// Control-zone status of a vehicle under the optimal controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Not yet handled by the optimal controller.
    Free,
    Planned,
    /// Braking to restore the safe distance after a short-gap entry.
    Hold,
    /// No certified plan available; car-following until one is.
    Fallback,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Plan {
    coeffs: TrajectoryCoefficients,
    tm: f64,
}

/// A vehicle inside the corridor.
#[derive(Clone, Debug)]
pub struct Vehicle {
    pub state: VehicleState,
    pub desired_speed: f64,
    pub t_arrival: f64,
    pub mode: Mode,
    /// Safe distance frozen on control-zone entry.
    pub delta: Option<f64>,
    plan: Option<Plan>,
    /// Bumped whenever the vehicle's predictable future changes.
    version: u64,
    certified_against: Option<(u64, u64)>,
    fuel: f64,
    last_rate: f64,
    min_gap: f64,
    t_cz: Option<f64>,
    t_srz: Option<f64>,
    in_rear_end: bool,
    in_collision: bool,
    prev_srz_gap: Option<f64>,
}

impl Vehicle {
    /// Trajectory the vehicle is committed to from `now` on, if any.
    fn known_future(&self, now: f64, cfg: &SimConfig) -> Option<Vec<TrajectoryCoefficients>> {
        let geo = &cfg.geometry;
        if self.state.phase == Phase::SpeedReductionZone
            && cfg.controller == ControllerKind::Optimal
        {
            return Some(vec![TrajectoryCoefficients::cruise(
                now,
                f64::INFINITY,
                self.state.p,
                geo.v_srz,
            )]);
        }
        let plan = self.plan.filter(|_| self.mode == Mode::Planned)?;
        Some(vec![
            plan.coeffs,
            TrajectoryCoefficients::cruise(plan.tm, f64::INFINITY, geo.srz_start(), geo.v_srz),
        ])
    }

    /// Time this vehicle reached, or is due at, the zone boundary.
    fn terminal_time(&self, now: f64, cfg: &SimConfig) -> Option<f64> {
        let geo = &cfg.geometry;
        match self.state.phase {
            Phase::SpeedReductionZone => Some(now - (self.state.p - geo.srz_start()) / geo.v_srz),
            Phase::ControlZone if self.mode == Mode::Planned => self.plan.map(|p| p.tm),
            _ => None,
        }
    }
}

enum PlanOutcome {
    Planned {
        plan: Plan,
        requested_tm: f64,
        detail: String,
    },
    Hold {
        gap: f64,
    },
    Unplannable(&'static str),
}

/// Rolling upstream speed measurement for speed harmonization.
#[derive(Clone, Debug, Default)]
struct SpeedMonitor {
    samples: VecDeque<(f64, f64, usize)>,
    sum: f64,
    count: usize,
}

impl SpeedMonitor {
    fn push(&mut self, t: f64, sum: f64, count: usize, window: f64) {
        self.samples.push_back((t, sum, count));
        self.sum += sum;
        self.count += count;
        while let Some(&(t0, s, c)) = self.samples.front() {
            if t - t0 < window {
                break;
            }
            self.samples.pop_front();
            self.sum -= s;
            self.count -= c;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Complete state of one replication.
pub struct WorldState {
    pub config: SimConfig,
    pub clock: f64,
    step_index: u64,
    /// Vehicles in the corridor, most downstream first.
    pub queue: Vec<Vehicle>,
    pending: VecDeque<(u64, Arrival)>,
    waiting_logged: Option<u64>,
    pub v_ave_control_zone: f64,
    version_counter: u64,
    monitor: SpeedMonitor,
    pub events: Vec<Event>,
    pub trace: Option<Vec<TraceRow>>,
    pub rows: Vec<VehicleRecord>,
    pub stats: SimStats,
}

/// Result of one replication.
#[derive(Clone, Debug)]
pub struct ReplicationOutput {
    pub seed: u64,
    pub report: MetricsReport,
    pub events: Vec<Event>,
    pub trace: Option<Vec<TraceRow>>,
    pub stats: SimStats,
}

fn crossing_time(t: f64, dt: f64, x: f64, p_prev: f64, p: f64) -> f64 {
    if p > p_prev {
        t + dt * ((x - p_prev) / (p - p_prev)).clamp(0.0, 1.0)
    } else {
        t + dt
    }
}

impl WorldState {
    pub fn new(config: SimConfig, schedule: ArrivalSchedule, trace: bool) -> Self {
        let pending = schedule
            .arrivals
            .into_iter()
            .enumerate()
            .map(|(i, a)| (i as u64, a))
            .collect();
        WorldState {
            v_ave_control_zone: config.geometry.v_srz,
            config,
            clock: 0.0,
            step_index: 0,
            queue: Vec::new(),
            pending,
            waiting_logged: None,
            version_counter: 0,
            monitor: SpeedMonitor::default(),
            events: Vec::new(),
            trace: trace.then(Vec::new),
            rows: Vec::new(),
            stats: SimStats {
                min_safety_margin: f64::INFINITY,
                ..SimStats::default()
            },
        }
    }

    /// Builds the world for `seed` with arrivals drawn from the config.
    pub fn from_config(config: &SimConfig, seed: u64, trace: bool) -> Result<Self> {
        let entry = EntrySpeed {
            mean: config.entry_speed_mean,
            stddev: config.entry_speed_stddev,
            min: config.control.v_min,
            max: config.control.v_max,
        };
        let schedule =
            spawn_arrivals(config.volume, config.duration, seed, &entry, &config.safety)?;
        Ok(Self::new(config.clone(), schedule, trace))
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.pending.is_empty()
    }

    fn log(&mut self, kind: EventKind, id: u64, detail: impl Into<String>) {
        self.events.push(Event {
            t: self.clock,
            kind,
            id,
            detail: detail.into(),
        });
    }

    fn next_version(&mut self) -> u64 {
        self.version_counter += 1;
        self.version_counter
    }

    /// Advances the world by one step of `dt`.
    pub fn step(&mut self) {
        self.admit();
        let cmds = self.commands();
        self.integrate(&cmds);
        self.step_index += 1;
        self.clock = self.step_index as f64 * self.config.dt;
        self.transitions();
        if self.config.controller == ControllerKind::Optimal {
            self.supervise();
        }
        self.monitor_gaps();
        self.record_trace();
    }

    fn admit(&mut self) {
        let Some(&(id, arrival)) = self.pending.front() else {
            return;
        };
        if arrival.t > self.clock + 1e-9 {
            return;
        }
        let cf = &self.config.baseline;
        let (gap, v_admit) = match self.queue.last() {
            None => (f64::INFINITY, arrival.v0),
            Some(tail) => {
                let gap = tail.state.p;
                let v = if gap >= cf.equilibrium_spacing(arrival.v0) {
                    arrival.v0
                } else {
                    arrival.v0.min(tail.state.v)
                };
                (gap, v)
            }
        };
        let delta = safe_distance(v_admit, &self.config.safety);
        if gap < delta {
            if self.waiting_logged != Some(id) {
                self.waiting_logged = Some(id);
                self.stats.entry_holds += 1;
                self.log(
                    EventKind::EntryHold,
                    id,
                    format!("gap={gap:.3} delta={delta:.3}"),
                );
            }
            return;
        }
        self.pending.pop_front();
        let mut state = VehicleState::new(id, self.clock, 0.0, v_admit, Phase::Upstream);
        state.t_entry_corridor = Some(arrival.t);
        let last_rate = fuel_rate(v_admit, 0.0, &self.config.fuel);
        let desired = arrival.v0 + (cf.desired_speed - self.config.entry_speed_mean);
        self.queue.push(Vehicle {
            state,
            desired_speed: desired.max(self.config.control.v_min),
            t_arrival: arrival.t,
            mode: Mode::Free,
            delta: None,
            plan: None,
            version: 0,
            certified_against: None,
            fuel: 0.0,
            last_rate,
            min_gap: f64::INFINITY,
            t_cz: None,
            t_srz: None,
            in_rear_end: false,
            in_collision: false,
            prev_srz_gap: None,
        });
        self.stats.admitted += 1;
        self.log(
            EventKind::Admit,
            id,
            format!("v={v_admit:.3} wait={:.3}", self.clock - arrival.t),
        );
    }

    /// Desired speed of a human-like driver: its own speed, switched to the
    /// zone limit once braking comfortably would just reach it at the zone.
    fn approach_speed(&self, veh: &Vehicle) -> f64 {
        let geo = &self.config.geometry;
        let vs = geo.v_srz;
        let v = veh.state.v;
        let to_go = geo.srz_start() - veh.state.p;
        if veh.desired_speed <= vs {
            return veh.desired_speed;
        }
        let braking = (v * v - vs * vs).max(0.0) / (2.0 * self.config.baseline.comfortable_decel);
        if to_go <= braking {
            vs
        } else {
            veh.desired_speed
        }
    }

    fn idm(&self, i: usize, desired: f64) -> f64 {
        let params: CarFollowingParams = self.config.baseline.with_desired_speed(desired);
        let leader = i.checked_sub(1).map(|j| &self.queue[j].state);
        baseline_accel(&self.queue[i].state, leader, &params, &self.config.control)
    }

    /// Acceleration commands for vehicles integrated with Euler steps;
    /// `None` for vehicles that follow their plan or the zone cruise exactly.
    fn commands(&mut self) -> Vec<Option<f64>> {
        let cfg = &self.config;
        let geo = cfg.geometry;
        let optimal = cfg.controller == ControllerKind::Optimal;

        let s_m = if cfg.controller == ControllerKind::SpdHarm {
            let lo = geo.control_zone_start() - cfg.spdharm.measurement_length;
            let (sum, count) = self
                .queue
                .iter()
                .filter(|v| v.state.p >= lo && v.state.p < geo.control_zone_start())
                .fold((0.0, 0), |(s, c), v| (s + v.state.v, c + 1));
            let window = cfg.spdharm.measurement_window;
            self.monitor.push(self.clock, sum, count, window);
            self.monitor.mean().unwrap_or(cfg.entry_speed_mean)
        } else {
            0.0
        };

        (0..self.queue.len())
            .map(|i| {
                let veh = &self.queue[i];
                match veh.state.phase {
                    Phase::Upstream => Some(self.idm(i, veh.desired_speed)),
                    Phase::ControlZone => match cfg.controller {
                        ControllerKind::Optimal => match veh.mode {
                            Mode::Planned => None,
                            Mode::Hold => {
                                let gap = i
                                    .checked_sub(1)
                                    .map_or(f64::INFINITY, |j| self.queue[j].state.p - veh.state.p);
                                let delta = veh.delta.unwrap_or(0.0);
                                let brake = enforce_entry_feasibility(
                                    &veh.state,
                                    gap,
                                    delta,
                                    &cfg.control,
                                    cfg.dt,
                                );
                                Some(brake.min(self.idm(i, self.approach_speed(veh))))
                            }
                            Mode::Free | Mode::Fallback => {
                                Some(self.idm(i, self.approach_speed(veh)))
                            }
                        },
                        ControllerKind::Baseline => Some(self.idm(i, self.approach_speed(veh))),
                        ControllerKind::SpdHarm => {
                            let params = SpdHarmParams {
                                s_m,
                                s_n: geo.v_srz,
                                dx_mn: geo.control_zone_length,
                                measurement_window: cfg.spdharm.measurement_window,
                            };
                            let x_rel = veh.state.p - geo.control_zone_start();
                            let cmd = spdharm_speed(x_rel, &params, &cfg.control);
                            let track = spdharm_accel(
                                veh.state.v,
                                cmd,
                                &cfg.control,
                                cfg.dt,
                                cfg.spdharm.tracking_time,
                            );
                            Some(track.min(self.idm(i, veh.desired_speed)))
                        }
                    },
                    Phase::SpeedReductionZone if optimal => None,
                    Phase::SpeedReductionZone => {
                        let params = cfg.baseline.in_reduced_zone(geo.v_srz);
                        let leader = i.checked_sub(1).map(|j| &self.queue[j].state);
                        Some(baseline_accel(&veh.state, leader, &params, &cfg.control))
                    }
                    Phase::Exited => Some(0.0),
                }
            })
            .collect()
    }

    fn integrate(&mut self, cmds: &[Option<f64>]) {
        let dt = self.config.dt;
        let t_next = (self.step_index + 1) as f64 * dt;
        let geo = self.config.geometry;
        for (veh, cmd) in self.queue.iter_mut().zip(cmds) {
            let s = &mut veh.state;
            let p_prev = s.p;
            match cmd {
                Some(u) => {
                    let v = (s.v + u * dt).max(0.0);
                    s.u = (v - s.v) / dt;
                    s.v = v;
                    s.p += v * dt;
                }
                None => match veh
                    .plan
                    .filter(|_| veh.mode == Mode::Planned && s.phase == Phase::ControlZone)
                {
                    Some(plan) if t_next < plan.tm => {
                        let (p, v, u) = plan.coeffs.state_at(t_next);
                        (s.p, s.v, s.u) = (p, v, u);
                    }
                    Some(plan) => {
                        s.p = geo.srz_start() + geo.v_srz * (t_next - plan.tm);
                        s.v = geo.v_srz;
                        s.u = 0.0;
                    }
                    None => {
                        s.v = geo.v_srz;
                        s.u = 0.0;
                        s.p += geo.v_srz * dt;
                    }
                },
            }
            s.t = t_next;
            let rate = fuel_rate(s.v, s.u, &self.config.fuel);
            let end = geo.corridor_end();
            let share = if s.p > end && s.p > p_prev {
                ((end - p_prev) / (s.p - p_prev)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            veh.fuel += share * 0.5 * (veh.last_rate + rate) * dt;
            veh.last_rate = rate;
        }
    }

    fn transitions(&mut self) {
        let geo = self.config.geometry;
        let dt = self.config.dt;
        let t_prev = self.clock - dt;
        let optimal = self.config.controller == ControllerKind::Optimal;
        let mut exited = 0;
        for i in 0..self.queue.len() {
            let phase = geo.phase_at(self.queue[i].state.p);
            let old = self.queue[i].state.phase;
            if phase == old {
                continue;
            }
            let p = self.queue[i].state.p;
            let p_prev = p - self.queue[i].state.v * dt;
            let id = self.queue[i].state.id;
            if old == Phase::Upstream {
                self.queue[i].t_cz = Some(crossing_time(
                    t_prev,
                    dt,
                    geo.control_zone_start(),
                    p_prev,
                    p,
                ));
                self.queue[i].state.t0 = Some(self.clock);
                if optimal {
                    let v_ave = self.control_zone_mean_speed();
                    self.queue[i].delta = Some(safe_distance(v_ave, &self.config.safety));
                }
            }
            if old != Phase::SpeedReductionZone
                && matches!(phase, Phase::SpeedReductionZone | Phase::Exited)
            {
                self.enter_srz(i, t_prev, p_prev);
            }
            self.queue[i].state.phase = phase;
            if phase == Phase::Exited {
                let veh = &self.queue[i];
                let t_exit = crossing_time(t_prev, dt, geo.corridor_end(), p_prev, p);
                let t_cz = veh.t_cz.unwrap_or(t_exit);
                let t_srz = veh.t_srz.unwrap_or(t_exit);
                let record = VehicleRecord {
                    id,
                    t_entry: veh.t_arrival,
                    t_exit,
                    travel_time_s: t_exit - veh.t_arrival,
                    fuel: veh.fuel,
                    min_gap_m: veh.min_gap,
                    distance_m: geo.corridor_end(),
                    segment_times_s: [t_cz - veh.t_arrival, t_srz - t_cz, t_exit - t_srz],
                };
                self.log(
                    EventKind::Exit,
                    id,
                    format!(
                        "travel_time={:.3} fuel={:.4}",
                        record.travel_time_s, record.fuel
                    ),
                );
                self.rows.push(record);
                self.stats.exited += 1;
                exited += 1;
            }
        }
        // Only the front of the queue can leave.
        self.queue.drain(..exited);
    }

    fn enter_srz(&mut self, i: usize, t_prev: f64, p_prev: f64) {
        let geo = self.config.geometry;
        let dt = self.config.dt;
        let optimal = self.config.controller == ControllerKind::Optimal;
        let veh = &self.queue[i];
        let id = veh.state.id;
        let planned = veh.mode == Mode::Planned;
        let t_srz = match veh.plan {
            Some(plan) if planned => plan.tm,
            _ => crossing_time(t_prev, dt, geo.srz_start(), p_prev, veh.state.p),
        };
        self.queue[i].t_srz = Some(t_srz);
        self.queue[i].state.tf = None;
        if planned {
            let err = (self.clock - t_srz).abs().min((t_srz - t_prev).abs());
            self.stats.max_terminal_time_error = self.stats.max_terminal_time_error.max(err);
            self.log(EventKind::SrzEntry, id, format!("assigned={t_srz:.3}"));
            return;
        }
        if optimal {
            let v = self.queue[i].state.v;
            if (v - geo.v_srz).abs() > 1e-9 {
                self.stats.srz_snaps += 1;
                self.log(EventKind::SrzSnap, id, format!("v={v:.3}"));
            }
            let version = self.next_version();
            let veh = &mut self.queue[i];
            veh.state.v = geo.v_srz;
            veh.state.u = 0.0;
            veh.version = version;
            veh.mode = Mode::Free;
        }
        self.log(EventKind::SrzEntry, id, "unplanned");
    }

    fn control_zone_mean_speed(&self) -> f64 {
        let (sum, n) = self
            .queue
            .iter()
            .filter(|v| v.state.phase == Phase::ControlZone)
            .fold((0.0, 0usize), |(s, n), v| (s + v.state.v, n + 1));
        if n == 0 {
            self.config.geometry.v_srz
        } else {
            sum / n as f64
        }
    }

    /// Optimal-controller bookkeeping after the move: planning on entry,
    /// re-certification when the leader or the safe distance changed, and
    /// retries for held or fallback vehicles.
    fn supervise(&mut self) {
        self.v_ave_control_zone = self.control_zone_mean_speed();
        let delta_now = safe_distance(self.v_ave_control_zone, &self.config.safety);
        for i in 0..self.queue.len() {
            if self.queue[i].state.phase != Phase::ControlZone {
                continue;
            }
            let id = self.queue[i].state.id;
            let Some(mut delta) = self.queue[i].delta else {
                continue;
            };
            let mut recertify = false;
            if delta_now > RECERTIFY_GROWTH * delta {
                delta = delta_now;
                self.queue[i].delta = Some(delta);
                recertify = true;
            }
            let leader_key = i
                .checked_sub(1)
                .map(|j| (self.queue[j].state.id, self.queue[j].version));
            if self.queue[i].mode == Mode::Planned {
                if !recertify && self.queue[i].certified_against == leader_key {
                    continue;
                }
                if leader_key.is_none() && !recertify {
                    // The leader left the corridor; fewer constraints.
                    self.queue[i].certified_against = None;
                    continue;
                }
                self.stats.recertifications += 1;
                if self.certify_current(i, delta) {
                    self.queue[i].certified_against = leader_key;
                    self.log(EventKind::Recertify, id, format!("kept delta={delta:.3}"));
                    continue;
                }
                self.log(EventKind::Recertify, id, format!("failed delta={delta:.3}"));
            }
            let outcome = self.attempt_plan(i, delta);
            self.apply_outcome(i, outcome, leader_key);
        }
    }

    /// Whether the vehicle's current plan still clears its leader.
    fn certify_current(&self, i: usize, delta: f64) -> bool {
        let veh = &self.queue[i];
        let Some(plan) = veh.plan else {
            return false;
        };
        let Some(lead) = i.checked_sub(1).map(|j| &self.queue[j]) else {
            return true;
        };
        let Some(lead_segs) = lead.known_future(self.clock, &self.config) else {
            return false;
        };
        let geo = &self.config.geometry;
        let mine = [
            plan.coeffs,
            TrajectoryCoefficients::cruise(plan.tm, f64::INFINITY, geo.srz_start(), geo.v_srz),
        ];
        let lead_tm = lead_segs.last().map_or(self.clock, |s| s.valid_from());
        let end = plan.tm.max(lead_tm).max(self.clock);
        let (_, g) = crate::scheduler::min_gap_piecewise(&lead_segs, &mine, self.clock, end);
        g >= delta - GAP_TOLERANCE
    }

    fn attempt_plan(&self, i: usize, delta: f64) -> PlanOutcome {
        let cfg = &self.config;
        let geo = &cfg.geometry;
        let lim = &cfg.control;
        let now = self.clock;
        let me = &self.queue[i].state;
        let dist = geo.srz_start() - me.p;
        if dist < PLAN_MIN_DISTANCE {
            return PlanOutcome::Unplannable("too close to the zone");
        }
        let lead = i.checked_sub(1).map(|j| &self.queue[j]);
        let (leader_info, lead_segs, lead_tm) = match lead {
            None => (None, None, now),
            Some(l) => {
                let gap = l.state.p - me.p;
                if gap < delta {
                    return PlanOutcome::Hold { gap };
                }
                let (Some(tm_l), Some(segs)) =
                    (l.terminal_time(now, cfg), l.known_future(now, cfg))
                else {
                    return PlanOutcome::Unplannable("leader has no committed trajectory");
                };
                let info = LeaderInfo {
                    tm_prev: tm_l - now,
                    v_at_tm: geo.v_srz,
                    gap_now: gap,
                    v_now: l.state.v,
                };
                (Some(info), Some(segs), tm_l)
            }
        };
        let Ok(requested) =
            terminal_time_for_distance(dist, me.v, leader_info.as_ref(), delta, lim, None)
        else {
            return PlanOutcome::Unplannable("terminal time outside the feasible window");
        };
        let slowest = dist / lim.v_min;
        let verdict = leader_info.and_then(|info| {
            theorem1_condition(info.gap_now, delta, info.v_now - me.v, requested).ok()
        });

        let mut k = 0u32;
        loop {
            let tm_rel = (requested + TERMINAL_TIME_STEP * k as f64).min(slowest);
            let tm = now + tm_rel;
            if let Ok(coeffs) = solve_coefficients(&BoundaryConditions::new(
                now,
                me.p,
                me.v,
                tm,
                geo.srz_start(),
                geo.v_srz,
            )) {
                let within_bounds = check_bounds(&coeffs, lim).is_empty();
                let clear = within_bounds
                    && lead_segs.as_ref().is_none_or(|segs| {
                        let mine = [
                            coeffs,
                            TrajectoryCoefficients::cruise(
                                tm,
                                f64::INFINITY,
                                geo.srz_start(),
                                geo.v_srz,
                            ),
                        ];
                        let end = tm.max(lead_tm);
                        crate::scheduler::min_gap_piecewise(segs, &mine, now, end).1
                            >= delta - GAP_TOLERANCE
                    });
                if clear {
                    let detail = match verdict {
                        Some(v) => format!(
                            "tm={tm:.3} requested={:.3} delta={delta:.3} certificate={} margin={:.4}",
                            now + requested,
                            v.holds,
                            v.margin
                        ),
                        None => format!("tm={tm:.3} requested={:.3} delta={delta:.3}", now + requested),
                    };
                    return PlanOutcome::Planned {
                        plan: Plan { coeffs, tm },
                        requested_tm: now + requested,
                        detail,
                    };
                }
            }
            if tm_rel >= slowest {
                return PlanOutcome::Unplannable("no admissible terminal time");
            }
            k += 1;
        }
    }

    fn apply_outcome(&mut self, i: usize, outcome: PlanOutcome, leader_key: Option<(u64, u64)>) {
        let id = self.queue[i].state.id;
        let was = self.queue[i].mode;
        if was == Mode::Hold && !matches!(outcome, PlanOutcome::Hold { .. }) {
            self.log(EventKind::HoldEnd, id, "");
        }
        match outcome {
            PlanOutcome::Planned {
                plan,
                requested_tm,
                detail,
            } => {
                let version = self.next_version();
                let veh = &mut self.queue[i];
                veh.plan = Some(plan);
                veh.mode = Mode::Planned;
                veh.version = version;
                veh.certified_against = leader_key;
                veh.state.tm = Some(plan.tm);
                if plan.tm > requested_tm + 1e-9 {
                    self.stats.retimes += 1;
                    self.log(EventKind::Retime, id, detail);
                } else {
                    self.log(EventKind::Plan, id, detail);
                }
            }
            PlanOutcome::Hold { gap } => {
                if was != Mode::Hold {
                    self.stats.control_holds += 1;
                    let delta = self.queue[i].delta.unwrap_or(0.0);
                    self.log(
                        EventKind::HoldStart,
                        id,
                        format!("gap={gap:.3} delta={delta:.3}"),
                    );
                }
                self.set_unplanned(i, Mode::Hold);
            }
            PlanOutcome::Unplannable(reason) => {
                if was != Mode::Fallback {
                    self.stats.fallbacks += 1;
                    self.log(EventKind::Fallback, id, reason);
                }
                self.set_unplanned(i, Mode::Fallback);
            }
        }
    }

    fn set_unplanned(&mut self, i: usize, mode: Mode) {
        if self.queue[i].mode == Mode::Planned || self.queue[i].plan.is_some() {
            let version = self.next_version();
            self.queue[i].version = version;
        }
        let veh = &mut self.queue[i];
        veh.mode = mode;
        veh.plan = None;
        veh.state.tm = None;
    }

    fn monitor_gaps(&mut self) {
        let optimal = self.config.controller == ControllerKind::Optimal;
        let geo = self.config.geometry;
        for i in 1..self.queue.len() {
            let (head, tail) = self.queue.split_at_mut(i);
            let lead = &head[i - 1];
            let veh = &mut tail[0];
            let gap = lead.state.p - veh.state.p;
            veh.min_gap = veh.min_gap.min(gap);
            let id = veh.state.id;

            let colliding = gap <= 0.0;
            let new_collision = colliding && !veh.in_collision;
            veh.in_collision = colliding;

            let mut new_rear_end = None;
            let mut drift = None;
            let mut srz_violation = false;
            if optimal {
                if let Some(delta) = veh.delta.filter(|_| veh.mode != Mode::Hold) {
                    self.stats.min_safety_margin = self.stats.min_safety_margin.min(gap - delta);
                    let violating = gap < delta - REAR_END_TOLERANCE;
                    if violating && !veh.in_rear_end {
                        new_rear_end = Some(delta);
                    }
                    veh.in_rear_end = violating;
                }
                if lead.state.phase == Phase::SpeedReductionZone
                    && veh.state.phase == Phase::SpeedReductionZone
                {
                    srz_violation = !theorem2_check(&lead.state, &veh.state, &geo);
                    if let Some(prev) = veh.prev_srz_gap {
                        let d = (gap - prev).abs();
                        self.stats.max_srz_gap_drift = self.stats.max_srz_gap_drift.max(d);
                        if d > SRZ_DRIFT_TOLERANCE {
                            drift = Some(d);
                        }
                    }
                    veh.prev_srz_gap = Some(gap);
                } else {
                    veh.prev_srz_gap = None;
                }
            }

            if new_collision {
                self.stats.collisions += 1;
                self.log(EventKind::Collision, id, format!("gap={gap:.4}"));
            }
            if let Some(delta) = new_rear_end {
                self.stats.rear_end_events += 1;
                self.log(
                    EventKind::RearEnd,
                    id,
                    format!("gap={gap:.4} delta={delta:.4}"),
                );
            }
            if drift.is_some() || srz_violation {
                self.stats.srz_drift_events += 1;
                self.log(
                    EventKind::SrzDrift,
                    id,
                    format!("drift={:e}", drift.unwrap_or(0.0)),
                );
            }
        }
    }

    fn record_trace(&mut self) {
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        for (i, veh) in self.queue.iter().enumerate() {
            let gap = i
                .checked_sub(1)
                .map(|j| self.queue[j].state.p - veh.state.p);
            trace.push(TraceRow {
                t: self.clock,
                id: veh.state.id,
                phase: veh.state.phase,
                p: veh.state.p,
                v: veh.state.v,
                u: veh.state.u,
                gap,
                fuel_rate: veh.last_rate,
            });
        }
    }

    /// Steps through the demand window, then until every admitted vehicle
    /// has left or the drain limit is reached.
    pub fn run_to_completion(&mut self) {
        let duration = self.config.duration;
        let dt = self.config.dt;
        let steps = (duration / dt).round() as u64;
        while self.step_index < steps {
            self.step();
        }
        let limit = ((duration + DRAIN_LIMIT) / dt).round() as u64;
        while !self.is_idle() && self.step_index < limit {
            self.step();
        }
        let left: Vec<u64> = self
            .queue
            .iter()
            .map(|v| v.state.id)
            .chain(self.pending.iter().map(|(id, _)| *id))
            .collect();
        for id in left {
            self.stats.unfinished += 1;
            self.log(EventKind::Unfinished, id, "");
        }
    }

    /// Metrics over the vehicles that completed the corridor.
    pub fn report(&self) -> MetricsReport {
        MetricsReport::from_rows(self.rows.clone(), self.config.duration)
    }
}

/// Runs one replication with the given seed.
pub fn run_replication(config: &SimConfig, seed: u64, trace: bool) -> Result<ReplicationOutput> {
    let mut world = WorldState::from_config(config, seed, trace)?;
    world.run_to_completion();
    let report = world.report();
    log::debug!(
        "{} volume={} seed={seed}: {} vehicles, mean travel time {:.2} s",
        config.controller.as_str(),
        config.volume,
        report.rows.len(),
        report.mean_travel_time_s
    );
    Ok(ReplicationOutput {
        seed,
        report,
        events: world.events,
        trace: world.trace,
        stats: world.stats,
    })
}

/// Metrics of one replication using `config.seed`.
pub fn run_scenario(config: &SimConfig) -> Result<MetricsReport> {
    Ok(run_replication(config, config.seed, false)?.report)
}

/// All replications of a scenario, seeded `seed, seed + 1, ...`, in order.
pub fn run_replications(config: &SimConfig, trace: bool) -> Result<Vec<ReplicationOutput>> {
    (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(config, config.seed.wrapping_add(u64::from(i)), trace))
        .collect()
}
