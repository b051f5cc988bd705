//! Event log, per-step trace and run counters.

use std::fmt;

use serde::Serialize;

use crate::domain::Phase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Admit,
    /// Arrival delayed at the corridor entrance because the gap was short.
    EntryHold,
    Plan,
    /// Planned terminal time later than the queue rule asked for.
    Retime,
    Recertify,
    /// Control-zone entry below the safe distance; braking until restored.
    HoldStart,
    HoldEnd,
    Fallback,
    SrzEntry,
    /// Speed set to the zone limit on entry because the vehicle arrived off it.
    SrzSnap,
    SrzDrift,
    RearEnd,
    Collision,
    Exit,
    Unfinished,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Admit => "admit",
            EventKind::EntryHold => "entry_hold",
            EventKind::Plan => "plan",
            EventKind::Retime => "retime",
            EventKind::Recertify => "recertify",
            EventKind::HoldStart => "hold_start",
            EventKind::HoldEnd => "hold_end",
            EventKind::Fallback => "fallback",
            EventKind::SrzEntry => "srz_entry",
            EventKind::SrzSnap => "srz_snap",
            EventKind::SrzDrift => "srz_drift",
            EventKind::RearEnd => "rear_end",
            EventKind::Collision => "collision",
            EventKind::Exit => "exit",
            EventKind::Unfinished => "unfinished",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One log record, printed as `t,kind,id,detail`.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub id: u64,
    pub detail: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3},{},{},{}", self.t, self.kind, self.id, self.detail)
    }
}

/// One vehicle at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub id: u64,
    pub phase: Phase,
    pub p: f64,
    pub v: f64,
    pub u: f64,
    /// Gap to the leader; `None` for the front vehicle.
    pub gap: Option<f64>,
    pub fuel_rate: f64,
}

impl TraceRow {
    pub const HEADER: &'static str = "t,id,phase,p,v,u,gap,fuel_rate";

    pub fn to_csv_line(&self) -> String {
        let gap = self.gap.map(|g| g.to_string()).unwrap_or_default();
        format!(
            "{:.3},{},{},{},{},{},{},{}",
            self.t, self.id, self.phase, self.p, self.v, self.u, gap, self.fuel_rate
        )
    }
}

/// Counters of one replication.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimStats {
    pub admitted: u64,
    pub exited: u64,
    pub entry_holds: u64,
    pub control_holds: u64,
    pub fallbacks: u64,
    pub retimes: u64,
    pub recertifications: u64,
    pub rear_end_events: u64,
    pub collisions: u64,
    pub srz_drift_events: u64,
    pub srz_snaps: u64,
    pub unfinished: u64,
    /// Smallest `gap - δ` seen on monitored pairs outside holds; infinite
    /// when nothing was monitored.
    pub min_safety_margin: f64,
    /// Largest gap change between consecutive steps for pairs cruising in
    /// the speed-reduction zone.
    pub max_srz_gap_drift: f64,
    /// Largest difference between realized and assigned zone-entry times.
    pub max_terminal_time_error: f64,
}
