//! Library side of the `srz` command: subcommand implementations, output
//! writers and the comparison table.

pub mod table;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use srz_core::fuel_metrics::summarize;
use srz_core::optimal_control::{eval_trajectory, solve_coefficients};
use srz_core::scheduler::{min_gap, theorem1_condition, PairInstance};
use srz_core::sim::{run_replications, ReplicationOutput, SimStats, TraceRow};
use srz_core::{
    validate_config, BoundaryConditions, ControllerKind, Error, MetricsReport, SimConfig,
    VehicleRecord,
};

pub use table::{ComparisonRow, ComparisonTable};

/// A failed subcommand with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InfeasibleVolume { .. } => 2,
            Error::DegenerateHorizon { .. } => 3,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

/// Options shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct GlobalOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub trace: bool,
}

/// Loads the configuration (defaults when no path is given), applies the
/// seed override and validates it.
pub fn load_config(opts: &GlobalOptions) -> Result<SimConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let verdict = validate_config(&cfg);
    if !verdict.is_ok() {
        let list: Vec<String> = verdict
            .violations()
            .iter()
            .map(|v| format!("  {v}"))
            .collect();
        return Err(CliError::usage(format!(
            "invalid configuration:\n{}",
            list.join("\n")
        )));
    }
    Ok(cfg)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::usage("output path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(contents)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub const VEHICLE_CSV_HEADER: &str = "id,t_entry,t_exit,travel_time_s,fuel,min_gap_m,distance_m";
pub const SEGMENT_CSV_HEADER: &str = "id,upstream_s,control_zone_s,srz_s";

pub fn vehicles_csv(rows: &[VehicleRecord]) -> String {
    let mut s = String::from(VEHICLE_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.id, r.t_entry, r.t_exit, r.travel_time_s, r.fuel, r.min_gap_m, r.distance_m
        ));
    }
    s
}

pub fn segments_csv(rows: &[VehicleRecord]) -> String {
    let mut s = String::from(SEGMENT_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let [a, b, c] = r.segment_times_s;
        s.push_str(&format!("{},{a},{b},{c}\n", r.id));
    }
    s
}

fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TraceRow::HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct ReplicationSummary<'a> {
    seed: u64,
    mean_travel_time_s: f64,
    mean_fuel_per_vehicle: f64,
    throughput_vph: f64,
    vehicles: usize,
    stats: &'a SimStats,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    controller: ControllerKind,
    volume_vph: f64,
    seed: u64,
    replications: u32,
    mean_travel_time_s: f64,
    mean_fuel_per_vehicle: f64,
    throughput_vph: f64,
    ci95_travel_time_s: Option<f64>,
    ci95_fuel_per_vehicle: Option<f64>,
    ci95_throughput_vph: Option<f64>,
    per_replication: Vec<ReplicationSummary<'a>>,
}

fn run_summary<'a>(
    cfg: &SimConfig,
    agg: &MetricsReport,
    reps: &'a [ReplicationOutput],
) -> RunSummary<'a> {
    RunSummary {
        controller: cfg.controller,
        volume_vph: cfg.volume,
        seed: cfg.seed,
        replications: agg.replications,
        mean_travel_time_s: agg.mean_travel_time_s,
        mean_fuel_per_vehicle: agg.mean_fuel_per_vehicle,
        throughput_vph: agg.throughput_vph,
        ci95_travel_time_s: agg.ci95_travel_time_s,
        ci95_fuel_per_vehicle: agg.ci95_fuel_per_vehicle,
        ci95_throughput_vph: agg.ci95_throughput_vph,
        per_replication: reps
            .iter()
            .map(|r| ReplicationSummary {
                seed: r.seed,
                mean_travel_time_s: r.report.mean_travel_time_s,
                mean_fuel_per_vehicle: r.report.mean_fuel_per_vehicle,
                throughput_vph: r.report.throughput_vph,
                vehicles: r.report.rows.len(),
                stats: &r.stats,
            })
            .collect(),
    }
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

/// Runs every replication of one scenario and writes, per replication,
/// `vehicles_seed<N>.csv`, `segments_seed<N>.csv`, `events_seed<N>.log` and
/// with tracing `trace_seed<N>.csv`, plus an aggregate `summary.json`.
pub fn cmd_run(opts: &GlobalOptions) -> Result<MetricsReport, CliError> {
    let cfg = load_config(opts)?;
    ensure_dir(&opts.out)?;
    info!(
        "running {} at {} veh/h, {} replications from seed {}",
        cfg.controller, cfg.volume, cfg.replications, cfg.seed
    );
    let reps = run_replications(&cfg, opts.trace)?;
    for r in &reps {
        let file = |stem: &str, ext: &str| opts.out.join(format!("{stem}_seed{}.{ext}", r.seed));
        write_atomic(
            &file("vehicles", "csv"),
            vehicles_csv(&r.report.rows).as_bytes(),
        )?;
        write_atomic(
            &file("segments", "csv"),
            segments_csv(&r.report.rows).as_bytes(),
        )?;
        let log: String = r.events.iter().map(|e| format!("{e}\n")).collect();
        write_atomic(&file("events", "log"), log.as_bytes())?;
        if let Some(trace) = &r.trace {
            write_atomic(&file("trace", "csv"), trace_csv(trace).as_bytes())?;
        }
    }
    let reports: Vec<MetricsReport> = reps.iter().map(|r| r.report.clone()).collect();
    let agg = summarize(&reports);
    write_atomic(
        &opts.out.join("summary.json"),
        &json(&run_summary(&cfg, &agg, &reps)),
    )?;
    Ok(agg)
}

/// Samples the closed-form trajectory at `t0 + k dt` up to `tm` as CSV
/// `t,p,v,u`.
pub fn cmd_plan(bc: &BoundaryConditions, dt: f64) -> Result<String, CliError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::usage(format!(
            "dt must be a positive number, got {dt}"
        )));
    }
    let k = solve_coefficients(bc)?;
    let mut s = String::from("t,p,v,u\n");
    let mut i = 0u64;
    loop {
        let t = bc.t0 + i as f64 * dt;
        if t > bc.tm + 1e-9 {
            break;
        }
        let (p, v, u) = eval_trajectory(&k, t.min(bc.tm))?;
        s.push_str(&format!("{t},{p},{v},{u}\n"));
        i += 1;
    }
    Ok(s)
}

/// Inputs of the `check` subcommand.
#[derive(Clone, Copy, Debug)]
pub struct CheckInput {
    pub l: f64,
    pub delta: f64,
    pub dv: f64,
    pub tm: f64,
    /// Follower entry speed; defaults to the speed that covers the control
    /// zone in `tm`.
    pub follower_speed: Option<f64>,
}

/// Evaluates the rear-end certificate and the exact minimum gap of the
/// rebuilt leader/follower pair. Output is a one-row CSV.
pub fn cmd_check(input: &CheckInput, cfg: &SimConfig) -> Result<String, CliError> {
    let verdict = theorem1_condition(input.l, input.delta, input.dv, input.tm)?;
    let geo = &cfg.geometry;
    let pair = PairInstance {
        l: input.l,
        delta: input.delta,
        dv: input.dv,
        follower_speed: input
            .follower_speed
            .unwrap_or(geo.control_zone_length / input.tm),
        control_zone_length: geo.control_zone_length,
        v_srz: geo.v_srz,
    };
    let (lead, follow) = pair.trajectories(input.tm)?;
    let (t_gap, gap) = min_gap(&lead, &follow, 0.0, input.tm);
    Ok(format!(
        "holds,t_star,margin,min_gap_t,min_gap,gap_holds\n{},{},{},{},{},{}\n",
        verdict.holds,
        verdict.t_star,
        verdict.margin,
        t_gap,
        gap,
        gap >= input.delta
    ))
}

/// Result of a comparison sweep.
pub struct Comparison {
    pub table: ComparisonTable,
    pub summary: String,
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    rows: &'a [ComparisonRow],
    vsl: &'static str,
    seed: u64,
    reported_fuel_reduction_pct: (f64, f64),
    reported_travel_time_reduction_pct: (f64, f64),
}

/// Runs the controller × volume grid with common seeds and writes
/// `comparison.csv`, `comparison.json` and one `cell_<controller>_<volume>.json`
/// per cell.
pub fn cmd_compare(opts: &GlobalOptions) -> Result<Comparison, CliError> {
    let base = load_config(opts)?;
    ensure_dir(&opts.out)?;
    let grid: Vec<(ControllerKind, f64)> = table::VOLUMES
        .iter()
        .flat_map(|&v| ControllerKind::ALL.map(|c| (c, v)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(controller, volume)| {
            let cfg = SimConfig {
                controller,
                volume,
                ..base.clone()
            };
            let reps = run_replications(&cfg, false)?;
            let reports: Vec<MetricsReport> = reps.iter().map(|r| r.report.clone()).collect();
            let agg = summarize(&reports);
            info!(
                "{controller} at {volume} veh/h: {:.2} s, {:.2} fuel",
                agg.mean_travel_time_s, agg.mean_fuel_per_vehicle
            );
            let path = opts.out.join(format!("cell_{controller}_{volume}.json"));
            write_atomic(&path, &json(&run_summary(&cfg, &agg, &reps)))?;
            Ok((controller, volume, agg))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = ComparisonTable::from_cells(&cells);
    let csv = table.to_csv().map_err(|e| CliError::usage(e.to_string()))?;
    write_atomic(&opts.out.join("comparison.csv"), csv.as_bytes())?;
    let doc = ComparisonJson {
        rows: &table.rows,
        vsl: table::VSL_MARKER,
        seed: base.seed,
        reported_fuel_reduction_pct: table::REPORTED_FUEL_BAND,
        reported_travel_time_reduction_pct: table::REPORTED_TRAVEL_TIME_BAND,
    };
    write_atomic(&opts.out.join("comparison.json"), &json(&doc))?;
    let summary = table.summary();
    Ok(Comparison { table, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_rows_cover_horizon() {
        let bc = BoundaryConditions::new(0.0, 0.0, 15.6, 300.0 / 15.6, 300.0, 15.6);
        let out = cmd_plan(&bc, 1.0).unwrap();
        let rows: Vec<&str> = out.lines().skip(1).collect();
        assert_eq!(rows.len(), 20);
        for r in rows {
            let u: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
            assert!(u.abs() < 1e-12);
        }
    }

    #[test]
    fn plan_rejects_bad_step() {
        let bc = BoundaryConditions::new(0.0, 0.0, 20.0, 15.0, 300.0, 15.6);
        assert_eq!(cmd_plan(&bc, 0.0).unwrap_err().code, 1);
        let degenerate = BoundaryConditions::new(0.0, 0.0, 20.0, 0.0, 300.0, 15.6);
        assert_eq!(cmd_plan(&degenerate, 1.0).unwrap_err().code, 3);
    }

    #[test]
    fn error_codes() {
        let e: CliError = Error::InfeasibleVolume {
            mean_headway: 0.1,
            min_headway: 1.0,
        }
        .into();
        assert_eq!(e.code, 2);
        let e: CliError = Error::Config("x".into()).into();
        assert_eq!(e.code, 1);
    }

    #[test]
    fn check_reports_both_sides() {
        let cfg = SimConfig::default();
        let input = CheckInput {
            l: 40.0,
            delta: 20.0,
            dv: 0.0,
            tm: 15.0,
            follower_speed: None,
        };
        let out = cmd_check(&input, &cfg).unwrap();
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[0], "true");
        assert_eq!(row[5], "true");
        let short = CheckInput { l: 10.0, ..input };
        assert_eq!(cmd_check(&short, &cfg).unwrap_err().code, 1);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
