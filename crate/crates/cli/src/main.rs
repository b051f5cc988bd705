use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use srz_cli::{
    cmd_check, cmd_compare, cmd_plan, cmd_run, load_config, CheckInput, CliError, GlobalOptions,
};
use srz_core::BoundaryConditions;

/// Energy-optimal speed control ahead of a freeway speed-reduction zone.
#[derive(Parser)]
#[command(name = "srz", version)]
struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Also write per-step trajectories.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all replications of the configured scenario.
    Run,
    /// Print the optimal trajectory between two boundary states as CSV.
    #[command(allow_negative_numbers = true)]
    Plan {
        t0: f64,
        p0: f64,
        v0: f64,
        tm: f64,
        pm: f64,
        vm: f64,
        dt: f64,
    },
    /// Evaluate the rear-end safety certificate for one leader/follower pair.
    #[command(allow_negative_numbers = true)]
    Check {
        /// Initial gap, m.
        l: f64,
        /// Safe distance, m.
        delta: f64,
        /// Leader speed minus follower speed, m/s.
        dv: f64,
        /// Time to the zone boundary, s.
        tm: f64,
        #[arg(long)]
        follower_speed: Option<f64>,
    },
    /// Sweep controllers × volumes and write the comparison table.
    Compare,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = GlobalOptions {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        trace: cli.trace,
    };
    let mut stdout = std::io::stdout().lock();
    let mut print = |s: &str| {
        stdout
            .write_all(s.as_bytes())
            .map_err(|e| CliError::usage(format!("stdout: {e}")))
    };
    match cli.command {
        Command::Run => {
            let r = cmd_run(&opts)?;
            print(&format!(
                "vehicles {}, mean travel time {:.2} s, mean fuel {:.2}, throughput {:.1} veh/h\n",
                r.rows.len(),
                r.mean_travel_time_s,
                r.mean_fuel_per_vehicle,
                r.throughput_vph
            ))
        }
        Command::Plan {
            t0,
            p0,
            v0,
            tm,
            pm,
            vm,
            dt,
        } => print(&cmd_plan(
            &BoundaryConditions::new(t0, p0, v0, tm, pm, vm),
            dt,
        )?),
        Command::Check {
            l,
            delta,
            dv,
            tm,
            follower_speed,
        } => {
            let cfg = load_config(&opts)?;
            print(&cmd_check(
                &CheckInput {
                    l,
                    delta,
                    dv,
                    tm,
                    follower_speed,
                },
                &cfg,
            )?)
        }
        Command::Compare => print(&cmd_compare(&opts)?.summary),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SRZ_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
