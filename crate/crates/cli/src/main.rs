//! `mpsched` — plan and validate deadline-constrained multipath schedules.
//!
//! Subcommands: `solve` (optimal traffic split), `timeouts` (retransmission
//! timers), `simulate` (event-driven validation), `sweep` (sensitivity
//! curves), `bench` (solver timing). Exit codes: 0 success, 1 bad
//! configuration or usage, 2 infeasible constraints, 3 internal error.

mod commands;
mod config;
mod error;
mod render;

use clap::{Parser, Subcommand, ValueEnum};
use commands::SweepKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mpsched", version, about = "deadline-constrained multipath scheduling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the optimal packet-to-path-combination assignment.
    Solve {
        /// Scenario file (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Override the number of transmission attempts per packet.
        #[arg(long)]
        attempts: Option<usize>,
        /// Minimize cost subject to this quality floor instead of
        /// maximizing quality (fixed-delay scenarios only).
        #[arg(long)]
        min_quality: Option<f64>,
        /// Also write the full assignment to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compute retransmission timers for every ordered path pair.
    Timeouts {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay the planned assignment through the event-driven simulator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        attempts: Option<usize>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-plan and re-simulate across a range of one scenario parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Which parameter to vary.
        #[arg(long, value_enum)]
        axis: SweepAxisArg,
        /// Points to evaluate: rates in Mbit/s for lambda, lifetimes in ms
        /// for delta, multiplicative factors for the error axes.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time the solver over a grid of synthetic network sizes.
    Bench {
        /// Largest path count, discard path included.
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        /// Largest number of transmission attempts.
        #[arg(long, default_value_t = 3)]
        m_max: usize,
        /// Timed solves per grid point.
        #[arg(long, default_value_t = 100)]
        repeats: u32,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAxisArg {
    /// Offered data rate.
    Lambda,
    /// Packet lifetime.
    Delta,
    /// Planner bandwidth misestimation factor.
    #[value(name = "bandwidth_err")]
    BandwidthErr,
    /// Planner delay misestimation factor.
    #[value(name = "delay_err")]
    DelayErr,
    /// Planner loss misestimation factor.
    #[value(name = "loss_err")]
    LossErr,
}

impl From<SweepAxisArg> for SweepKind {
    fn from(a: SweepAxisArg) -> Self {
        match a {
            SweepAxisArg::Lambda => SweepKind::Lambda,
            SweepAxisArg::Delta => SweepKind::Delta,
            SweepAxisArg::BandwidthErr => SweepKind::BandwidthErr,
            SweepAxisArg::DelayErr => SweepKind::DelayErr,
            SweepAxisArg::LossErr => SweepKind::LossErr,
        }
    }
}

fn main() -> ExitCode {
    // die silently when the reader of a pipe goes away (`mpsched ... | head`),
    // as line-oriented tools are expected to
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here too; only real usage
            // errors report failure
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve { config, attempts, min_quality, csv } => {
            commands::cmd_solve(&config, attempts, min_quality, csv.as_ref())
        }
        Command::Timeouts { config, attempts, csv } => {
            commands::cmd_timeouts(&config, attempts, csv.as_ref())
        }
        Command::Simulate { config, attempts, seed, csv } => {
            commands::cmd_simulate(&config, attempts, seed, csv.as_ref())
        }
        Command::Sweep { config, attempts, seed, axis, values, csv } => {
            commands::cmd_sweep(&config, attempts, seed, axis.into(), &values, csv.as_ref())
        }
        Command::Bench { n_max, m_max, repeats, csv } => {
            commands::cmd_bench(n_max, m_max, repeats, csv.as_ref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
