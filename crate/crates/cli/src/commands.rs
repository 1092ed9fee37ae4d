//! The five workflows behind the subcommands. Every run starts from a
//! [`ScenarioConfig`] (except `bench`, which generates its own instances),
//! prints a human-readable account, and optionally mirrors the numbers into
//! a CSV file.

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::render::{ratio, write_csv};
use mpsched_core::{
    build_cost_lp, build_quality_lp, build_quality_lp_restricted, simulate, solve, Combination,
    LpProblem, Network, Sense, SimConfig, Solution, SolutionStatus, SolverConfig, StochasticModel,
    SweepAxis, TimeoutTable, Workload,
};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combo_label(index: usize, n: usize, attempts: usize) -> String {
    let combo = Combination::from_flat(index, n, attempts);
    combo
        .paths()
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn check_status(sol: &Solution) -> Result<(), CliError> {
    match sol.status {
        SolutionStatus::Optimal => Ok(()),
        SolutionStatus::Infeasible => Err(CliError::Infeasible(
            "no assignment satisfies the requested constraints".into(),
        )),
        SolutionStatus::Unbounded => {
            Err(CliError::Internal("assignment problem is unbounded".into()))
        }
    }
}

/// The solved problem plus everything needed to report it: the per-path send
/// rates, the delivery column, and which objective row means what.
struct SolvedScenario {
    lp: LpProblem,
    sol: Solution,
    quality: f64,
    cost: f64,
    delivery: Vec<f64>,
    timers: Option<TimeoutTable>,
}

fn solve_scenario(
    cfg: &ScenarioConfig,
    model: &Network,
    wl: &Workload,
    min_quality: Option<f64>,
) -> Result<SolvedScenario, CliError> {
    let n = model.n_paths();
    let (lp, timers) = if let Some(floor) = min_quality {
        if cfg.has_gamma_model() {
            return Err(CliError::Config(
                "a quality floor is only supported with fixed delays".into(),
            ));
        }
        (build_cost_lp(model, wl, floor)?, None)
    } else if cfg.has_gamma_model() {
        let smodel = StochasticModel::new(model)?;
        let timers = smodel.timeout_table(wl)?;
        (smodel.quality_lp(wl, &timers)?, Some(timers))
    } else {
        (build_quality_lp(model, wl)?, None)
    };
    let sol = solve(&lp, &SolverConfig::default())?;
    check_status(&sol)?;

    // Rows 0..n are per-path traffic in both problem shapes; what the last
    // row and the objective mean depends on the direction of optimization.
    let (quality, cost, delivery) = match lp.sense {
        Sense::Maximize => (
            sol.objective_value,
            dot(&lp.ineq[n], &sol.x),
            lp.objective.clone(),
        ),
        Sense::Minimize => {
            let p: Vec<f64> = lp.ineq[n].iter().map(|v| -v).collect();
            (dot(&p, &sol.x), sol.objective_value, p)
        }
    };
    Ok(SolvedScenario { lp, sol, quality, cost, delivery, timers })
}

pub fn cmd_solve(
    config: &Path,
    attempts: Option<usize>,
    min_quality: Option<f64>,
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let wl = cfg.workload();
    let model = cfg.model_network(attempts)?.augment_blackhole(&wl)?;
    let solved = solve_scenario(&cfg, &model, &wl, min_quality)?;
    let n = model.n_paths();
    let m = model.attempts();

    println!(
        "network: {} paths + discard, {} attempts, {} combinations",
        n - 1,
        m,
        model.combo_count()
    );
    if let Some(floor) = min_quality {
        println!("objective: minimize cost subject to quality >= {floor}");
    } else {
        println!("objective: maximize quality");
    }
    println!("status: optimal");
    println!("assignment (first-second attempt paths, 0 = discard):");
    for (l, &share) in solved.sol.x.iter().enumerate() {
        if share > 0.0 {
            println!("  [{}] {}", combo_label(l, n, m), ratio(share));
        }
    }
    println!(
        "quality Q: {:.6} ({:.4}%)",
        solved.quality,
        solved.quality * 100.0
    );
    println!("cost C: {:.6} per second", solved.cost);
    println!("sent rate per path:");
    for i in 0..n {
        let s = dot(&solved.lp.ineq[i], &solved.sol.x);
        let name = if model.paths()[i].is_blackhole() {
            format!("{i} (discard)")
        } else {
            i.to_string()
        };
        println!("  path {name}: {:.3} Mbit/s", s / 1e6);
    }

    if let Some(path) = csv {
        let rows: Vec<Vec<String>> = (0..model.combo_count())
            .map(|l| {
                vec![
                    combo_label(l, n, m),
                    format!("{:.12}", solved.sol.x[l]),
                    format!("{:.12}", solved.delivery[l]),
                ]
            })
            .collect();
        write_csv(path, &["combo", "share", "delivery_prob"], &rows)?;
    }
    Ok(())
}

pub fn cmd_timeouts(
    config: &Path,
    attempts: Option<usize>,
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let wl = cfg.workload();
    let model = cfg.model_network(attempts)?.augment_blackhole(&wl)?;
    let timers = if cfg.has_gamma_model() {
        StochasticModel::new(&model)?.timeout_table(&wl)?
    } else {
        TimeoutTable::fixed(&model, cfg.guard_s())?
    };
    let n = model.n_paths();

    println!("retransmission timers (path 0 = discard):");
    println!("  first second status     lo_ms     hi_ms    chosen_ms");
    let mut rows = Vec::new();
    for first in 0..n {
        for second in 0..n {
            match timers.entry(first, second).plateau() {
                Some(p) => {
                    println!(
                        "  {first:<5} {second:<6} feasible   {:>8.1} {:>9.1} {:>9.1}",
                        p.lo_s * 1e3,
                        p.hi_s * 1e3,
                        p.chosen_s * 1e3
                    );
                    rows.push(vec![
                        first.to_string(),
                        second.to_string(),
                        "feasible".into(),
                        format!("{:.6}", p.lo_s),
                        format!("{:.6}", p.hi_s),
                        format!("{:.6}", p.chosen_s),
                        format!("{:.9}", p.objective),
                    ]);
                }
                None => {
                    println!("  {first:<5} {second:<6} infeasible        -         -         -");
                    rows.push(vec![
                        first.to_string(),
                        second.to_string(),
                        "infeasible".into(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                }
            }
        }
    }
    if let Some(path) = csv {
        write_csv(
            path,
            &["first", "second", "status", "lo_s", "hi_s", "chosen_s", "objective"],
            &rows,
        )?;
    }
    Ok(())
}

/// Timer source for a simulation run: the optimizer's table when the model is
/// stochastic, otherwise round trip plus guard measured on the realized wire.
fn sim_timers(
    cfg: &ScenarioConfig,
    model: &Network,
    sim_net: &Network,
    wl: &Workload,
) -> Result<TimeoutTable, CliError> {
    if cfg.has_gamma_model() {
        Ok(StochasticModel::new(model)?.timeout_table(wl)?)
    } else {
        Ok(TimeoutTable::fixed(sim_net, cfg.guard_s())?)
    }
}

pub fn cmd_simulate(
    config: &Path,
    attempts: Option<usize>,
    seed: Option<u64>,
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let wl = cfg.workload();
    let model = cfg.model_network(attempts)?.augment_blackhole(&wl)?;
    let sim_net = cfg.sim_network(attempts)?.augment_blackhole(&wl)?;
    let solved = solve_scenario(&cfg, &model, &wl, None)?;
    let timers = match solved.timers {
        Some(t) => t,
        None => sim_timers(&cfg, &model, &sim_net, &wl)?,
    };
    let run = SimConfig::new(seed.unwrap_or(cfg.seed), cfg.total_packets);
    let report = simulate(&sim_net, &wl, &solved.sol.x, &timers, &run)?;
    let n = sim_net.n_paths();

    let mean_latency = if report.latency_samples_s.is_empty() {
        0.0
    } else {
        report.latency_samples_s.iter().sum::<f64>() / report.latency_samples_s.len() as f64
    };

    println!("seed {} over {} packets", run.seed, run.total_packets);
    println!("model quality bound: {:.6}", solved.quality);
    println!(
        "delivered in time: {} of {} ({:.6}, {:.4}%)",
        report.delivered_in_time,
        report.generated,
        report.realized_quality,
        report.realized_quality * 100.0
    );
    println!(
        "fates: {} delivered, {} discarded, {} lost in channel, {} dropped at queue",
        report.fates_delivered, report.fates_blackhole, report.fates_channel, report.fates_buffer
    );
    println!(
        "late deliveries: {}, duplicates: {}, stale timers: {}, reorderings: {}",
        report.delivered_total - report.delivered_in_time,
        report.duplicate_deliveries,
        report.stale_timeouts,
        report.fifo_violations
    );
    println!("mean first-copy latency: {:.1} ms", mean_latency * 1e3);
    println!("realized cost: {:.6} per second", report.realized_cost_per_s);
    println!("sent per path:");
    for i in 0..n {
        println!(
            "  path {i}: {} transmissions, {:.3} Mbit/s",
            report.transmissions_per_path[i],
            report.sent_bits_per_path[i] as f64 / report.duration_s / 1e6
        );
    }

    if let Some(path) = csv {
        let mut header: Vec<String> = [
            "seed",
            "total_packets",
            "generated",
            "delivered_total",
            "delivered_in_time",
            "duplicate_deliveries",
            "realized_quality",
            "duration_s",
            "realized_cost_per_s",
            "channel_loss_events",
            "buffer_drop_events",
            "blackhole_drop_events",
            "stale_timeouts",
            "fates_delivered",
            "fates_blackhole",
            "fates_channel",
            "fates_buffer",
            "fifo_violations",
            "mean_latency_s",
        ]
        .map(str::to_owned)
        .to_vec();
        let mut row = vec![
            run.seed.to_string(),
            run.total_packets.to_string(),
            report.generated.to_string(),
            report.delivered_total.to_string(),
            report.delivered_in_time.to_string(),
            report.duplicate_deliveries.to_string(),
            format!("{:.9}", report.realized_quality),
            format!("{:.6}", report.duration_s),
            format!("{:.9}", report.realized_cost_per_s),
            report.channel_loss_events.to_string(),
            report.buffer_drop_events.to_string(),
            report.blackhole_drop_events.to_string(),
            report.stale_timeouts.to_string(),
            report.fates_delivered.to_string(),
            report.fates_blackhole.to_string(),
            report.fates_channel.to_string(),
            report.fates_buffer.to_string(),
            report.fifo_violations.to_string(),
            format!("{:.9}", mean_latency),
        ];
        for i in 0..n {
            header.push(format!("transmissions_path{i}"));
            header.push(format!("sent_bits_path{i}"));
            row.push(report.transmissions_per_path[i].to_string());
            row.push(report.sent_bits_per_path[i].to_string());
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(path, &header_refs, &[row])?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Lambda,
    Delta,
    BandwidthErr,
    DelayErr,
    LossErr,
}

/// Best quality promised by any assignment confined to one real path (plus
/// the discard path), under the model view.
fn best_single_path(model: &Network, wl: &Workload) -> Result<f64, CliError> {
    let mut best = 0.0f64;
    for path in 1..model.n_paths() {
        let (lp, _) = build_quality_lp_restricted(model, wl, &[path])?;
        let sol = solve(&lp, &SolverConfig::default())?;
        check_status(&sol)?;
        best = best.max(sol.objective_value);
    }
    Ok(best)
}

pub fn cmd_sweep(
    config: &Path,
    attempts: Option<usize>,
    seed: Option<u64>,
    kind: SweepKind,
    values: &[f64],
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let mut rows: Vec<Vec<String>> = Vec::new();

    println!("      value  theoretical_q  simulated_q  single_path_best_q");
    let mut emit = |value: f64, theo: f64, sim: f64, single: f64| {
        println!("{value:>11.4}  {theo:>13.6}  {sim:>11.6}  {single:>18.6}");
        rows.push(vec![
            format!("{value}"),
            format!("{theo:.9}"),
            format!("{sim:.9}"),
            format!("{single:.9}"),
        ]);
    };

    match kind {
        SweepKind::Lambda | SweepKind::Delta => {
            for &value in values {
                let mut wl = cfg.workload();
                match kind {
                    SweepKind::Lambda => wl.rate_bps = value * 1e6,
                    _ => wl.lifetime_s = value * 1e-3,
                }
                // the discard path absorbs exactly the offered rate, so the
                // networks must be re-augmented per point
                let model = cfg.model_network(attempts)?.augment_blackhole(&wl)?;
                let sim_net = cfg.sim_network(attempts)?.augment_blackhole(&wl)?;
                let solved = solve_scenario(&cfg, &model, &wl, None)?;
                let timers = match solved.timers {
                    Some(t) => t,
                    None => sim_timers(&cfg, &model, &sim_net, &wl)?,
                };
                let run = SimConfig::new(seed, cfg.total_packets);
                let report = simulate(&sim_net, &wl, &solved.sol.x, &timers, &run)?;
                let single = best_single_path(&model, &wl)?;
                emit(value, solved.quality, report.realized_quality, single);
            }
        }
        SweepKind::BandwidthErr | SweepKind::DelayErr | SweepKind::LossErr => {
            let axis = match kind {
                SweepKind::BandwidthErr => SweepAxis::Bandwidth,
                SweepKind::DelayErr => SweepAxis::Delay,
                _ => SweepAxis::Loss,
            };
            let wl = cfg.workload();
            let truth = cfg.sim_network(attempts)?;
            let run = SimConfig::new(seed, cfg.total_packets);
            let points =
                mpsched_core::sensitivity_sweep(&truth, &wl, axis, values, cfg.guard_s(), &run)?;
            for p in points {
                emit(
                    p.factor,
                    p.theoretical_quality,
                    p.simulated_quality,
                    p.single_path_quality,
                );
            }
        }
    }

    if let Some(path) = csv {
        write_csv(
            path,
            &["value", "theoretical_q", "simulated_q", "single_path_best_q"],
            &rows,
        )?;
    }
    Ok(())
}

/// A solver-timing grid over synthetic staggered networks: `n` counts the
/// discard path, so row (n, m) solves an n^m-variable problem.
pub fn cmd_bench(
    n_max: usize,
    m_max: usize,
    repeats: u32,
    csv: Option<&PathBuf>,
) -> Result<(), CliError> {
    if n_max < 2 || m_max < 1 || repeats == 0 {
        return Err(CliError::Config(
            "bench needs n_max >= 2, m_max >= 1, repeats >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    println!("  n   m  combinations  mean_us");
    for n in 2..=n_max {
        for m in 1..=m_max {
            let lp = bench_problem(n - 1, m)?;
            // a short warmup keeps first-touch page faults out of the means
            for _ in 0..10 {
                let _ = solve(&lp, &SolverConfig::default())?;
            }
            let started = Instant::now();
            for _ in 0..repeats {
                let sol = solve(&lp, &SolverConfig::default())?;
                check_status(&sol)?;
            }
            let mean_s = started.elapsed().as_secs_f64() / repeats as f64;
            println!("{n:>3} {m:>3}  {:>12}  {:>7.2}", lp.n_cols(), mean_s * 1e6);
            rows.push(vec![
                n.to_string(),
                m.to_string(),
                lp.n_cols().to_string(),
                format!("{mean_s:.9}"),
            ]);
        }
    }
    if let Some(path) = csv {
        write_csv(path, &["n", "m", "combinations", "mean_seconds"], &rows)?;
    }
    Ok(())
}

fn bench_problem(n_real: usize, attempts: usize) -> Result<LpProblem, CliError> {
    use mpsched_core::{DelayModel, PathSpec};
    let paths = (0..n_real)
        .map(|p| PathSpec {
            bandwidth_bps: 80e6 / (p + 1) as f64,
            delay: DelayModel::Fixed(0.1 * (p + 1) as f64),
            loss_prob: 0.05 * p as f64,
            cost_per_bit: 0.0,
        })
        .collect();
    let wl = Workload::new(90e6, 0.8);
    let net = Network::new(paths, attempts)?.augment_blackhole(&wl)?;
    Ok(build_quality_lp(&net, &wl)?)
}
