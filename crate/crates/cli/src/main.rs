//! `fctl` — analyze and simulate fixed-cycle traffic-light queues and line
//! networks of signalized intersections.
//!
//! Exit codes: 0 success; 1 comparison beyond 4 sigma; 2 unstable queue;
//! 3 numerics failure (roots, singular boundary system); 4 configuration or
//! I/O error.

mod config;
mod report;

use anyhow::{bail, Result};
use clap::{Parser, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use config::{ParsedConfig, Target};
use fctl_core::network::analyze_network;
use fctl_core::output::effective_green_dist;
use fctl_core::sim::{simulate_network, simulate_single};
use fctl_core::solver::solve_queue;
use report::{Reporter, SummaryRow};

#[derive(Debug, Parser)]
#[command(name = "fctl", version, about)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// What to run.
    #[arg(long, value_enum)]
    mode: Mode,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the measured cycles per replication.
    #[arg(long)]
    cycles: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    replications: Option<u32>,
    /// Override the mixture compaction threshold.
    #[arg(long = "epsilon-weight")]
    epsilon_weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    AnalyzeSingle,
    AnalyzeNetwork,
    SimulateSingle,
    SimulateNetwork,
    Compare,
    Roots,
    Invert,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<fctl_core::Error>() {
                Some(fctl_core::Error::Unstable { .. }) => 2,
                Some(
                    fctl_core::Error::RootFinding(_)
                    | fctl_core::Error::SingularSystem { .. }
                    | fctl_core::Error::NegativeProbability { .. },
                ) => 3,
                _ => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn run(args: &Args) -> Result<ExitCode> {
    let mut cfg = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(cycles) = args.cycles {
        cfg.sim.cycles = cycles;
    }
    if let Some(reps) = args.replications {
        cfg.sim.replications = reps;
    }
    if let Some(eps) = args.epsilon_weight {
        if eps < 0.0 {
            bail!("--epsilon-weight must be nonnegative");
        }
        cfg.epsilon_weight = eps;
    }
    let reporter = Reporter::new(&args.out, &cfg.name)?;

    match args.mode {
        Mode::AnalyzeSingle => analyze_single(&cfg, &reporter),
        Mode::AnalyzeNetwork => analyze_net(&cfg, &reporter),
        Mode::SimulateSingle => sim_single(&cfg, &reporter),
        Mode::SimulateNetwork => sim_net(&cfg, &reporter),
        Mode::Compare => compare(&cfg, &reporter),
        Mode::Roots => roots(&cfg, &reporter),
        Mode::Invert => invert(&cfg, &reporter),
    }
}

fn want_single<'a>(cfg: &'a ParsedConfig, mode: &str) -> Result<(fctl_core::SignalPlan, &'a fctl_core::ArrivalProcess)> {
    match &cfg.target {
        Target::Single { plan, arrivals } => Ok((*plan, arrivals)),
        Target::Network(_) => bail!("mode {mode} needs a single-queue config, got a network"),
    }
}

fn want_network<'a>(cfg: &'a ParsedConfig, mode: &str) -> Result<&'a fctl_core::NetworkSpec> {
    match &cfg.target {
        Target::Network(spec) => Ok(spec),
        Target::Single { .. } => bail!("mode {mode} needs a network config, got a single queue"),
    }
}

fn analyze_single(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    let (plan, arrivals) = want_single(cfg, "analyze-single")?;
    let arrivals = arrivals.compact(cfg.epsilon_weight);
    let sol = solve_queue(plan, arrivals)?;
    reporter.means_analytic(&cfg.name, &sol)?;
    reporter.tails(&cfg.name, &sol.tail_table(cfg.levels), false)?;
    reporter.green_dist(&cfg.name, &effective_green_dist(&sol))?;
    println!(
        "{}: rho = {:.4}, E[X_0] = {:.6}, mean queue = {:.6}, q_0 = {:.6}",
        cfg.name,
        sol.rho(),
        sol.mean_x0(),
        sol.mean_xbar(),
        sol.q()[0]
    );
    Ok(ExitCode::SUCCESS)
}

fn analyze_net(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    let spec = want_network(cfg, "analyze-network")?;
    let net = analyze_network(spec, cfg.epsilon_weight)?;
    let mut rows = Vec::new();
    for node in &net.nodes {
        reporter.means_analytic(&node.name, &node.solution)?;
        reporter.tails(&node.name, &node.solution.tail_table(cfg.levels), false)?;
        reporter.green_dist(&node.name, node.output.green_dist())?;
        rows.push(SummaryRow {
            name: node.name.clone(),
            rho: node.rho,
            mean_xbar: node.solution.mean_xbar(),
            stderr: None,
        });
        println!(
            "{}: rho = {:.4}, mean queue = {:.6}",
            node.name,
            node.rho,
            node.solution.mean_xbar()
        );
    }
    reporter.network_summary(&rows)?;
    Ok(ExitCode::SUCCESS)
}

fn sim_single(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    let (plan, arrivals) = want_single(cfg, "simulate-single")?;
    let stats = simulate_single(arrivals, plan, &cfg.sim)?;
    reporter.means_simulated(&cfg.name, &stats, cfg.sim.seed)?;
    reporter.tails_simulated(&cfg.name, &stats)?;
    reporter.green_dist(&cfg.name, &stats.green_hist)?;
    println!(
        "{}: simulated mean queue = {:.6} (stderr {:.6}), arrivals/cycle = {:.4}",
        cfg.name, stats.mean_xbar, stats.stderr_xbar, stats.arrivals_per_cycle
    );
    Ok(ExitCode::SUCCESS)
}

fn sim_net(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    let spec = want_network(cfg, "simulate-network")?;
    let stats = simulate_network(spec, &cfg.sim)?;
    let mut rows = Vec::new();
    for (node, s) in spec.nodes.iter().zip(&stats) {
        reporter.means_simulated(&node.name, s, cfg.sim.seed)?;
        reporter.tails_simulated(&node.name, s)?;
        reporter.green_dist(&node.name, &s.green_hist)?;
        rows.push(SummaryRow {
            name: node.name.clone(),
            rho: 0.0,
            mean_xbar: s.mean_xbar,
            stderr: Some(s.stderr_xbar),
        });
        println!(
            "{}: simulated mean queue = {:.6} (stderr {:.6})",
            node.name, s.mean_xbar, s.stderr_xbar
        );
    }
    reporter.network_summary(&rows)?;
    Ok(ExitCode::SUCCESS)
}

fn compare(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    let mut worst_sigma = 0.0f64;
    let mut worst_dev = 0.0f64;
    let mut worst_at = String::new();
    match &cfg.target {
        Target::Single { plan, arrivals } => {
            let sol = solve_queue(*plan, arrivals.compact(cfg.epsilon_weight))?;
            let stats = simulate_single(arrivals, *plan, &cfg.sim)?;
            reporter.means_analytic(&cfg.name, &sol)?;
            let (_, dev, sigma) = reporter.compare(&cfg.name, &sol, &stats)?;
            worst_sigma = sigma;
            worst_dev = dev;
            worst_at = cfg.name.clone();
        }
        Target::Network(spec) => {
            let net = analyze_network(spec, cfg.epsilon_weight)?;
            let stats = simulate_network(spec, &cfg.sim)?;
            for (node, s) in net.nodes.iter().zip(&stats) {
                reporter.means_analytic(&node.name, &node.solution)?;
                let (_, dev, sigma) = reporter.compare(&node.name, &node.solution, s)?;
                if sigma > worst_sigma {
                    worst_sigma = sigma;
                    worst_at = node.name.clone();
                }
                worst_dev = worst_dev.max(dev);
            }
        }
    }
    println!(
        "max deviation {worst_dev:.6}, worst sigma multiple {worst_sigma:.2} at {worst_at}"
    );
    if worst_sigma > 4.0 {
        println!("comparison FAILED: deviation beyond 4 sigma");
        return Ok(ExitCode::from(1));
    }
    println!("comparison OK (within 4 sigma)");
    Ok(ExitCode::SUCCESS)
}

fn roots(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    match &cfg.target {
        Target::Single { plan, arrivals } => {
            let set = fctl_core::find_roots(arrivals, plan.green)?;
            reporter.roots(&cfg.name, &set)?;
            println!("{}: {} interior roots", cfg.name, set.len());
        }
        Target::Network(spec) => {
            let net = analyze_network(spec, cfg.epsilon_weight)?;
            for node in &net.nodes {
                reporter.roots(&node.name, node.solution.roots())?;
                println!("{}: {} interior roots", node.name, node.solution.roots().len());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn invert(cfg: &ParsedConfig, reporter: &Reporter) -> Result<ExitCode> {
    match &cfg.target {
        Target::Single { plan, arrivals } => {
            let sol = solve_queue(*plan, arrivals.compact(cfg.epsilon_weight))?;
            reporter.pmf(&cfg.name, &sol)?;
        }
        Target::Network(spec) => {
            let net = analyze_network(spec, cfg.epsilon_weight)?;
            for node in &net.nodes {
                reporter.pmf(&node.name, &node.solution)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
