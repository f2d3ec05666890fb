use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gia_core::aligner::{
    lift_transceivers, run_classical_baseline, run_gia, verify_solution, RunOptions, RunTrace, DEFAULT_MAX_ITERS,
    DEFAULT_VERIFY_TOL, PASS_THRESHOLD_DB,
};
use gia_core::feasibility::{feasibility_check_with, FeasibilityOptions};
use gia_core::harness::{self, Algorithm};
use gia_core::network::{derive_seed, generate_channel, load_config, ConfigFile, TransceiverSet};

/// Generalized interference alignment: feasibility tests, transceiver design
/// and randomized experiments.
#[derive(Debug, Parser)]
#[command(name = "gia", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feasibility verdict for a config file (exit 0 feasible, 1 infeasible).
    Feasibility {
        #[arg(long)]
        config: PathBuf,
        /// Channel seed; overrides the seed in the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Relative rank tolerance.
        #[arg(long, value_parser = positive)]
        tol: Option<f64>,
        /// Skip the closed-form shortcuts and always run the rank test.
        #[arg(long)]
        rank_only: bool,
    },
    /// Design transceivers, write the trace and the solution, verify it.
    Design {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Maximum number of rounds.
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        budget: usize,
        /// Output directory for trace.csv and solution.txt.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Residual tolerance of the verification.
        #[arg(long, value_parser = positive, default_value_t = DEFAULT_VERIFY_TOL)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = AlgoArg::Gia)]
        algorithm: AlgoArg,
        /// Run even when the instance is detected infeasible.
        #[arg(long)]
        force: bool,
    },
    /// Random-configuration convergence trials (exit 0 iff every feasible trial passes).
    Test1 {
        /// Number of trials.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, value_enum, default_value_t = AlgoChoice::Both)]
        algorithm: AlgoChoice,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        budget: usize,
        /// Trial CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Traces of both algorithms on reference configuration 1, 2 or 3.
    Fig6 {
        #[arg(value_parser = clap::value_parser!(u64).range(1..=3))]
        config_id: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of rounds.
        #[arg(long, default_value_t = harness::DEFAULT_FIG6_ROUNDS)]
        budget: usize,
        /// Directory receiving gia.csv and classical.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Verdicts at scales 1 and 2 over several channel seeds (exit 1 if they disagree).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Number of channel seeds.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Gia,
    Classical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoChoice {
    Gia,
    Classical,
    Both,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

enum Outcome {
    Success,
    Negative,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_config(path: &Path) -> anyhow::Result<ConfigFile> {
    load_config(path).with_context(|| format!("cannot use config '{}'", path.display()))
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Success
    } else {
        Outcome::Negative
    }
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write '{}'", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Feasibility { config, seed, tol, rank_only } => {
            let file = read_config(&config)?;
            let seed = seed.or(file.seed).unwrap_or(0);
            let defaults = FeasibilityOptions::default();
            let opts = FeasibilityOptions {
                fast_paths: !rank_only,
                rel_tol: tol.unwrap_or(defaults.rel_tol),
                ..defaults
            };
            let channel = generate_channel(&file.config, seed);
            let report = feasibility_check_with(&file.config, &file.alignment, Some(&channel), None, &opts)?;
            println!("{report}");
            Ok(outcome(report.feasible))
        }
        Command::Design { config, seed, budget, out, tol, algorithm, force } => {
            let file = read_config(&config)?;
            let seed = seed.or(file.seed).unwrap_or(0);
            design(&file, seed, budget, &out, tol, algorithm, force)
        }
        Command::Test1 { n, algorithm, seed, budget, out } => {
            let algorithms: &[Algorithm] = match algorithm {
                AlgoChoice::Gia => &[Algorithm::Gia],
                AlgoChoice::Classical => &[Algorithm::Classical],
                AlgoChoice::Both => &Algorithm::ALL,
            };
            let result = harness::run_test1(n as usize, algorithms, seed, budget)?;
            if let Some(path) = out {
                write(&path, &harness::trials_to_csv(&result.records))?;
            }
            print!("{}", result.summary.to_text());
            Ok(outcome(result.summary.all_passed()))
        }
        Command::Fig6 { config_id, seed, budget, out } => {
            let traces = harness::run_fig6(config_id as usize, seed, budget)?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create '{}'", out.display()))?;
            write(&out.join("gia.csv"), &traces.gia.to_csv())?;
            write(&out.join("classical.csv"), &traces.classical.to_csv())?;
            for (name, t) in [("gia", &traces.gia), ("classical", &traces.classical)] {
                println!("{name}: final_I_dB={} rounds={}", t.final_i_db(), t.rounds());
            }
            Ok(Outcome::Success)
        }
        Command::Sweep { config, n, seed, out } => {
            let file = read_config(&config)?;
            let seeds: Vec<u64> = (0..n).map(|i| derive_seed(seed, i)).collect();
            let rows = harness::sweep_feasibility(&[(file.config, file.alignment)], &seeds)?;
            let csv = harness::sweep_to_csv(&rows);
            match out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(outcome(harness::sweep_is_consistent(&rows)))
        }
    }
}

fn design(
    file: &ConfigFile,
    seed: u64,
    budget: usize,
    out: &Path,
    tol: f64,
    algorithm: AlgoArg,
    force: bool,
) -> anyhow::Result<Outcome> {
    let (cfg, alignment) = (&file.config, &file.alignment);
    let channel = generate_channel(cfg, seed);
    let report = feasibility_check_with(cfg, alignment, Some(&channel), None, &FeasibilityOptions::default())?;
    if !report.feasible {
        eprintln!("warning: instance is infeasible ({report})");
        if !force {
            eprintln!("not designing; pass --force to run anyway");
            return Ok(Outcome::Negative);
        }
    }
    let opts = RunOptions { max_iters: budget, seed: derive_seed(seed, 2), ..RunOptions::default() };
    let (ts, trace): (TransceiverSet, RunTrace) = match algorithm {
        AlgoArg::Gia => {
            let (rt, trace) = run_gia(cfg, alignment, &channel, &opts)?;
            (lift_transceivers(&rt), trace)
        }
        AlgoArg::Classical => run_classical_baseline(cfg, alignment, &channel, &opts)?,
    };
    fs::create_dir_all(out).with_context(|| format!("cannot create '{}'", out.display()))?;
    write(&out.join("trace.csv"), &trace.to_csv())?;
    let reached = trace.reached(PASS_THRESHOLD_DB);
    println!("final_I_dB = {}", trace.final_i_db());
    println!("rounds = {}", trace.rounds());
    if reached {
        write(&out.join("solution.txt"), &ts.to_text())?;
    }
    let verification = verify_solution(cfg, alignment, &channel, &ts, tol)?;
    print!("{verification}");
    Ok(outcome(reached && verification.passed()))
}
