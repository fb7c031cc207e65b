use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lpp_lab::experiments::{run_experiment, RunOptions};
use lpp_lab::stats::{TwReference, TW_GUE_MEAN, TW_GUE_VARIANCE};
use lpp_lab_cli::{config, output, selftest, CliResult};

/// Name of the environment variable overriding the dense-field cell budget.
const MEMORY_BUDGET_ENV: &str = "LPP_MEMORY_BUDGET_CELLS";

#[derive(Parser)]
#[command(
    name = "lpp-lab",
    version,
    about = "Simulation laboratory for directed last passage percolation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a config file and write artifacts.
    Run {
        /// TOML config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Replace every experiment's master seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Worker threads; overrides the config key. Default: all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare the exact kernels against exhaustive oracles on random
    /// instances.
    Selftest {
        /// Largest grid side in vertices (at most 7).
        #[arg(long, default_value_t = selftest::MAX_ORACLE_SIZE)]
        max_size: i64,
        /// Random instances per suite.
        #[arg(long, default_value_t = 200)]
        cases: u64,
        /// Corrupt the DP kernel on purpose to confirm the harness notices.
        #[arg(long)]
        inject_bug: bool,
    },
    /// Validate a Tracy-Widom reference table and its moments.
    TwCheck {
        /// Table file (two whitespace-separated columns z, F; '#' comments).
        /// Default: the builtin table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed_override,
            workers,
        } => run_cmd(&config, &out, seed_override, workers),
        Command::Selftest {
            max_size,
            cases,
            inject_bug,
        } => selftest_cmd(max_size, cases, inject_bug),
        Command::TwCheck { table } => twcheck_cmd(table.as_deref()),
    }
}

fn run_cmd(
    config_path: &std::path::Path,
    out_dir: &std::path::Path,
    seed_override: Option<u64>,
    workers_flag: Option<usize>,
) -> CliResult<ExitCode> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let file_cfg = config::parse_config(&text)?;
    let config_sha = output::config_sha256(&text);

    if let Some(w) = workers_flag.or(file_cfg.workers) {
        if w == 0 {
            return Err("workers must be >= 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()?;
    }

    let mut opts = RunOptions::default();
    if let Some(cells) = file_cfg.memory_budget_cells {
        opts.memory_budget_cells = cells;
    }
    if let Ok(v) = std::env::var(MEMORY_BUDGET_ENV) {
        opts.memory_budget_cells = v
            .parse()
            .map_err(|_| format!("{MEMORY_BUDGET_ENV} must be an integer, got '{v}'"))?;
    }

    let mut results = Vec::new();
    for entry in file_cfg.experiments {
        let mut cfg = entry.into_config()?;
        if let Some(seed) = seed_override {
            cfg.master_seed = seed;
        }
        eprintln!(
            "running '{}': {} scales x {} trials",
            cfg.name,
            cfg.n_list.len(),
            cfg.trials
        );
        let result = run_experiment(&cfg, &opts)?;
        eprintln!("  finished in {:.1}s", result.wall_clock_secs);
        results.push(result);
    }

    let written = output::write_artifacts(out_dir, &results, &config_sha)?;
    for path in &written {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn selftest_cmd(max_size: i64, cases: u64, inject_bug: bool) -> CliResult<ExitCode> {
    let report = selftest::run_selftest(max_size, cases, inject_bug)?;
    println!(
        "dp suite: {} cases, {} comparisons, {} failing",
        report.dp.cases,
        report.dp.comparisons,
        report.dp.failing_seeds.len()
    );
    println!(
        "disjoint suite: {} cases, {} comparisons, {} failing",
        report.disjoint.cases,
        report.disjoint.comparisons,
        report.disjoint.failing_seeds.len()
    );
    if report.passed() {
        println!("selftest PASS");
        return Ok(ExitCode::SUCCESS);
    }
    for seed in &report.dp.failing_seeds {
        eprintln!("dp mismatch at seed {seed}");
    }
    for seed in &report.disjoint.failing_seeds {
        eprintln!("disjoint mismatch at seed {seed}");
    }
    Ok(ExitCode::from(2))
}

fn twcheck_cmd(table_path: Option<&std::path::Path>) -> CliResult<ExitCode> {
    let table = match table_path {
        Some(p) => TwReference::from_path(p)?,
        None => TwReference::builtin(),
    };
    let (lo, hi) = table.support();
    let (mean, var) = table.moments();
    println!("support: [{lo}, {hi}]");
    println!("mean: {mean:.6} (published {TW_GUE_MEAN})");
    println!("variance: {var:.6} (published {TW_GUE_VARIANCE})");
    // Stieltjes sums over a 0.02 grid carry about 1e-2 truncation error.
    let mean_ok = (mean - TW_GUE_MEAN).abs() <= 0.02;
    let var_ok = (var - TW_GUE_VARIANCE).abs() <= 0.03;
    if mean_ok && var_ok {
        println!("tw-check PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("tw-check FAIL: table moments deviate from published constants");
        Ok(ExitCode::from(2))
    }
}
