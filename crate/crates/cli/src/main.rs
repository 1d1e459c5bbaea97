use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use smoothbr_cli::config::{ExperimentConfig, Mode};
use smoothbr_cli::run::{run_experiment, RunOptions};
use smoothbr_cli::solve::solve;
use smoothbr_cli::sweep::sweep;
use smoothbr_cli::verify::{summary_lines, verify, Suite};
use smoothbr_cli::{exit_code, Failure};
use smoothbr_core::{generate_game, GameKind, ZeroSumGame};

#[derive(Parser)]
#[command(name = "smoothbr", version, about = "Smoothed best-response dynamics in zero-sum matrix games")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory or file.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Step budget (default 1e9).
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NamedGame {
    MatchingPennies,
    RockPaperScissors,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured dynamics and write traces and a summary.
    Run,
    /// Evaluate numerical certificates on random tuples.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Trials per suite; each suite has its own default.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Predicted versus observed iteration counts over a list of epsilons.
    Sweep {
        #[arg(long, value_enum)]
        mode: SweepMode,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
    },
    /// Solve a game exactly, or its regularized version with --tau.
    Solve {
        /// Game file ({"r1": [[...]]}); falls back to the config's game.
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Print or write a game file.
    GenGame {
        #[arg(long, value_enum)]
        kind: NamedGame,
        #[arg(long, default_value_t = 3)]
        n1: usize,
        #[arg(long, default_value_t = 3)]
        n2: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Full,
    Minimal,
}

fn load_config(path: Option<&Path>) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let path = path.ok_or_else(|| Failure::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    Ok((cfg, path.parent().map(Path::to_path_buf)))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn real_main(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        // verify uses the global pool
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Run => {
            let (cfg, base_dir) = load_config(cli.config.as_deref())?;
            let opts = RunOptions {
                jobs: cli.jobs,
                budget: cli.budget,
                output: cli.output,
                base_dir,
                seed: cli.seed,
            };
            let out = run_experiment(&cfg, &opts)?;
            println!("wrote {}", out.output_dir.display());
            if let Some(v) = out.violation {
                return Err(Failure::Certificate(v).into());
            }
            Ok(())
        }
        Command::Verify { suite, trials } => {
            if trials == Some(0) {
                return Err(Failure::Config("trials must be at least 1".into()).into());
            }
            let report = verify(suite, trials, cli.seed.unwrap_or(0))?;
            for line in summary_lines(&report) {
                eprintln!("{line}");
            }
            let json = serde_json::to_string_pretty(&report)? + "\n";
            emit(&json, cli.output.as_deref())?;
            if !report.passed {
                return Err(Failure::Certificate("see failures in the report for replayable tuples".into()).into());
            }
            Ok(())
        }
        Command::Sweep { mode, epsilons } => {
            let (mut cfg, base_dir) = load_config(cli.config.as_deref())?;
            if let Some(s) = cli.seed {
                cfg.seed = Some(s);
            }
            let out_dir = cli.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let mode = match mode {
                SweepMode::Full => Mode::Full,
                SweepMode::Minimal => Mode::Minimal,
            };
            sweep(mode, &epsilons, &cfg, base_dir.as_deref(), cfg.budget(cli.budget), &out_dir)
        }
        Command::Solve { game, tau, tol } => {
            let g = match game {
                Some(p) => ZeroSumGame::load(&p).map_err(|e| Failure::Config(e.to_string()))?,
                None => {
                    let (cfg, base_dir) = load_config(cli.config.as_deref())?;
                    cfg.game.load(base_dir.as_deref())?
                }
            };
            let sol = solve(&g, tau, tol)?;
            emit(&(serde_json::to_string_pretty(&sol)? + "\n"), cli.output.as_deref())
        }
        Command::GenGame { kind, n1, n2 } => {
            let kind = match kind {
                NamedGame::MatchingPennies => GameKind::MatchingPennies,
                NamedGame::RockPaperScissors => GameKind::RockPaperScissors,
                NamedGame::Random => GameKind::Random {
                    n1,
                    n2,
                    seed: cli.seed.unwrap_or(0),
                },
            };
            let g = generate_game(&kind).map_err(|e| Failure::Config(e.to_string()))?;
            emit(&(g.to_json_string() + "\n"), cli.output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
