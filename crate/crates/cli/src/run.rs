use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use smoothbr_core::full::{run_full_with, FullTraceRecord, RunFullOptions};
use smoothbr_core::game::JointStrategy;
use smoothbr_core::lyapunov::{lyap_v, lyap_w};
use smoothbr_core::minimal::{run_minimal, MinimalRun, MinimalRunConfig};
use smoothbr_core::schedule::{
    full_info_params, minimal_info_params, FullInfoRegime, MinimalInfoParams, MinimalRegime,
    StepsizeSchedule,
};
use smoothbr_core::trace::{write_full_trace, write_minimal_trace};
use smoothbr_core::{GameError, Temperature, ZeroSumGame};

use crate::config::{ExperimentConfig, InitKind, InitSetting, Mode, TauSetting};
use crate::error::Failure;
use crate::svg::{log_line_plot, Series};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub budget: Option<u64>,
    /// Overrides `output_dir` from the config.
    pub output: Option<PathBuf>,
    /// Directory that relative game file paths resolve against.
    pub base_dir: Option<PathBuf>,
    /// Replaces the config seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GameInfo {
    pub n1: usize,
    pub n2: usize,
    pub a_max: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertCount {
    pub checked: u64,
    pub satisfied: u64,
    pub worst_slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FullSummary {
    pub mode: Mode,
    pub game: GameInfo,
    pub tau: f64,
    pub schedule: StepsizeSchedule,
    #[serde(rename = "K")]
    pub k: u64,
    pub epsilon: Option<f64>,
    pub predicted_k: Option<u64>,
    pub final_ng: f64,
    pub final_v: f64,
    pub first_k_below_epsilon: Option<u64>,
    pub drift: CertCount,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalSummary {
    pub mode: Mode,
    pub game: GameInfo,
    pub tau: f64,
    pub c_sep: f64,
    pub schedule: StepsizeSchedule,
    #[serde(rename = "K")]
    pub k: u64,
    pub replicas: u64,
    pub seed: u64,
    pub delta: Option<f64>,
    pub derived: Option<MinimalInfoParams>,
    /// Final Nash gap of each replica, in replica order.
    pub final_ng: Vec<f64>,
    pub final_ng_mean: f64,
    pub final_ng_se: f64,
    pub final_ng_median: f64,
    pub final_t_mean: f64,
    /// Across-replica statistics of NG at each recorded k.
    pub ng_by_k: Vec<NgAtK>,
    pub envelope: CertCount,
    pub ratio_violations: u64,
    pub q_range_violations: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NgAtK {
    pub k: u64,
    pub mean: f64,
    pub se: f64,
    pub median: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Summary {
    Full(FullSummary),
    Minimal(MinimalSummary),
}

#[derive(Debug)]
pub enum RunTraces {
    Full(Vec<FullTraceRecord>),
    Minimal(Vec<MinimalRun>),
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub traces: RunTraces,
    pub output_dir: PathBuf,
    /// Set when a checked certificate failed; artifacts are still written.
    pub violation: Option<String>,
}

fn cfg_err(e: GameError) -> anyhow::Error {
    Failure::Config(e.to_string()).into()
}

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    b.build().context("building worker pool")
}

/// Mean, standard error and median.
pub fn stats(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let se = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    (mean, se, median(xs))
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn game_info(game: &ZeroSumGame) -> GameInfo {
    let c = game.counts();
    GameInfo {
        n1: c.n1,
        n2: c.n2,
        a_max: c.a_max,
    }
}

fn schedule_warnings(s: &StepsizeSchedule) -> Vec<String> {
    if s.offset_admissible() {
        Vec::new()
    } else {
        vec![format!(
            "schedule offset k0 is below the admissible minimum; guarantees do not apply to {s:?}"
        )]
    }
}

/// Executes a run and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.check()?;
    let budget = cfg.budget(opts.budget);
    if cfg.steps() > budget {
        return Err(Failure::Budget(format!(
            "{} steps requested, budget is {budget}",
            cfg.steps()
        ))
        .into());
    }
    let game = cfg.game.load(opts.base_dir.as_deref())?;
    let out_dir = opts.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut outcome = match cfg.mode {
        Mode::Full => run_full_mode(cfg, &game)?,
        Mode::Minimal => run_minimal_mode(cfg, &game, opts)?,
    };
    outcome.output_dir = out_dir;
    write_artifacts(cfg, &outcome)?;
    Ok(outcome)
}

fn run_full_mode(cfg: &ExperimentConfig, game: &ZeroSumGame) -> Result<RunOutcome> {
    let init = cfg
        .init
        .clone()
        .unwrap_or(InitSetting::Named(InitKind::Uniform))
        .joint(game)?;
    let (tau, schedule, predicted_k) = match cfg.tau {
        TauSetting::Value(t) => (
            Temperature::new(t).map_err(cfg_err)?,
            cfg.schedule.expect("checked"),
            None,
        ),
        TauSetting::Derived(_) => {
            let eps = cfg.epsilon.expect("checked");
            let probe = full_info_params(eps, game.a_max(), FullInfoRegime::Constant, eps)
                .map_err(cfg_err)?;
            let v1 = lyap_v(game, &init, probe.tau)?;
            let p = full_info_params(eps, game.a_max(), FullInfoRegime::Constant, v1)
                .map_err(cfg_err)?;
            (p.tau, p.schedule, Some(p.k_predicted))
        }
    };
    let opts = RunFullOptions {
        check_drift: true,
        record_every: cfg.record_every,
    };
    let (trace, violation) = match run_full_with(game, &init, tau, &schedule, cfg.k, opts) {
        Ok(t) => (t, None),
        Err(GameError::DriftViolation { k, slack }) => {
            // rerun unchecked so the trace still gets written
            let unchecked = RunFullOptions {
                check_drift: false,
                ..opts
            };
            let t = run_full_with(game, &init, tau, &schedule, cfg.k, unchecked)?;
            (t, Some(format!("drift inequality violated at k = {k} with slack {slack:e}")))
        }
        Err(e) => return Err(cfg_err(e)),
    };
    let last = trace.last().expect("trace is nonempty");
    let slacks: Vec<f64> = trace.iter().filter_map(|r| r.drift_slack).collect();
    let summary = FullSummary {
        mode: Mode::Full,
        game: game_info(game),
        tau: tau.value(),
        schedule,
        k: cfg.k,
        epsilon: cfg.epsilon,
        predicted_k,
        final_ng: last.ng,
        final_v: last.v,
        first_k_below_epsilon: cfg
            .epsilon
            .and_then(|e| trace.iter().find(|r| r.ng <= e).map(|r| r.k)),
        drift: CertCount {
            checked: if violation.is_some() { 0 } else { cfg.k },
            satisfied: if violation.is_some() { 0 } else { cfg.k },
            worst_slack: slacks.iter().copied().reduce(f64::min),
        },
        warnings: schedule_warnings(&schedule),
    };
    Ok(RunOutcome {
        summary: Summary::Full(summary),
        traces: RunTraces::Full(trace),
        output_dir: PathBuf::new(),
        violation,
    })
}

/// Prescribed minimal-information parameters together with the `T_1` they
/// were computed from. `T_1` depends on tau and tau on `T_1` (through r), so
/// the two are iterated until they stop changing.
pub fn settle_minimal_params(
    game: &ZeroSumGame,
    epsilon: f64,
    nu: f64,
    regime: MinimalRegime,
) -> smoothbr_core::Result<(MinimalInfoParams, f64)> {
    let uniform_t = |tau: Temperature| -> smoothbr_core::Result<f64> {
        let joint = JointStrategy::uniform(game.counts());
        let c = game.counts();
        Ok(lyap_v(game, &joint, tau)? + lyap_w(game, &joint, &vec![0.0; c.n1], &vec![0.0; c.n2])?)
    };
    let mut t1 = uniform_t(Temperature::new(epsilon)?)?;
    let mut p = minimal_info_params(epsilon, nu, game.a_max(), t1, regime)?;
    for _ in 0..50 {
        let next = uniform_t(p.tau)?;
        if next == t1 {
            break;
        }
        t1 = next;
        p = minimal_info_params(epsilon, nu, game.a_max(), t1, regime)?;
    }
    Ok((p, t1))
}

pub fn minimal_regime(eta: Option<f64>) -> MinimalRegime {
    match eta {
        Some(eta) => MinimalRegime::InversePolynomial { eta },
        None => MinimalRegime::Constant,
    }
}

fn run_minimal_mode(cfg: &ExperimentConfig, game: &ZeroSumGame, opts: &RunOptions) -> Result<RunOutcome> {
    if let Some(init) = &cfg.init {
        if *init != InitSetting::Named(InitKind::Uniform) {
            return Err(Failure::Config("minimal mode always starts from uniform strategies".into()).into());
        }
    }
    let seed = opts.seed.or(cfg.seed).expect("checked");
    let (run_cfg, derived) = match cfg.tau {
        TauSetting::Value(t) => (
            MinimalRunConfig {
                tau: Temperature::new(t).map_err(cfg_err)?,
                c_sep: cfg.c_sep.expect("checked"),
                schedule: cfg.schedule.expect("checked"),
                k_total: cfg.k,
                seed,
                record_every: cfg.record_every,
                delta: cfg.delta,
            },
            None,
        ),
        TauSetting::Derived(_) => {
            let (p, _) = settle_minimal_params(
                game,
                cfg.epsilon.expect("checked"),
                cfg.nu.expect("checked"),
                minimal_regime(cfg.eta),
            )
            .map_err(cfg_err)?;
            let mut rc = MinimalRunConfig::from_params(&p, cfg.k, seed).map_err(cfg_err)?;
            rc.record_every = cfg.record_every;
            (rc, Some(p))
        }
    };
    let pool = thread_pool(opts.jobs)?;
    let runs: Vec<MinimalRun> = pool.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|j| {
                let rc = MinimalRunConfig {
                    seed: run_cfg.seed.wrapping_add(j),
                    ..run_cfg
                };
                run_minimal(game, &rc)
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    })
    .map_err(cfg_err)?;
    let finals: Vec<f64> = runs.iter().map(|r| r.trace.last().expect("nonempty").ng).collect();
    let final_t: Vec<f64> = runs.iter().map(|r| r.trace.last().expect("nonempty").t).collect();
    let (mean, se, med) = stats(&finals);
    let ng_by_k = (0..runs[0].trace.len())
        .map(|i| {
            let ngs: Vec<f64> = runs.iter().map(|r| r.trace[i].ng).collect();
            let (mean, se, median) = stats(&ngs);
            NgAtK {
                k: runs[0].trace[i].k,
                mean,
                se,
                median,
            }
        })
        .collect();
    let env_bad: u64 = runs.iter().map(|r| r.envelope_violations).sum();
    let checked = (cfg.k + 1) * cfg.replicas;
    let violation = (env_bad > 0).then(|| format!("{env_bad} boundary envelope violations"));
    let summary = MinimalSummary {
        mode: Mode::Minimal,
        game: game_info(game),
        tau: run_cfg.tau.value(),
        c_sep: run_cfg.c_sep,
        schedule: run_cfg.schedule,
        k: cfg.k,
        replicas: cfg.replicas,
        seed,
        delta: run_cfg.delta,
        derived,
        final_ng: finals,
        final_ng_mean: mean,
        final_ng_se: se,
        final_ng_median: med,
        final_t_mean: stats(&final_t).0,
        ng_by_k,
        envelope: CertCount {
            checked,
            satisfied: checked - env_bad,
            worst_slack: None,
        },
        ratio_violations: runs.iter().map(|r| r.ratio_violations).sum(),
        q_range_violations: runs.iter().map(|r| r.q_range_violations).sum(),
        warnings: schedule_warnings(&run_cfg.schedule),
    };
    Ok(RunOutcome {
        summary: Summary::Minimal(summary),
        traces: RunTraces::Minimal(runs),
        output_dir: PathBuf::new(),
        violation,
    })
}

fn create_file(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    let path = dir.join(name);
    fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
}

fn write_artifacts(cfg: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    let dir = &outcome.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let plot = match &outcome.traces {
        RunTraces::Full(trace) => {
            write_full_trace(std::io::BufWriter::new(create_file(dir, "trace.csv")?), trace)?;
            vec![
                Series {
                    label: "NG",
                    points: trace.iter().map(|r| (r.k as f64, r.ng)).collect(),
                },
                Series {
                    label: "T",
                    points: trace.iter().map(|r| (r.k as f64, r.v)).collect(),
                },
            ]
        }
        RunTraces::Minimal(runs) => {
            for (j, run) in runs.iter().enumerate() {
                let f = create_file(dir, &format!("trace_r{j}.csv"))?;
                write_minimal_trace(std::io::BufWriter::new(f), &run.trace)?;
            }
            let rows = runs[0].trace.len();
            let mean_of = |f: &dyn Fn(usize, &MinimalRun) -> f64| -> Vec<(f64, f64)> {
                (0..rows)
                    .map(|i| {
                        let m = runs.iter().map(|r| f(i, r)).sum::<f64>() / runs.len() as f64;
                        (runs[0].trace[i].k as f64, m)
                    })
                    .collect()
            };
            vec![
                Series {
                    label: "NG (mean)",
                    points: mean_of(&|i, r| r.trace[i].ng),
                },
                Series {
                    label: "T (mean)",
                    points: mean_of(&|i, r| r.trace[i].t),
                },
            ]
        }
    };
    match &outcome.summary {
        Summary::Full(s) => write_json(dir, "summary.json", s)?,
        Summary::Minimal(s) => write_json(dir, "summary.json", s)?,
    }
    if cfg.plot {
        let svg = log_line_plot("Nash gap and Lyapunov value", "k", &plot);
        fs::write(dir.join("plot.svg"), svg).context("writing plot.svg")?;
    }
    Ok(())
}
