use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use smoothbr_core::full::{step_full, FullInfoState};
use smoothbr_core::lyapunov::lyap_v;
use smoothbr_core::minimal::{run_minimal, MinimalRunConfig};
use smoothbr_core::schedule::{full_info_params, k_good_lower_bound, k_required_minimal, FullInfoRegime};
use smoothbr_core::trace::fmt_real;
use smoothbr_core::ZeroSumGame;

use crate::config::{ExperimentConfig, InitKind, InitSetting, Mode};
use crate::error::Failure;
use crate::run::{minimal_regime, settle_minimal_params, write_json};

/// Used when the base config does not set nu.
pub const DEFAULT_NU: f64 = 0.5;

pub const INFEASIBLE_NOTE: &str =
    "prescribed constants give an iteration count beyond the step budget; reported without running";

#[derive(Debug, Clone, Serialize)]
pub struct FullSweepRow {
    pub epsilon: f64,
    pub beta: f64,
    pub tau: f64,
    pub v1: f64,
    pub predicted_k: u64,
    /// Smallest k with NG(pi_k) <= epsilon; pi_1 is the initial point.
    pub actual_first_k_below_epsilon: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimalSweepRow {
    pub epsilon: f64,
    pub nu: f64,
    pub r: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub c_sep: Option<f64>,
    pub beta: Option<f64>,
    pub k0: Option<u64>,
    pub k_required: Option<u64>,
    pub k_good: Option<u64>,
    pub exceeds_budget: bool,
    pub ran: bool,
    pub actual_first_k_below_epsilon: Option<u64>,
    pub note: String,
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Failure::Config("no epsilons given".into()).into());
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Failure::Config(format!("epsilon must lie in (0, 1), got {e}")).into());
    }
    Ok(())
}

pub fn sweep_full(
    game: &ZeroSumGame,
    init: &InitSetting,
    epsilons: &[f64],
    budget: u64,
) -> Result<Vec<FullSweepRow>> {
    check_epsilons(epsilons)?;
    let joint = init.joint(game)?;
    let mut rows = Vec::new();
    for &eps in epsilons {
        let cfg_err = |e: smoothbr_core::GameError| Failure::Config(e.to_string());
        let probe = full_info_params(eps, game.a_max(), FullInfoRegime::Constant, eps).map_err(cfg_err)?;
        let v1 = lyap_v(game, &joint, probe.tau)?;
        let p = full_info_params(eps, game.a_max(), FullInfoRegime::Constant, v1).map_err(cfg_err)?;
        if p.k_predicted > budget {
            return Err(Failure::Budget(format!(
                "epsilon = {eps}: predicted K = {} exceeds budget {budget}",
                p.k_predicted
            ))
            .into());
        }
        let beta = p.schedule.beta();
        let mut state = FullInfoState::new(joint.clone());
        let mut first = None;
        loop {
            if game.nash_gap(&state.joint)? <= eps {
                first = Some(state.k);
                break;
            }
            if state.k > p.k_predicted {
                break;
            }
            state = step_full(game, &state, p.tau, beta)?;
        }
        rows.push(FullSweepRow {
            epsilon: eps,
            beta,
            tau: p.tau.value(),
            v1,
            predicted_k: p.k_predicted,
            actual_first_k_below_epsilon: first,
        });
    }
    Ok(rows)
}

pub fn sweep_minimal(
    game: &ZeroSumGame,
    epsilons: &[f64],
    nu: f64,
    eta: Option<f64>,
    seed: u64,
    budget: u64,
) -> Result<Vec<MinimalSweepRow>> {
    check_epsilons(epsilons)?;
    let regime = minimal_regime(eta);
    let mut rows = Vec::new();
    for &eps in epsilons {
        let mut row = MinimalSweepRow {
            epsilon: eps,
            nu,
            r: None,
            delta: None,
            tau: None,
            c_sep: None,
            beta: None,
            k0: None,
            k_required: None,
            k_good: None,
            exceeds_budget: true,
            ran: false,
            actual_first_k_below_epsilon: None,
            note: String::new(),
        };
        let params = match settle_minimal_params(game, eps, nu, regime) {
            Ok(pt) => Some(pt),
            Err(e) => {
                row.note = format!("{e}; {INFEASIBLE_NOTE}");
                None
            }
        };
        if let Some((p, t1)) = params {
            row.r = Some(p.r);
            row.delta = Some(p.delta);
            row.tau = Some(p.tau.value());
            row.c_sep = Some(p.c_sep);
            row.beta = Some(p.beta);
            row.k0 = p.k0;
            let kr = k_required_minimal(&p, t1);
            let kg = p.schedule().and_then(|s| k_good_lower_bound(&s, p.delta, game.a_max()));
            row.k_required = kr.as_ref().ok().copied();
            row.k_good = kg.as_ref().ok().copied();
            row.exceeds_budget = row.k_required.is_none_or(|k| k > budget);
            if row.exceeds_budget {
                row.note = match kr {
                    Err(e) => format!("{e}; {INFEASIBLE_NOTE}"),
                    Ok(_) => INFEASIBLE_NOTE.to_string(),
                };
            } else {
                let k_total = row.k_required.unwrap_or(0).max(1);
                let cfg = MinimalRunConfig::from_params(&p, k_total, seed)?;
                let run = run_minimal(game, &cfg)?;
                row.ran = true;
                row.actual_first_k_below_epsilon = run.trace.iter().find(|r| r.ng <= eps).map(|r| r.k);
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub fn write_full_rows(dir: &Path, rows: &[FullSweepRow]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("sweep.csv"))?);
    writeln!(f, "epsilon,beta,tau,v1,predicted_k,actual_first_k_below_epsilon")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            fmt_real(r.epsilon),
            fmt_real(r.beta),
            fmt_real(r.tau),
            fmt_real(r.v1),
            r.predicted_k,
            opt(r.actual_first_k_below_epsilon)
        )?;
    }
    f.flush()?;
    write_json(dir, "sweep.json", &rows)
}

pub fn write_minimal_rows(dir: &Path, rows: &[MinimalSweepRow]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("sweep.csv"))?);
    writeln!(
        f,
        "epsilon,nu,r,delta,tau,c_sep,beta,k0,k_required,k_good,exceeds_budget,ran,actual_first_k_below_epsilon,note"
    )?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
            fmt_real(r.epsilon),
            fmt_real(r.nu),
            opt_real(r.r),
            opt_real(r.delta),
            opt_real(r.tau),
            opt_real(r.c_sep),
            opt_real(r.beta),
            opt(r.k0),
            opt(r.k_required),
            opt(r.k_good),
            r.exceeds_budget,
            r.ran,
            opt(r.actual_first_k_below_epsilon),
            r.note.replace('"', "'")
        )?;
    }
    f.flush()?;
    write_json(dir, "sweep.json", &rows)
}

/// Runs a sweep using the game, init, nu, eta and seed of `base`.
pub fn sweep(
    mode: Mode,
    epsilons: &[f64],
    base: &ExperimentConfig,
    base_dir: Option<&Path>,
    budget: u64,
    out_dir: &Path,
) -> Result<()> {
    let game = base.game.load(base_dir)?;
    match mode {
        Mode::Full => {
            let init = base.init.clone().unwrap_or(InitSetting::Named(InitKind::Corner));
            let rows = sweep_full(&game, &init, epsilons, budget)?;
            for r in &rows {
                println!(
                    "epsilon {}: predicted K {}, first k with NG <= epsilon: {}",
                    r.epsilon,
                    r.predicted_k,
                    r.actual_first_k_below_epsilon.map_or("not reached".into(), |k| k.to_string())
                );
            }
            write_full_rows(out_dir, &rows)
        }
        Mode::Minimal => {
            let nu = base.nu.unwrap_or(DEFAULT_NU);
            let rows = sweep_minimal(&game, epsilons, nu, base.eta, base.seed.unwrap_or(0), budget)?;
            for r in &rows {
                println!(
                    "epsilon {}: K_required {}, K_good {}, exceeds budget: {}{}",
                    r.epsilon,
                    opt(r.k_required),
                    opt(r.k_good),
                    r.exceeds_budget,
                    if r.note.is_empty() { String::new() } else { format!(" ({})", r.note) }
                );
            }
            write_minimal_rows(out_dir, &rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smoothbr_core::{generate_game, GameKind};

    #[test]
    fn matching_pennies_full_sweep() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let rows = sweep_full(&g, &InitSetting::Named(InitKind::Corner), &[0.5], 1_000_000).unwrap();
        let r = &rows[0];
        assert!((r.beta - 1.0 / 512.0).abs() < 1e-15);
        assert!((r.tau - 0.0625).abs() < 1e-15);
        let first = r.actual_first_k_below_epsilon.unwrap();
        assert!(first <= r.predicted_k);
    }

    #[test]
    fn budget_is_enforced() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let err = sweep_full(&g, &InitSetting::Named(InitKind::Corner), &[0.5], 10).unwrap_err();
        assert_eq!(crate::error::exit_code(&err), 4);
    }

    #[test]
    fn minimal_sweep_is_report_only() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let rows = sweep_minimal(&g, &[0.1], 0.5, None, 0, 1_000_000_000).unwrap();
        assert!(rows[0].exceeds_budget);
        assert!(!rows[0].ran);
        assert!(rows[0].k_required.is_none_or(|k| k > 1_000_000_000));
    }

    #[test]
    fn epsilon_range_checked() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        assert!(sweep_minimal(&g, &[1.5], 0.5, None, 0, 10).is_err());
    }
}
