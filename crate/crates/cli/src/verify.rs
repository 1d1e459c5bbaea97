use std::collections::BTreeMap;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smoothbr_core::full::{drift_rhs_full, step_full, FullInfoState};
use smoothbr_core::game::{JointStrategy, MixedStrategy, Player};
use smoothbr_core::lyapunov::{
    drift_certificate_full, grad_v, hessian_bound, hessian_norm_estimate, lyap_lower_bound_certificate,
    lyap_v, lyap_v_alt, lyap_v_harris, lyap_v_kl, smoothness_constant, CERT_SLACK,
};
use smoothbr_core::minimal::{
    conditional_v_drift_certificate, conditional_w_drift_oracle, td_expected_increment, td_second_moment,
};
use smoothbr_core::sampling::{log_uniform, random_game, random_game_sized, random_joint, random_minimal_state};
use smoothbr_core::{Temperature, ZeroSumGame};

/// Relative tolerance for the two routes to the KL form.
pub const PROP1_REL_TOL: f64 = 1e-9;
/// Finite-difference step and agreement tolerance for gradients.
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
/// Absolute floor so near-zero directional derivatives are not judged relatively.
pub const FD_ABS_FLOOR: f64 = 1e-9;
pub const HESSIAN_ABS_TOL: f64 = 1e-8;
pub const TD_TOL: f64 = 1e-12;
/// Constant used in the coupled drift certificates.
pub const DRIFT_R: f64 = 0.25;
/// Failures kept per check in the report.
const MAX_FAILURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Suite {
    Lyapunov,
    DriftFull,
    DriftMinimal,
    /// Two routes to the KL form of the entropy-adjusted value.
    Prop1,
    Gradient,
    All,
}

impl Suite {
    pub fn default_trials(self) -> u64 {
        match self {
            Suite::Gradient | Suite::DriftMinimal => 200,
            _ => 1000,
        }
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Lyapunov,
                Suite::DriftFull,
                Suite::DriftMinimal,
                Suite::Prop1,
                Suite::Gradient,
            ],
            s => vec![s],
        }
    }
}

/// One evaluated inequality `lhs <= rhs`, satisfied when
/// `slack = rhs - lhs >= -allowance`.
struct Eval {
    check: &'static str,
    slack: f64,
    allowance: f64,
}

impl Eval {
    fn ok(&self) -> bool {
        self.slack >= -self.allowance
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub tested: u64,
    pub satisfied: u64,
    pub worst_slack: f64,
    pub failures: Vec<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: u64,
    pub checks: BTreeMap<&'static str, CheckReport>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

fn game_json(g: &ZeroSumGame) -> Value {
    json!({ "r1": g.r1().to_rows() })
}

fn cert(check: &'static str, c: smoothbr_core::lyapunov::Certificate) -> Eval {
    le(check, c.lhs, c.rhs, CERT_SLACK)
}

fn le(check: &'static str, lhs: f64, rhs: f64, allowance: f64) -> Eval {
    let slack = rhs - lhs;
    Eval {
        check,
        slack: if slack.is_nan() { f64::NEG_INFINITY } else { slack },
        allowance,
    }
}

fn sample_full_tuple(rng: &mut ChaCha8Rng, tau_lo: f64, tau_hi: f64, max_spread: f64) -> (ZeroSumGame, JointStrategy, Temperature) {
    let g = random_game(rng, 6, 5);
    let tau = Temperature::new(log_uniform(rng, tau_lo, tau_hi)).expect("positive");
    let spread = rng.gen_range(0.0..=max_spread);
    let joint = random_joint(rng, g.counts(), spread);
    (g, joint, tau)
}

fn tuple_json(g: &ZeroSumGame, joint: &JointStrategy, tau: Temperature, extra: Value) -> Value {
    let mut v = json!({ "game": game_json(g), "joint": joint, "tau": tau.value() });
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    v
}

fn trial_lyapunov(rng: &mut ChaCha8Rng) -> Result<(Vec<Eval>, Value)> {
    let (g, joint, tau) = sample_full_tuple(rng, 1e-3, 10.0, 4.0);
    let v = lyap_v(&g, &joint, tau)?;
    let vh = lyap_v_harris(&g, &joint)?;
    let log_a = g.counts().log_a_max();
    let evals = vec![
        le("nash_gap_below_v", g.nash_gap(&joint)?, v, CERT_SLACK),
        le("harris_approximation", (v - vh).abs(), 2.0 * tau.value() * log_a, CERT_SLACK),
        cert("lower_bound", lyap_lower_bound_certificate(&g, &joint, tau)?),
        le("kl_nonnegative", 0.0, lyap_v_kl(&g, &joint, tau)?, CERT_SLACK),
    ];
    Ok((evals, tuple_json(&g, &joint, tau, json!({}))))
}

fn trial_prop1(rng: &mut ChaCha8Rng) -> Result<(Vec<Eval>, Value)> {
    let (g, joint, tau) = sample_full_tuple(rng, 1e-3, 10.0, 4.0);
    let alt = lyap_v_alt(&g, &joint, tau)?;
    let kl = lyap_v_kl(&g, &joint, tau)?;
    let evals = vec![le(
        "alt_equals_scaled_kl",
        (alt - tau.value() * kl).abs(),
        PROP1_REL_TOL * alt.abs().max(1.0),
        0.0,
    )];
    Ok((evals, tuple_json(&g, &joint, tau, json!({}))))
}

fn trial_drift_full(rng: &mut ChaCha8Rng) -> Result<(Vec<Eval>, Value)> {
    let (g, joint, tau) = sample_full_tuple(rng, 1e-3, 10.0, 4.0);
    let beta: f64 = rng.gen_range(1e-4..1.0 - 1e-4);
    let h = hessian_norm_estimate(&g, &joint, tau)?;
    let next = step_full(&g, &FullInfoState::new(joint.clone()), tau, beta)?;
    let v0 = lyap_v(&g, &joint, tau)?;
    let v1 = lyap_v(&g, &next.joint, tau)?;
    let evals = vec![
        cert("first_order_drift", drift_certificate_full(&g, &joint, tau)?),
        le("hessian_bound", h, hessian_bound(&g, tau), HESSIAN_ABS_TOL),
        le("hessian_smoothness_constant", h, smoothness_constant(&g, tau), HESSIAN_ABS_TOL),
        le("one_step_drift", v1, drift_rhs_full(v0, beta, g.a_max(), tau.value()), CERT_SLACK),
    ];
    Ok((evals, tuple_json(&g, &joint, tau, json!({ "beta": beta }))))
}

fn perturbed(joint: &JointStrategy, d: &[Vec<f64>; 2], h: f64) -> Result<JointStrategy> {
    let mv = |p: &MixedStrategy, d: &[f64]| {
        MixedStrategy::new(p.probs().iter().zip(d).map(|(x, y)| x + h * y).collect())
    };
    Ok(JointStrategy::new(mv(&joint.p1, &d[0])?, mv(&joint.p2, &d[1])?))
}

fn l2(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(|x| x * x).sum::<f64>().sqrt()
}

fn trial_gradient(rng: &mut ChaCha8Rng) -> Result<(Vec<Eval>, Value)> {
    // Moderate temperatures and spreads keep the central difference above roundoff
    // and below third-order truncation error.
    let (g, joint, tau) = sample_full_tuple(rng, 0.05, 5.0, 2.0);
    let c = g.counts();
    let target = random_joint(rng, c, 4.0);
    let d = [
        target.p1.probs().iter().zip(joint.p1.probs()).map(|(a, b)| a - b).collect::<Vec<_>>(),
        target.p2.probs().iter().zip(joint.p2.probs()).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ];
    let g1 = grad_v(&g, &joint, tau, Player::One)?;
    let g2 = grad_v(&g, &joint, tau, Player::Two)?;
    let analytic: f64 = g1.iter().zip(&d[0]).map(|(a, b)| a * b).sum::<f64>()
        + g2.iter().zip(&d[1]).map(|(a, b)| a * b).sum::<f64>();
    let fd = (lyap_v(&g, &perturbed(&joint, &d, FD_STEP)?, tau)?
        - lyap_v(&g, &perturbed(&joint, &d, -FD_STEP)?, tau)?)
        / (2.0 * FD_STEP);
    let tol = FD_REL_TOL * analytic.abs().max(fd.abs()) + FD_ABS_FLOOR;

    // two-point Lipschitz check between the base point and the target
    let t1 = grad_v(&g, &target, tau, Player::One)?;
    let t2 = grad_v(&g, &target, tau, Player::Two)?;
    let dg = l2(g1.iter().zip(&t1).chain(g2.iter().zip(&t2)).map(|(a, b)| a - b));
    let dx = l2(d[0].iter().chain(&d[1]).copied());
    let evals = vec![
        le("directional_derivative", (analytic - fd).abs(), tol, 0.0),
        le("gradient_lipschitz_smoothness_constant", dg, smoothness_constant(&g, tau) * dx, CERT_SLACK),
        le("gradient_lipschitz_hessian_bound", dg, hessian_bound(&g, tau) * dx, CERT_SLACK),
    ];
    Ok((evals, tuple_json(&g, &joint, tau, json!({ "direction": d, "target": target }))))
}

fn trial_drift_minimal(rng: &mut ChaCha8Rng) -> Result<(Vec<Eval>, Value)> {
    let n = rng.gen_range(2..=3);
    let g = random_game_sized(rng, n, n);
    let spread = rng.gen_range(0.0..=2.0);
    let s = random_minimal_state(rng, &g, spread);
    let tau = Temperature::new(log_uniform(rng, 0.05, 1.0)).expect("positive");
    let alpha: f64 = rng.gen_range(0.0..=1.0);
    let beta = alpha * rng.gen_range(0.0..=1.0);
    let a = g.a_max() as f64;
    let delta = s.joint.min_mass();
    let mut evals = vec![
        cert("w_drift", conditional_w_drift_oracle(&g, &s, tau, beta, alpha, DRIFT_R)?),
        cert("v_drift", conditional_v_drift_certificate(&g, &s, tau, beta, DRIFT_R)?),
    ];
    let inc = td_expected_increment(&g, &s, alpha)?;
    let mut worst_bias: f64 = 0.0;
    let mut worst_moment = f64::NEG_INFINITY;
    for p in Player::BOTH {
        let local = g.local_payoff(p, s.joint.get(p.opponent()))?;
        for (i, e) in inc[p.index()].iter().enumerate() {
            worst_bias = worst_bias.max((e - alpha * (local[i] - s.q(p)[i])).abs());
        }
        for a_opp in 0..g.counts().of(p.opponent()) {
            worst_moment = worst_moment.max(td_second_moment(&g, &s, p, a_opp)?);
        }
    }
    evals.push(le("td_unbiased", worst_bias, TD_TOL, 0.0));
    evals.push(le("td_second_moment", worst_moment, 4.0 * a / delta, 0.0));
    let tuple = json!({ "game": game_json(&g), "state": s, "tau": tau.value(), "alpha": alpha, "beta": beta, "r": DRIFT_R });
    Ok((evals, tuple))
}

fn trial(suite: Suite, rng: &mut ChaCha8Rng) -> Result<(Vec<Eval>, Value)> {
    match suite {
        Suite::Lyapunov => trial_lyapunov(rng),
        Suite::Prop1 => trial_prop1(rng),
        Suite::DriftFull => trial_drift_full(rng),
        Suite::Gradient => trial_gradient(rng),
        Suite::DriftMinimal => trial_drift_minimal(rng),
        Suite::All => unreachable!("expanded by members"),
    }
}

/// Runs one suite. Trial seeds are drawn up front so results do not depend
/// on the worker count.
pub fn verify_suite(suite: Suite, trials: u64, seed: u64) -> Result<SuiteReport> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| master.gen()).collect();
    let results: Vec<(u64, Vec<Eval>, Value)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            trial(suite, &mut rng).map(|(e, t)| (i as u64, e, t))
        })
        .collect::<Result<_>>()?;
    let mut checks: BTreeMap<&'static str, CheckReport> = BTreeMap::new();
    for (i, evals, tuple) in results {
        for e in evals {
            let entry = checks.entry(e.check).or_insert(CheckReport {
                tested: 0,
                satisfied: 0,
                worst_slack: f64::INFINITY,
                failures: Vec::new(),
            });
            entry.tested += 1;
            entry.worst_slack = entry.worst_slack.min(e.slack);
            if e.ok() {
                entry.satisfied += 1;
            } else if entry.failures.len() < MAX_FAILURES {
                entry.failures.push(json!({
                    "trial": i,
                    "trial_seed": seeds[i as usize],
                    "slack": e.slack,
                    "tuple": tuple,
                }));
            }
        }
    }
    let passed = checks.values().all(|c| c.satisfied == c.tested);
    Ok(SuiteReport {
        suite,
        seed,
        trials,
        checks,
        passed,
    })
}

pub fn verify(suite: Suite, trials: Option<u64>, seed: u64) -> Result<VerifyReport> {
    let suites = suite
        .members()
        .into_iter()
        .map(|s| verify_suite(s, trials.unwrap_or_else(|| s.default_trials()), seed))
        .collect::<Result<Vec<_>>>()?;
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { suites, passed })
}

/// Human-readable summary lines.
pub fn summary_lines(report: &VerifyReport) -> Vec<String> {
    let mut out = Vec::new();
    for s in &report.suites {
        for (name, c) in &s.checks {
            out.push(format!(
                "{:?} {name}: {}/{} pass, worst slack {:e}",
                s.suite, c.satisfied, c.tested, c.worst_slack
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for s in Suite::All.members() {
            let r = verify_suite(s, 20, 3).unwrap();
            assert!(r.passed, "{s:?}: {:?}", r.checks);
            assert!(r.checks.values().all(|c| c.tested == 20));
        }
    }

    #[test]
    fn report_is_deterministic() {
        let a = serde_json::to_string(&verify(Suite::Prop1, Some(30), 9).unwrap()).unwrap();
        let b = serde_json::to_string(&verify(Suite::Prop1, Some(30), 9).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
