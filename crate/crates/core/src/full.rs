//! Full-information smoothed best-response dynamics.
//!
//! Both players update simultaneously from the same pre-step joint strategy:
//! `pi^i <- pi^i + beta_k (sigma_tau(R^i pi^{-i}) - pi^i)`.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{JointStrategy, MixedStrategy, Player, ZeroSumGame};
use crate::lyapunov::{lyap_v_raw, CERT_SLACK};
use crate::schedule::StepsizeSchedule;
use crate::smoothed::{softmax_raw, Temperature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullInfoState {
    pub joint: JointStrategy,
    pub k: u64,
}

impl FullInfoState {
    pub fn new(joint: JointStrategy) -> Self {
        Self { joint, k: 1 }
    }
}

/// One row of a full-information trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullTraceRecord {
    pub k: u64,
    /// Stepsize applied to leave iterate `k`.
    pub beta_k: f64,
    pub ng: f64,
    pub v: f64,
    pub v_h: f64,
    /// Slack of the drift inequality on the step that produced iterate `k`;
    /// absent for the initial iterate or when drift checking is off.
    pub drift_slack: Option<f64>,
}

pub(crate) fn check_step(beta: f64, name: &str) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0 && beta < 1.0) {
        return Err(GameError::InvalidStepsize(format!("{name} = {beta} must lie in (0, 1)")));
    }
    Ok(())
}

/// `(1 - beta) pi + beta target`, renormalized.
pub(crate) fn mix(pi: &[f64], target: &[f64], beta: f64) -> Result<MixedStrategy> {
    let next = pi
        .iter()
        .zip(target)
        .map(|(p, t)| (1.0 - beta) * p + beta * t)
        .collect();
    MixedStrategy::renormalized(next)
}

pub(crate) fn step_full_raw(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: f64,
    beta: f64,
) -> Result<JointStrategy> {
    let t1 = softmax_raw(&game.local_payoff_raw(Player::One, joint.p2.probs()), tau);
    let t2 = softmax_raw(&game.local_payoff_raw(Player::Two, joint.p1.probs()), tau);
    Ok(JointStrategy::new(
        mix(joint.p1.probs(), &t1, beta)?,
        mix(joint.p2.probs(), &t2, beta)?,
    ))
}

pub fn step_full(
    game: &ZeroSumGame,
    state: &FullInfoState,
    tau: Temperature,
    beta_k: f64,
) -> Result<FullInfoState> {
    check_step(beta_k, "beta_k")?;
    game.check_joint(&state.joint)?;
    Ok(FullInfoState {
        joint: step_full_raw(game, &state.joint, tau.value(), beta_k)?,
        k: state.k + 1,
    })
}

/// Right-hand side of the one-step drift inequality
/// `V_{k+1} <= (1 - beta) V_k + 2 A^2 beta^2 / tau + 2 beta tau log A`.
pub fn drift_rhs_full(v_k: f64, beta: f64, a_max: usize, tau: f64) -> f64 {
    let a = a_max as f64;
    (1.0 - beta) * v_k + 2.0 * a * a * beta * beta / tau + 2.0 * beta * tau * a.ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunFullOptions {
    pub check_drift: bool,
    /// Keep every m-th record; the first and last are always kept.
    pub record_every: u64,
}

impl Default for RunFullOptions {
    fn default() -> Self {
        Self {
            check_drift: true,
            record_every: 1,
        }
    }
}

/// Runs `k_total` steps and returns the records for k = 1..=k_total+1.
pub fn run_full(
    game: &ZeroSumGame,
    init: &JointStrategy,
    tau: Temperature,
    schedule: &StepsizeSchedule,
    k_total: u64,
    check_drift: bool,
) -> Result<Vec<FullTraceRecord>> {
    run_full_with(
        game,
        init,
        tau,
        schedule,
        k_total,
        RunFullOptions {
            check_drift,
            record_every: 1,
        },
    )
}

pub fn run_full_with(
    game: &ZeroSumGame,
    init: &JointStrategy,
    tau: Temperature,
    schedule: &StepsizeSchedule,
    k_total: u64,
    opts: RunFullOptions,
) -> Result<Vec<FullTraceRecord>> {
    if k_total == 0 {
        return Err(GameError::InvalidParameter("K must be at least 1".into()));
    }
    if opts.record_every == 0 {
        return Err(GameError::InvalidParameter("record_every must be at least 1".into()));
    }
    schedule.validate_relaxed()?;
    game.check_joint(init)?;
    let tau_v = tau.value();
    let a_max = game.a_max();
    let record = |joint: &JointStrategy, k: u64, v: f64, slack: Option<f64>| -> Result<FullTraceRecord> {
        Ok(FullTraceRecord {
            k,
            beta_k: schedule.beta_at(k)?,
            ng: game.nash_gap(joint)?,
            v,
            v_h: crate::lyapunov::lyap_v_harris(game, joint)?,
            drift_slack: slack,
        })
    };

    let mut joint = init.clone();
    let mut v = lyap_v_raw(game, joint.p1.probs(), joint.p2.probs(), tau_v);
    let mut trace = vec![record(&joint, 1, v, None)?];
    for k in 1..=k_total {
        let beta = schedule.beta_at(k)?;
        check_step(beta, "beta_k")?;
        let next = step_full_raw(game, &joint, tau_v, beta)?;
        let v_next = lyap_v_raw(game, next.p1.probs(), next.p2.probs(), tau_v);
        let slack = if opts.check_drift {
            let s = drift_rhs_full(v, beta, a_max, tau_v) - v_next;
            if s < -CERT_SLACK {
                return Err(GameError::DriftViolation { k, slack: s });
            }
            Some(s)
        } else {
            None
        };
        joint = next;
        v = v_next;
        let idx = k + 1;
        if idx % opts.record_every == 0 || idx == k_total + 1 {
            trace.push(record(&joint, idx, v, slack)?);
        }
    }
    Ok(trace)
}

/// Upper bound on `NG(pi_{K+1})` for the given schedule, as a function of `V_1`.
///
/// Constant: `(1-beta)^K V_1 + 2 A^2 beta / tau + 2 tau log A`.
/// Inverse linear: `V_1/(K+1)^beta + 8 A^2 beta^2 / (tau (beta-1) K) + 4 tau 2^beta log A`.
/// Inverse polynomial: `exp(-beta/(1-eta) ((K+k0+1)^{1-eta} - (1+k0)^{1-eta})) V_1
///   + 4 beta A^2 / (tau (K+k0)^eta) + 2 tau log A`.
pub fn full_info_envelope(
    schedule: &StepsizeSchedule,
    a_max: usize,
    tau: Temperature,
    v1: f64,
    k_total: u64,
) -> f64 {
    let a = a_max as f64;
    let t = tau.value();
    let kf = k_total as f64;
    match *schedule {
        StepsizeSchedule::Constant { beta } => {
            (1.0 - beta).powf(kf) * v1 + 2.0 * a * a * beta / t + 2.0 * t * a.ln()
        }
        StepsizeSchedule::InverseLinear { beta } => {
            v1 / (kf + 1.0).powf(beta)
                + 8.0 * a * a * beta * beta / (t * (beta - 1.0) * kf)
                + 4.0 * t * 2f64.powf(beta) * a.ln()
        }
        StepsizeSchedule::InversePolynomial { beta, eta, k0 } => {
            let k0 = k0 as f64;
            let p = 1.0 - eta;
            let decay = (-beta / p * ((kf + k0 + 1.0).powf(p) - (1.0 + k0).powf(p))).exp();
            decay * v1 + 4.0 * beta * a * a / (t * (kf + k0).powf(eta)) + 2.0 * t * a.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_game, GameKind};
    use crate::smoothed::regularized_ne_residual;
    use approx::assert_abs_diff_eq;

    fn t(x: f64) -> Temperature {
        Temperature::new(x).unwrap()
    }

    fn corner() -> JointStrategy {
        JointStrategy::new(MixedStrategy::pure(2, 0), MixedStrategy::pure(2, 0))
    }

    #[test]
    fn uniform_is_fixed_for_matching_pennies() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let s = FullInfoState::new(JointStrategy::uniform(g.counts()));
        let next = step_full(&g, &s, t(0.3), 0.7).unwrap();
        assert_eq!(next.joint, s.joint);
        assert_eq!(next.k, 2);
    }

    #[test]
    fn corner_step_example() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let next = step_full(&g, &FullInfoState::new(corner()), t(1.0), 0.5).unwrap();
        let s = 1f64.exp() / (1f64.exp() + (-1f64).exp());
        assert_abs_diff_eq!(next.joint.p1.probs()[0], 0.5 + 0.5 * s, epsilon = 1e-15);
        assert_abs_diff_eq!(next.joint.p2.probs()[0], 0.5 + 0.5 * (1.0 - s), epsilon = 1e-15);
        assert_abs_diff_eq!(next.joint.p1.probs()[0], 0.9404, epsilon = 1e-4);
        assert_abs_diff_eq!(next.joint.p2.probs()[0], 0.5596, epsilon = 1e-4);
    }

    #[test]
    fn step_rejects_bad_beta() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let s = FullInfoState::new(corner());
        assert!(step_full(&g, &s, t(1.0), 1.0).is_err());
        assert!(step_full(&g, &s, t(1.0), 0.0).is_err());
    }

    #[test]
    fn uniform_run_has_zero_gap() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let sched = StepsizeSchedule::constant(0.1).unwrap();
        let tr = run_full(&g, &JointStrategy::uniform(g.counts()), t(0.1), &sched, 50, true).unwrap();
        assert_eq!(tr.len(), 51);
        assert!(tr.iter().all(|r| r.ng == 0.0));
        assert_eq!(tr[0].drift_slack, None);
        assert!(tr[1].drift_slack.is_some());
    }

    #[test]
    fn corner_run_meets_constant_envelope() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let sched = StepsizeSchedule::constant(0.1).unwrap();
        let tau = t(0.1);
        let tr = run_full(&g, &corner(), tau, &sched, 500, true).unwrap();
        let bound = full_info_envelope(&sched, 2, tau, tr[0].v, 500);
        assert!(tr.last().unwrap().ng <= bound + 1e-10);
        assert!(tr.iter().skip(1).all(|r| r.drift_slack.unwrap() >= -1e-10));
    }

    #[test]
    fn runs_are_deterministic_and_thinned() {
        let g = generate_game(&GameKind::Random { n1: 3, n2: 4, seed: 5 }).unwrap();
        let sched = StepsizeSchedule::inverse_linear(1.5).unwrap();
        let init = JointStrategy::new(MixedStrategy::pure(3, 2), MixedStrategy::pure(4, 0));
        let a = run_full(&g, &init, t(0.2), &sched, 100, true).unwrap();
        let b = run_full(&g, &init, t(0.2), &sched, 100, true).unwrap();
        assert_eq!(a, b);
        let thin = run_full_with(
            &g,
            &init,
            t(0.2),
            &sched,
            100,
            RunFullOptions { check_drift: true, record_every: 7 },
        )
        .unwrap();
        let ks: Vec<u64> = thin.iter().map(|r| r.k).collect();
        assert_eq!(ks.first(), Some(&1));
        assert_eq!(ks.last(), Some(&101));
        assert!(ks[1..ks.len() - 1].iter().all(|k| k % 7 == 0));
        for r in &thin {
            assert_eq!(*r, a[(r.k - 1) as usize]);
        }
    }

    #[test]
    fn converged_point_is_stationary() {
        let g = generate_game(&GameKind::Random { n1: 3, n2: 3, seed: 2 }).unwrap();
        let tau = t(0.5);
        let sched = StepsizeSchedule::constant(0.5).unwrap();
        let mut s = FullInfoState::new(JointStrategy::uniform(g.counts()));
        for _ in 0..2000 {
            s = step_full(&g, &s, tau, sched.beta_at(s.k).unwrap()).unwrap();
        }
        assert!(regularized_ne_residual(&g, &s.joint, tau).unwrap() < 1e-12);
        let next = step_full(&g, &s, tau, 0.5).unwrap();
        for p in Player::BOTH {
            for (x, y) in next.joint.get(p).probs().iter().zip(s.joint.get(p).probs()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
