//! Minimal-information two-timescale dynamics.
//!
//! Each round both players sample an action from their current strategy and
//! observe only their own realized payoff. The strategy moves toward the
//! softmax of the current q-estimate with stepsize `beta_k`; the estimate of
//! the played action moves toward the realized payoff with the
//! importance-weighted stepsize `alpha_k / pi_k(A)`.
//!
//! The exact conditional expectations used by the certificates are computed
//! by enumerating every action pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::full::{check_step, mix};
use crate::game::{JointStrategy, MixedStrategy, Player, ZeroSumGame};
use crate::lyapunov::{lyap_v_raw, lyap_w_raw, Certificate};
use crate::schedule::{MinimalInfoParams, StepsizeSchedule};
use crate::smoothed::{softmax_raw, Temperature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalInfoState {
    pub joint: JointStrategy,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub k: u64,
    /// Running minimum over visited iterates of `min_a pi^i_k(a)`, per player.
    pub min_mass_history: [f64; 2],
}

impl MinimalInfoState {
    /// Uniform strategies and zero estimates.
    pub fn uniform(game: &ZeroSumGame) -> Self {
        let c = game.counts();
        Self::new(JointStrategy::uniform(c), vec![0.0; c.n1], vec![0.0; c.n2])
    }

    pub fn new(joint: JointStrategy, q1: Vec<f64>, q2: Vec<f64>) -> Self {
        let min_mass_history = [joint.p1.min_mass(), joint.p2.min_mass()];
        Self {
            joint,
            q1,
            q2,
            k: 1,
            min_mass_history,
        }
    }

    pub fn q(&self, player: Player) -> &[f64] {
        match player {
            Player::One => &self.q1,
            Player::Two => &self.q2,
        }
    }

    fn check(&self, game: &ZeroSumGame) -> Result<()> {
        game.check_joint(&self.joint)?;
        let c = game.counts();
        if self.q1.len() != c.n1 || self.q2.len() != c.n2 {
            return Err(GameError::DimensionMismatch(format!(
                "q estimates have lengths ({}, {}), expected ({}, {})",
                self.q1.len(),
                self.q2.len(),
                c.n1,
                c.n2
            )));
        }
        Ok(())
    }
}

/// Smallest index whose cumulative probability exceeds `u`; if rounding
/// leaves `u` past the total, the last action with positive mass.
pub fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `(A^1, A^2)` from two successive uniforms of `rng`.
pub fn sample_actions<R: Rng + ?Sized>(state: &MinimalInfoState, rng: &mut R) -> (usize, usize) {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    (
        inverse_cdf(state.joint.p1.probs(), u1),
        inverse_cdf(state.joint.p2.probs(), u2),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub a1: usize,
    pub a2: usize,
    pub payoff1: f64,
    pub payoff2: f64,
    /// `alpha_k / pi^i_k(A^i) > 1` for some player.
    pub ratio_violation: bool,
}

fn smoothed_strategies(state: &MinimalInfoState, tau: f64, beta: f64) -> Result<JointStrategy> {
    let t1 = softmax_raw(&state.q1, tau);
    let t2 = softmax_raw(&state.q2, tau);
    Ok(JointStrategy::new(
        mix(state.joint.p1.probs(), &t1, beta)?,
        mix(state.joint.p2.probs(), &t2, beta)?,
    ))
}

fn td_update(q: &[f64], a: usize, pi_a: f64, alpha: f64, payoff: f64) -> Vec<f64> {
    let mut next = q.to_vec();
    next[a] += alpha / pi_a * (payoff - q[a]);
    next
}

/// The post-step state for a given action pair; the strategy part does not
/// depend on the actions.
fn step_given(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    next_joint: &JointStrategy,
    alpha: f64,
    a1: usize,
    a2: usize,
) -> Result<(MinimalInfoState, StepOutcome)> {
    let p1 = state.joint.p1.probs()[a1];
    let p2 = state.joint.p2.probs()[a2];
    if p1 <= 0.0 || p2 <= 0.0 {
        return Err(GameError::InvalidStrategy(format!(
            "sampled action with zero probability ({a1}, {a2})"
        )));
    }
    let payoff1 = game.r1().get(a1, a2);
    let payoff2 = game.r2().get(a2, a1);
    let q1 = td_update(&state.q1, a1, p1, alpha, payoff1);
    let q2 = td_update(&state.q2, a2, p2, alpha, payoff2);
    let h = state.min_mass_history;
    let next = MinimalInfoState {
        min_mass_history: [h[0].min(next_joint.p1.min_mass()), h[1].min(next_joint.p2.min_mass())],
        joint: next_joint.clone(),
        q1,
        q2,
        k: state.k + 1,
    };
    Ok((
        next,
        StepOutcome {
            a1,
            a2,
            payoff1,
            payoff2,
            ratio_violation: alpha > p1 || alpha > p2,
        },
    ))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(GameError::InvalidStepsize(format!("alpha_k = {alpha} must lie in (0, 1]")));
    }
    Ok(())
}

/// Deterministic step for a fixed action pair.
pub fn step_minimal_with_actions(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    tau: Temperature,
    beta_k: f64,
    alpha_k: f64,
    actions: (usize, usize),
) -> Result<(MinimalInfoState, StepOutcome)> {
    check_step(beta_k, "beta_k")?;
    check_alpha(alpha_k)?;
    state.check(game)?;
    let c = game.counts();
    if actions.0 >= c.n1 || actions.1 >= c.n2 {
        return Err(GameError::InvalidInput(format!("action pair {actions:?} out of range")));
    }
    let next_joint = smoothed_strategies(state, tau.value(), beta_k)?;
    step_given(game, state, &next_joint, alpha_k, actions.0, actions.1)
}

pub fn step_minimal<R: Rng + ?Sized>(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    tau: Temperature,
    beta_k: f64,
    alpha_k: f64,
    rng: &mut R,
) -> Result<(MinimalInfoState, StepOutcome)> {
    let actions = sample_actions(state, rng);
    step_minimal_with_actions(game, state, tau, beta_k, alpha_k, actions)
}

/// All action pairs with their probabilities under the current joint strategy.
fn action_pairs(state: &MinimalInfoState) -> Vec<(usize, usize, f64)> {
    let p1 = state.joint.p1.probs();
    let p2 = state.joint.p2.probs();
    let mut out = Vec::with_capacity(p1.len() * p2.len());
    for (a1, &x) in p1.iter().enumerate() {
        for (a2, &y) in p2.iter().enumerate() {
            if x > 0.0 && y > 0.0 {
                out.push((a1, a2, x * y));
            }
        }
    }
    out
}

/// `E[q^i_{k+1} - q^i_k | state]` for both players, by enumeration.
pub fn td_expected_increment(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    alpha: f64,
) -> Result<[Vec<f64>; 2]> {
    state.check(game)?;
    let mut e1 = vec![0.0; state.q1.len()];
    let mut e2 = vec![0.0; state.q2.len()];
    for (a1, a2, w) in action_pairs(state) {
        let p1 = state.joint.p1.probs()[a1];
        let p2 = state.joint.p2.probs()[a2];
        e1[a1] += w * alpha / p1 * (game.r1().get(a1, a2) - state.q1[a1]);
        e2[a2] += w * alpha / p2 * (game.r2().get(a2, a1) - state.q2[a2]);
    }
    Ok([e1, e2])
}

/// `E[||F^i||^2 | state, A^{-i} = a_opp]`, where `F^i` is the importance-weighted
/// TD direction: `sum_a (R^i(a, a_opp) - q^i(a))^2 / pi^i(a)`.
pub fn td_second_moment(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    player: Player,
    a_opp: usize,
) -> Result<f64> {
    state.check(game)?;
    let m = game.payoff(player);
    if a_opp >= m.cols() {
        return Err(GameError::InvalidInput(format!("opponent action {a_opp} out of range")));
    }
    let pi = state.joint.get(player).probs();
    let q = state.q(player);
    Ok((0..m.rows())
        .filter(|&a| pi[a] > 0.0)
        .map(|a| {
            let d = m.get(a, a_opp) - q[a];
            d * d / pi[a]
        })
        .sum())
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 0.5) {
        return Err(GameError::InvalidParameter(format!("r must lie in (0, 0.5), got {r}")));
    }
    Ok(())
}

fn check_unit_closed(x: f64, name: &str) -> Result<()> {
    if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
        return Err(GameError::InvalidParameter(format!("{name} = {x} must lie in [0, 1]")));
    }
    Ok(())
}

/// Exact `E[W_{k+1} | state]` against the one-step bound
/// `((1-a)^2 + 3 A^2 (1-a) b / (r tau^3)) W_k + 4 A a^2 / delta + 4 A^2 b^2 + r (1-a) b V_k`,
/// with `delta` the current minimum action probability.
pub fn conditional_w_drift_oracle(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    tau: Temperature,
    beta: f64,
    alpha: f64,
    r: f64,
) -> Result<Certificate> {
    state.check(game)?;
    check_unit_closed(beta, "beta")?;
    check_unit_closed(alpha, "alpha")?;
    check_r(r)?;
    let t = tau.value();
    let a = game.a_max() as f64;
    let delta = state.joint.min_mass();
    let next_joint = smoothed_strategies(state, t, beta)?;
    let mut lhs = 0.0;
    for (a1, a2, w) in action_pairs(state) {
        let (next, _) = step_given(game, state, &next_joint, alpha, a1, a2)?;
        lhs += w * lyap_w_raw(game, next.joint.p1.probs(), next.joint.p2.probs(), &next.q1, &next.q2);
    }
    let p1 = state.joint.p1.probs();
    let p2 = state.joint.p2.probs();
    let w_k = lyap_w_raw(game, p1, p2, &state.q1, &state.q2);
    let v_k = lyap_v_raw(game, p1, p2, t);
    let rhs = ((1.0 - alpha).powi(2) + 3.0 * a * a * (1.0 - alpha) * beta / (r * t.powi(3))) * w_k
        + 4.0 * a * alpha * alpha / delta
        + 4.0 * a * a * beta * beta
        + r * (1.0 - alpha) * beta * v_k;
    Ok(Certificate::new(lhs, rhs))
}

/// Deterministic strategy drift:
/// `V(pi_{k+1}) <= (1 - b(1-r)) V_k + 2 A^2 b^2 / tau + (2A / (r tau^3)) W_k + 4 b tau log A`.
pub fn conditional_v_drift_certificate(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    tau: Temperature,
    beta: f64,
    r: f64,
) -> Result<Certificate> {
    state.check(game)?;
    check_unit_closed(beta, "beta")?;
    check_r(r)?;
    let t = tau.value();
    let a = game.a_max() as f64;
    let next = smoothed_strategies(state, t, beta)?;
    let lhs = lyap_v_raw(game, next.p1.probs(), next.p2.probs(), t);
    let p1 = state.joint.p1.probs();
    let p2 = state.joint.p2.probs();
    let v_k = lyap_v_raw(game, p1, p2, t);
    let w_k = lyap_w_raw(game, p1, p2, &state.q1, &state.q2);
    let rhs = (1.0 - beta * (1.0 - r)) * v_k
        + 2.0 * a * a * beta * beta / t
        + 2.0 * a / (r * t.powi(3)) * w_k
        + 4.0 * beta * t * a.ln();
    Ok(Certificate::new(lhs, rhs))
}

pub fn conditional_v_drift_check(
    game: &ZeroSumGame,
    state: &MinimalInfoState,
    tau: Temperature,
    beta: f64,
    r: f64,
) -> Result<bool> {
    Ok(conditional_v_drift_certificate(game, state, tau, beta, r)?.satisfied)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimalRunConfig {
    pub tau: Temperature,
    pub c_sep: f64,
    pub schedule: StepsizeSchedule,
    pub k_total: u64,
    pub seed: u64,
    pub record_every: u64,
    /// Threshold for the delta-good column; `None` leaves it empty.
    pub delta: Option<f64>,
}

impl MinimalRunConfig {
    pub fn from_params(params: &MinimalInfoParams, k_total: u64, seed: u64) -> Result<Self> {
        Ok(Self {
            tau: params.tau,
            c_sep: params.c_sep,
            schedule: params.schedule()?,
            k_total,
            seed,
            record_every: 1,
            delta: Some(params.delta),
        })
    }

    pub fn alpha_at(&self, k: u64) -> Result<f64> {
        Ok(self.schedule.beta_at(k)? / self.c_sep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimalTraceRecord {
    pub k: u64,
    pub beta_k: f64,
    pub alpha_k: f64,
    pub ng: f64,
    pub v: f64,
    pub w: f64,
    pub t: f64,
    pub min_mass_p1: f64,
    pub min_mass_p2: f64,
    /// Whether every iterate up to `k` kept all probabilities at least delta.
    pub delta_good: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalRun {
    pub trace: Vec<MinimalTraceRecord>,
    /// Steps where `alpha_k / pi^i_k(A^i) > 1` for some player.
    pub ratio_violations: u64,
    /// Steps after which some q component left [-1, 1].
    pub q_range_violations: u64,
    /// Iterates where `min_a pi^i_k(a) < (1/A_max) prod_{j<k} (1 - beta_j)`.
    pub envelope_violations: u64,
    pub final_state: MinimalInfoState,
}

fn q_in_range(q: &[f64]) -> bool {
    q.iter().all(|x| (-1.0..=1.0).contains(x))
}

/// Runs the dynamics from uniform strategies and zero estimates.
pub fn run_minimal(game: &ZeroSumGame, cfg: &MinimalRunConfig) -> Result<MinimalRun> {
    run_minimal_from(game, MinimalInfoState::uniform(game), cfg)
}

pub fn run_minimal_from(
    game: &ZeroSumGame,
    init: MinimalInfoState,
    cfg: &MinimalRunConfig,
) -> Result<MinimalRun> {
    if cfg.k_total == 0 {
        return Err(GameError::InvalidParameter("K must be at least 1".into()));
    }
    if cfg.record_every == 0 {
        return Err(GameError::InvalidParameter("record_every must be at least 1".into()));
    }
    if !(cfg.c_sep.is_finite() && cfg.c_sep > 0.0) {
        return Err(GameError::InvalidParameter(format!(
            "c_sep must be positive, got {}",
            cfg.c_sep
        )));
    }
    cfg.schedule.validate_relaxed()?;
    init.check(game)?;
    let tau = cfg.tau;
    let a_max = game.a_max() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let record = |s: &MinimalInfoState| -> Result<MinimalTraceRecord> {
        let p1 = s.joint.p1.probs();
        let p2 = s.joint.p2.probs();
        let v = lyap_v_raw(game, p1, p2, tau.value());
        let w = lyap_w_raw(game, p1, p2, &s.q1, &s.q2);
        Ok(MinimalTraceRecord {
            k: s.k,
            beta_k: cfg.schedule.beta_at(s.k)?,
            alpha_k: cfg.alpha_at(s.k)?,
            ng: game.nash_gap(&s.joint)?,
            v,
            w,
            t: v + w,
            min_mass_p1: s.joint.p1.min_mass(),
            min_mass_p2: s.joint.p2.min_mass(),
            delta_good: cfg
                .delta
                .map(|d| s.min_mass_history[0] >= d && s.min_mass_history[1] >= d),
        })
    };

    let mut state = init;
    let mut envelope = 1.0 / a_max;
    let mut envelope_violations = 0;
    let below = |s: &MinimalInfoState, env: f64| s.joint.p1.min_mass() < env || s.joint.p2.min_mass() < env;
    if below(&state, envelope) {
        envelope_violations += 1;
    }
    let mut trace = vec![record(&state)?];
    let mut ratio_violations = 0;
    let mut q_range_violations = 0;
    for k in 1..=cfg.k_total {
        let beta = cfg.schedule.beta_at(k)?;
        let alpha = cfg.alpha_at(k)?;
        if alpha > 1.0 {
            return Err(GameError::InvalidStepsize(format!(
                "alpha_{k} = beta_k / c_sep = {alpha} exceeds 1"
            )));
        }
        let (next, outcome) = step_minimal(game, &state, tau, beta, alpha, &mut rng)?;
        if outcome.ratio_violation {
            ratio_violations += 1;
        }
        if !q_in_range(&next.q1) || !q_in_range(&next.q2) {
            q_range_violations += 1;
        }
        envelope *= 1.0 - beta;
        if below(&next, envelope) {
            envelope_violations += 1;
        }
        state = next;
        if state.k.is_multiple_of(cfg.record_every) || k == cfg.k_total {
            trace.push(record(&state)?);
        }
    }
    Ok(MinimalRun {
        trace,
        ratio_violations,
        q_range_violations,
        envelope_violations,
        final_state: state,
    })
}

/// A convenience for tests and examples: a state with the given strategies
/// and estimates.
pub fn state_from_parts(p1: Vec<f64>, p2: Vec<f64>, q1: Vec<f64>, q2: Vec<f64>) -> Result<MinimalInfoState> {
    Ok(MinimalInfoState::new(
        JointStrategy::new(MixedStrategy::new(p1)?, MixedStrategy::new(p2)?),
        q1,
        q2,
    ))
}
