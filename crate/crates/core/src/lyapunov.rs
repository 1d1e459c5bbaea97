//! Lyapunov functions for the strategy and q-estimate processes, the
//! Danskin gradient of the smoothed potential, and the drift inequalities
//! evaluated as numerical certificates.
//!
//! Notation: for player `i`, `q_i = R^i pi^{-i}` is the local payoff vector.
//!
//! * `V    = sum_i tau * logsumexp(q_i / tau)`  (smoothed best-response value)
//! * `V_H  = sum_i max_a q_i(a)`
//! * `V_alt = V - tau * sum_i H(pi^i)`
//! * `V_KL = sum_i KL(pi^i || sigma_tau(q_i))`
//! * `W    = sum_i || qhat_i - q_i ||^2` for estimates `qhat_i`
//! * `T    = V + W`

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{dot, JointStrategy, Player, ZeroSumGame};
use crate::smoothed::{entropy_raw, log_softmax_raw, smoothed_max_raw, softmax_raw, Temperature};

/// Absolute slack granted to every certificate for roundoff.
pub const CERT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub v: f64,
    pub v_h: f64,
    pub v_alt: f64,
    pub v_kl: f64,
    pub w: f64,
    pub t: f64,
}

impl LyapunovReport {
    pub fn evaluate(
        game: &ZeroSumGame,
        joint: &JointStrategy,
        q1: &[f64],
        q2: &[f64],
        tau: Temperature,
    ) -> Result<Self> {
        let v = lyap_v(game, joint, tau)?;
        let w = lyap_w(game, joint, q1, q2)?;
        Ok(Self {
            v,
            v_h: lyap_v_harris(game, joint)?,
            v_alt: lyap_v_alt(game, joint, tau)?,
            v_kl: lyap_v_kl(game, joint, tau)?,
            w,
            t: v + w,
        })
    }
}

/// One side-by-side evaluation of an inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Certificate {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            satisfied: lhs <= rhs + CERT_SLACK,
        }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn local(game: &ZeroSumGame, joint: &JointStrategy, player: Player) -> Vec<f64> {
    game.local_payoff_raw(player, joint.get(player.opponent()).probs())
}

pub(crate) fn lyap_v_raw(game: &ZeroSumGame, p1: &[f64], p2: &[f64], tau: f64) -> f64 {
    smoothed_max_raw(&game.local_payoff_raw(Player::One, p2), tau)
        + smoothed_max_raw(&game.local_payoff_raw(Player::Two, p1), tau)
}

pub fn lyap_v(game: &ZeroSumGame, joint: &JointStrategy, tau: Temperature) -> Result<f64> {
    game.check_joint(joint)?;
    Ok(lyap_v_raw(game, joint.p1.probs(), joint.p2.probs(), tau.value()))
}

pub fn lyap_v_harris(game: &ZeroSumGame, joint: &JointStrategy) -> Result<f64> {
    game.check_joint(joint)?;
    Ok(Player::BOTH
        .iter()
        .map(|&p| {
            local(game, joint, p)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum())
}

pub fn lyap_v_alt(game: &ZeroSumGame, joint: &JointStrategy, tau: Temperature) -> Result<f64> {
    let v = lyap_v(game, joint, tau)?;
    let h = entropy_raw(joint.p1.probs()) + entropy_raw(joint.p2.probs());
    Ok(v - tau.value() * h)
}

pub fn lyap_v_kl(game: &ZeroSumGame, joint: &JointStrategy, tau: Temperature) -> Result<f64> {
    game.check_joint(joint)?;
    let mut total = 0.0;
    for player in Player::BOTH {
        let log_sigma = log_softmax_raw(&local(game, joint, player), tau.value());
        total += joint
            .get(player)
            .probs()
            .iter()
            .zip(&log_sigma)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &ls)| p * (p.ln() - ls))
            .sum::<f64>();
    }
    Ok(total)
}

pub fn lyap_w(game: &ZeroSumGame, joint: &JointStrategy, q1: &[f64], q2: &[f64]) -> Result<f64> {
    game.check_joint(joint)?;
    let counts = game.counts();
    if q1.len() != counts.n1 || q2.len() != counts.n2 {
        return Err(GameError::DimensionMismatch(format!(
            "q estimates have lengths ({}, {}), expected ({}, {})",
            q1.len(),
            q2.len(),
            counts.n1,
            counts.n2
        )));
    }
    Ok(lyap_w_raw(game, joint.p1.probs(), joint.p2.probs(), q1, q2))
}

pub(crate) fn lyap_w_raw(game: &ZeroSumGame, p1: &[f64], p2: &[f64], q1: &[f64], q2: &[f64]) -> f64 {
    let e1 = game.local_payoff_raw(Player::One, p2);
    let e2 = game.local_payoff_raw(Player::Two, p1);
    sq_dist(q1, &e1) + sq_dist(q2, &e2)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn grad_v_raw(game: &ZeroSumGame, own: &[f64], player: Player, tau: f64) -> Vec<f64> {
    let opp_matrix = game.payoff(player.opponent());
    let sigma = softmax_raw(&opp_matrix.mul_vec(own), tau);
    opp_matrix.tmul_vec(&sigma)
}

/// `nabla_{pi^i} V = (R^{-i})^T sigma_tau(R^{-i} pi^i)`.
pub fn grad_v(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
    player: Player,
) -> Result<Vec<f64>> {
    game.check_joint(joint)?;
    Ok(grad_v_raw(game, joint.get(player).probs(), player, tau.value()))
}

/// First-order drift of `V` along the full-information direction:
/// `sum_i <grad_i V, sigma_tau(R^i pi^{-i}) - pi^i> <= -V + 2 tau log A_max`.
pub fn drift_certificate_full(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
) -> Result<Certificate> {
    game.check_joint(joint)?;
    let mut lhs = 0.0;
    for player in Player::BOTH {
        let g = grad_v_raw(game, joint.get(player).probs(), player, tau.value());
        let target = softmax_raw(&local(game, joint, player), tau.value());
        let dir: Vec<f64> = target
            .iter()
            .zip(joint.get(player).probs())
            .map(|(s, p)| s - p)
            .collect();
        lhs += dot(&g, &dir);
    }
    let rhs = -lyap_v(game, joint, tau)? + 2.0 * tau.value() * game.counts().log_a_max();
    Ok(Certificate::new(lhs, rhs))
}

/// Hessian block `(1/tau) (R^{-i})^T Sigma (R^{-i})` with
/// `Sigma = diag(s) - s s^T`, `s = sigma_tau(R^{-i} pi^i)`.
pub fn hessian_block(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
    player: Player,
) -> Result<Vec<Vec<f64>>> {
    game.check_joint(joint)?;
    let m = game.payoff(player.opponent());
    let s = softmax_raw(&m.mul_vec(joint.get(player).probs()), tau.value());
    let n_own = m.cols();
    let n_opp = m.rows();
    let mut h = vec![vec![0.0; n_own]; n_own];
    for (a, row) in h.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            // sum_c s_c M_ca M_cb - (s^T M_a)(s^T M_b)
            let mut diag_part = 0.0;
            let mut sa = 0.0;
            let mut sb = 0.0;
            for (c, &sc) in s.iter().enumerate().take(n_opp) {
                diag_part += sc * m.get(c, a) * m.get(c, b);
                sa += sc * m.get(c, a);
                sb += sc * m.get(c, b);
            }
            *entry = (diag_part - sa * sb) / tau.value();
        }
    }
    Ok(h)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
pub fn power_iteration(m: &[Vec<f64>], max_iter: usize, tol: f64) -> f64 {
    let n = m.len();
    // deterministic start that is not orthogonal to the usual structured eigenvectors
    let mut x: Vec<f64> = (0..n)
        .map(|j| if j % 2 == 0 { 1.0 } else { -0.5 } + 0.1 * j as f64)
        .collect();
    let norm = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y: Vec<f64> = m.iter().map(|row| dot(row, &x)).collect();
        let next = dot(&x, &y);
        let ny = dot(&y, &y).sqrt();
        if ny == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / ny).collect();
        let done = (next - lambda).abs() <= tol * next.abs().max(1.0);
        lambda = next;
        if done {
            break;
        }
    }
    // final Rayleigh quotient on the normalized iterate
    let y: Vec<f64> = m.iter().map(|row| dot(row, &x)).collect();
    dot(&x, &y).max(lambda)
}

/// Operator norm of the (block-diagonal) Hessian of `V`: max over players.
pub fn hessian_norm_estimate(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for player in Player::BOTH {
        let h = hessian_block(game, joint, tau, player)?;
        best = best.max(power_iteration(&h, 50, 1e-8));
    }
    Ok(best)
}

/// `A_max^2 / tau`, the Hessian bound.
pub fn hessian_bound(game: &ZeroSumGame, tau: Temperature) -> f64 {
    let a = game.a_max() as f64;
    a * a / tau.value()
}

/// `2 A_max^2 / tau`, the stated smoothness constant for the gradient.
pub fn smoothness_constant(game: &ZeroSumGame, tau: Temperature) -> f64 {
    2.0 * hessian_bound(game, tau)
}

/// `V >= (tau / 2) sum_i || sigma_tau(R^i pi^{-i}) - pi^i ||^2`, as a certificate.
pub fn lyap_lower_bound_certificate(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
) -> Result<Certificate> {
    game.check_joint(joint)?;
    let mut dist = 0.0;
    for player in Player::BOTH {
        let target = softmax_raw(&local(game, joint, player), tau.value());
        dist += sq_dist(&target, joint.get(player).probs());
    }
    Ok(Certificate::new(0.5 * tau.value() * dist, lyap_v(game, joint, tau)?))
}

pub fn lyap_lower_bound_check(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
) -> Result<bool> {
    Ok(lyap_lower_bound_certificate(game, joint, tau)?.satisfied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_game, GameKind, MixedStrategy};
    use approx::assert_abs_diff_eq;

    fn t(x: f64) -> Temperature {
        Temperature::new(x).unwrap()
    }

    fn mp() -> ZeroSumGame {
        generate_game(&GameKind::MatchingPennies).unwrap()
    }

    fn corner() -> JointStrategy {
        JointStrategy::new(MixedStrategy::pure(2, 0), MixedStrategy::pure(2, 0))
    }

    // log(e + 1/e), the smoothed max of (1, -1) at tau = 1
    const LSE_1: f64 = 1.126_928_011_042_972_6;

    #[test]
    fn v_examples() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        assert_abs_diff_eq!(lyap_v(&g, &u, t(0.5)).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(lyap_v(&g, &corner(), t(1.0)).unwrap(), 2.0 * LSE_1, epsilon = 1e-14);
        // tau -> 0 at the equilibrium: V -> V_H = 0
        let v = lyap_v(&g, &u, t(1e-6)).unwrap();
        assert!(v.abs() <= 1e-5 * 2f64.ln());
    }

    #[test]
    fn harris_examples() {
        let g = mp();
        assert_eq!(lyap_v_harris(&g, &JointStrategy::uniform(g.counts())).unwrap(), 0.0);
        assert_eq!(lyap_v_harris(&g, &corner()).unwrap(), 2.0);
        let rps = generate_game(&GameKind::RockPaperScissors).unwrap();
        assert_eq!(lyap_v_harris(&rps, &JointStrategy::uniform(rps.counts())).unwrap(), 0.0);
    }

    #[test]
    fn alt_and_kl_examples() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        assert_abs_diff_eq!(lyap_v_alt(&g, &u, t(1.0)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lyap_v_alt(&g, &corner(), t(1.0)).unwrap(), 2.0 * LSE_1, epsilon = 1e-14);
        assert_abs_diff_eq!(lyap_v_kl(&g, &u, t(0.3)).unwrap(), 0.0, epsilon = 1e-15);
        // KL((1,0) || sigma) = -log sigma(0); the two players give the two terms
        let kl = lyap_v_kl(&g, &corner(), t(1.0)).unwrap();
        assert_abs_diff_eq!(kl, 2.0 * LSE_1, epsilon = 1e-13);
        assert_abs_diff_eq!(kl, 0.1269 + 2.1269, epsilon = 1e-3);
    }

    #[test]
    fn w_examples() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        assert_eq!(lyap_w(&g, &u, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(lyap_w(&g, &u, &[0.1, 0.0], &[0.0, 0.0]).unwrap(), 0.01, epsilon = 1e-17);
        assert_eq!(lyap_w(&g, &corner(), &[1.0, -1.0], &[-1.0, 1.0]).unwrap(), 0.0);
        assert!(lyap_w(&g, &u, &[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        assert_eq!(grad_v(&g, &u, t(1.0), Player::One).unwrap(), vec![0.0, 0.0]);
        let gr = grad_v(&g, &corner(), t(1.0), Player::One).unwrap();
        let th = 1f64.tanh();
        assert_abs_diff_eq!(gr[0], th, epsilon = 1e-14);
        assert_abs_diff_eq!(gr[1], -th, epsilon = 1e-14);
        assert_abs_diff_eq!(gr[0], 0.7616, epsilon = 1e-4);
    }

    #[test]
    fn drift_examples() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        let c = drift_certificate_full(&g, &u, t(1.0)).unwrap();
        assert_abs_diff_eq!(c.lhs, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.rhs, 0.0, epsilon = 1e-15);
        assert!(c.satisfied);
        assert!(drift_certificate_full(&g, &corner(), t(1.0)).unwrap().satisfied);
    }

    #[test]
    fn hessian_matching_pennies() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        let h = hessian_block(&g, &u, t(1.0), Player::One).unwrap();
        assert_abs_diff_eq!(h[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h[0][1], -1.0, epsilon = 1e-15);
        let est = hessian_norm_estimate(&g, &u, t(1.0)).unwrap();
        assert_abs_diff_eq!(est, 2.0, epsilon = 1e-8);
        assert!(est <= 4.0);
        assert!(hessian_norm_estimate(&g, &u, t(0.1)).unwrap() <= 40.0 + 1e-8);
    }

    #[test]
    fn lower_bound_examples() {
        let g = mp();
        let u = JointStrategy::uniform(g.counts());
        let c = lyap_lower_bound_certificate(&g, &u, t(1.0)).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.satisfied);
        assert!(lyap_lower_bound_check(&g, &corner(), t(1.0)).unwrap());
    }

    #[test]
    fn report_is_consistent() {
        let g = mp();
        let r = LyapunovReport::evaluate(&g, &corner(), &[0.0, 0.0], &[0.0, 0.0], t(0.2)).unwrap();
        assert_eq!(r.t, r.v + r.w);
        assert!(r.v >= r.v_h);
        assert!(r.v - r.v_h <= 2.0 * 0.2 * 2f64.ln() + 1e-12);
        assert!(g.nash_gap(&corner()).unwrap() <= r.v);
    }
}
