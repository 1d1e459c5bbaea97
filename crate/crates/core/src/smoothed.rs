//! Shannon entropy and the entropy-regularized (softmax) best response.
//!
//! Every exponential is evaluated relative to the maximum entry so that
//! `q / tau` can reach magnitudes around `1e6` without overflow.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{JointStrategy, MixedStrategy, Player, ZeroSumGame};

/// Smallest admissible temperature. Below this the softmax saturates to a
/// vertex in double precision.
pub const MIN_TEMPERATURE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau < MIN_TEMPERATURE {
            return Err(GameError::InvalidTemperature(tau));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = GameError;

    fn try_from(tau: f64) -> Result<Self> {
        Self::new(tau)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// `-sum p log p` with `0 log 0 = 0`.
pub fn shannon_entropy(p: &MixedStrategy) -> f64 {
    entropy_raw(p.probs())
}

pub(crate) fn entropy_raw(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

fn check_finite(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return Err(GameError::InvalidInput("empty payoff vector".into()));
    }
    if let Some(x) = q.iter().find(|x| !x.is_finite()) {
        return Err(GameError::InvalidInput(format!("non-finite payoff entry {x}")));
    }
    Ok(())
}

fn max_of(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Shifted softmax without input validation; the caller guarantees finite `q`.
pub(crate) fn softmax_raw(q: &[f64], tau: f64) -> Vec<f64> {
    let m = max_of(q);
    let mut out: Vec<f64> = q.iter().map(|&x| ((x - m) / tau).exp()).collect();
    let z: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= z;
    }
    out
}

/// `tau * log sum exp(q / tau)`, shifted by the max.
pub(crate) fn smoothed_max_raw(q: &[f64], tau: f64) -> f64 {
    let m = max_of(q);
    let z: f64 = q.iter().map(|&x| ((x - m) / tau).exp()).sum();
    m + tau * z.ln()
}

/// `log sigma_tau(q)(a)` for every `a`, without forming the probabilities.
pub(crate) fn log_softmax_raw(q: &[f64], tau: f64) -> Vec<f64> {
    let m = max_of(q);
    let z: f64 = q.iter().map(|&x| ((x - m) / tau).exp()).sum();
    let log_z = z.ln();
    q.iter().map(|&x| (x - m) / tau - log_z).collect()
}

/// The tau-regularized best response `sigma_tau(q)`.
pub fn softmax(q: &[f64], tau: Temperature) -> Result<MixedStrategy> {
    check_finite(q)?;
    MixedStrategy::new(softmax_raw(q, tau.value()))
}

/// `max_p { p^T q + tau H(p) } = tau log sum_a exp(q(a) / tau)`.
pub fn regularized_best_response_value(q: &[f64], tau: Temperature) -> Result<f64> {
    check_finite(q)?;
    Ok(smoothed_max_raw(q, tau.value()))
}

/// `max_i || pi^i - sigma_tau(R^i pi^{-i}) ||_inf`; zero exactly at the
/// tau-regularized equilibrium.
pub fn regularized_ne_residual(
    game: &ZeroSumGame,
    joint: &JointStrategy,
    tau: Temperature,
) -> Result<f64> {
    game.check_joint(joint)?;
    let mut worst: f64 = 0.0;
    for player in Player::BOTH {
        let q = game.local_payoff_raw(player, joint.get(player.opponent()).probs());
        let target = softmax_raw(&q, tau.value());
        for (p, s) in joint.get(player).probs().iter().zip(&target) {
            worst = worst.max((p - s).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_game, GameKind};
    use approx::assert_abs_diff_eq;

    fn t(x: f64) -> Temperature {
        Temperature::new(x).unwrap()
    }

    #[test]
    fn temperature_bounds() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(1e-9).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
        assert!(Temperature::new(1e-8).is_ok());
    }

    #[test]
    fn entropy_values() {
        assert_abs_diff_eq!(
            shannon_entropy(&MixedStrategy::uniform(4)),
            4f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(shannon_entropy(&MixedStrategy::pure(3, 0)), 0.0);
        assert_abs_diff_eq!(
            shannon_entropy(&MixedStrategy::uniform(2)),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn softmax_values() {
        let u = softmax(&[0.0, 0.0, 0.0], t(0.3)).unwrap();
        for p in u.probs() {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let s = softmax(&[1.0, 0.0], t(1.0)).unwrap();
        assert_abs_diff_eq!(s.probs()[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_abs_diff_eq!(s.probs()[1], 0.268_941_421_369_995_1, epsilon = 1e-12);
    }

    #[test]
    fn softmax_extreme_inputs_stay_finite() {
        let s = softmax(&[1000.0, 0.0], t(1.0)).unwrap();
        assert_eq!(s.probs()[0], 1.0);
        assert!(s.probs()[1] >= 0.0 && s.probs()[1] < 1e-300);
        let s = softmax(&[1.0, -1.0], t(1e-6)).unwrap();
        assert!(s.probs().iter().all(|p| p.is_finite()));
        assert!(softmax(&[f64::NAN, 0.0], t(1.0)).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0], t(1.0)).is_err());
    }

    #[test]
    fn smoothed_max_values() {
        assert_abs_diff_eq!(
            regularized_best_response_value(&[0.0, 0.0], t(0.5)).unwrap(),
            0.5 * 2f64.ln(),
            epsilon = 1e-15
        );
        let expected = (1f64.exp() + (-1f64).exp()).ln();
        assert_abs_diff_eq!(
            regularized_best_response_value(&[1.0, -1.0], t(1.0)).unwrap(),
            expected,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(expected, 1.126_928_011_042_972_6, epsilon = 1e-12);
        assert_abs_diff_eq!(
            regularized_best_response_value(&[1.0, -1.0], t(0.01)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn residual_examples() {
        let g = generate_game(&GameKind::MatchingPennies).unwrap();
        let u = JointStrategy::uniform(g.counts());
        assert_eq!(regularized_ne_residual(&g, &u, t(0.7)).unwrap(), 0.0);
        let c = JointStrategy::new(MixedStrategy::pure(2, 0), MixedStrategy::pure(2, 0));
        let r = regularized_ne_residual(&g, &c, t(1.0)).unwrap();
        // sigma((1,-1)) = (e, 1/e) / (e + 1/e)
        let s0 = 1f64.exp() / (1f64.exp() + (-1f64).exp());
        assert_abs_diff_eq!(r, s0, epsilon = 1e-14);
        assert_abs_diff_eq!(r, 0.8808, epsilon = 1e-4);
    }

    #[test]
    fn residual_flattens_with_temperature() {
        let g = generate_game(&GameKind::Random { n1: 3, n2: 4, seed: 11 }).unwrap();
        let u = JointStrategy::uniform(g.counts());
        let r: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&tau| regularized_ne_residual(&g, &u, t(tau)).unwrap())
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2]);
        assert!(r[2] < 1e-3);
    }
}
