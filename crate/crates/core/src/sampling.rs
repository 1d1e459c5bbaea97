//! Random games and strategies for certificate sweeps and tests.

use rand::Rng;

use crate::game::{generate_game, ActionCount, GameKind, JointStrategy, MixedStrategy, ZeroSumGame};
use crate::minimal::MinimalInfoState;

/// A game with `2..=max_n1` by `2..=max_n2` actions and entries uniform in [-1, 1].
pub fn random_game<R: Rng + ?Sized>(rng: &mut R, max_n1: usize, max_n2: usize) -> ZeroSumGame {
    let n1 = rng.gen_range(2..=max_n1.max(2));
    let n2 = rng.gen_range(2..=max_n2.max(2));
    random_game_sized(rng, n1, n2)
}

pub fn random_game_sized<R: Rng + ?Sized>(rng: &mut R, n1: usize, n2: usize) -> ZeroSumGame {
    generate_game(&GameKind::Random { n1, n2, seed: rng.gen() })
        .expect("random entries are in range by construction")
}

/// An interior strategy with weights `exp(spread * u)`, `u` uniform in [-1, 1].
/// Larger `spread` pushes mass toward the boundary; the smallest probability
/// is at least `exp(-2 spread) / n`.
pub fn random_strategy<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> MixedStrategy {
    let w: Vec<f64> = (0..n).map(|_| (spread * rng.gen_range(-1.0..=1.0)).exp()).collect();
    let s: f64 = w.iter().sum();
    MixedStrategy::renormalized(w.into_iter().map(|x| x / s).collect())
        .expect("positive weights normalize to a strategy")
}

pub fn random_joint<R: Rng + ?Sized>(rng: &mut R, counts: ActionCount, spread: f64) -> JointStrategy {
    JointStrategy::new(
        random_strategy(rng, counts.n1, spread),
        random_strategy(rng, counts.n2, spread),
    )
}

/// `10^u` with `u` uniform in `[log10 lo, log10 hi]`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo.log10()..=hi.log10()))
}

/// A minimal-information state with interior strategies and estimates uniform in [-1, 1].
pub fn random_minimal_state<R: Rng + ?Sized>(
    rng: &mut R,
    game: &ZeroSumGame,
    spread: f64,
) -> MinimalInfoState {
    let c = game.counts();
    let joint = random_joint(rng, c, spread);
    let q1 = (0..c.n1).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let q2 = (0..c.n2).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    MinimalInfoState::new(joint, q1, q2)
}
