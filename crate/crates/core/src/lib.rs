//! Smoothed best-response learning dynamics for two-player zero-sum matrix
//! games, with the Lyapunov functions and drift certificates that govern
//! their convergence.

pub mod equilibrium;
pub mod error;
pub mod full;
pub mod game;
pub mod lyapunov;
pub mod minimal;
pub mod sampling;
pub mod schedule;
pub mod smoothed;
pub mod trace;

pub use error::{GameError, Result};
pub use game::{
    generate_game, ActionCount, GameKind, JointStrategy, Matrix, MixedStrategy, Player, ZeroSumGame,
};
pub use smoothed::Temperature;
