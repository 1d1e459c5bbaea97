use anyhow::Result;
use serde::Serialize;
use smoothbr_core::equilibrium::{exact_nash, regularized_nash, SolveMethod};
use smoothbr_core::{Temperature, ZeroSumGame};

use crate::error::Failure;

pub const DEFAULT_EXACT_TOL: f64 = 1e-9;
pub const DEFAULT_REGULARIZED_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: u64 = 10_000_000;

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub value: f64,
    pub residual: f64,
    pub method: SolveMethod,
}

/// Exact equilibrium, or the tau-regularized one when `tau` is given.
pub fn solve(game: &ZeroSumGame, tau: Option<f64>, tol: Option<f64>) -> Result<Solution> {
    let eq = match tau {
        None => exact_nash(game, tol.unwrap_or(DEFAULT_EXACT_TOL))?,
        Some(t) => {
            let tau = Temperature::new(t).map_err(|e| Failure::Config(e.to_string()))?;
            regularized_nash(game, tau, tol.unwrap_or(DEFAULT_REGULARIZED_TOL), DEFAULT_MAX_ITER)?
        }
    };
    Ok(Solution {
        p1: eq.joint.p1.probs().to_vec(),
        p2: eq.joint.p2.probs().to_vec(),
        value: eq.value,
        residual: eq.residual,
        method: eq.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_game() {
        let g = ZeroSumGame::from_rows(&[vec![1.0, -1.0], vec![-0.5, 0.5]]).unwrap();
        let s = solve(&g, None, None).unwrap();
        assert!((s.p1[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((s.p2[0] - 0.5).abs() < 1e-9);
        assert!(s.value.abs() < 1e-9);
        assert_eq!(s.method, SolveMethod::Simplex);
        let r = solve(&g, Some(0.5), None).unwrap();
        assert_eq!(r.method, SolveMethod::Regularized);
        assert!(r.residual <= DEFAULT_REGULARIZED_TOL);
    }
}
