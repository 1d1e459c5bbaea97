//! Reference solvers: the exact Nash equilibrium through a dense simplex
//! method, a closed form for 2x2 games, and the entropy-regularized
//! equilibrium through damped fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{JointStrategy, Matrix, MixedStrategy, Player, ZeroSumGame};
use crate::full::step_full_raw;
use crate::smoothed::{regularized_ne_residual, Temperature};

pub const MAX_ACTIONS: usize = 100;
pub const MAX_PIVOTS: u64 = 1_000_000;
/// Tolerance for the two LP values to agree.
pub const VALUE_AGREEMENT_TOL: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Simplex,
    ClosedForm2x2,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub joint: JointStrategy,
    /// Player 1's payoff at the returned point.
    pub value: f64,
    /// Nash gap (exact methods) or regularized fixed-point residual.
    pub residual: f64,
    pub iterations: u64,
    pub method: SolveMethod,
}

/// Solution of `max 1^T y  s.t.  B y <= 1, y >= 0` for a positive matrix `B`.
#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
    pub pivots: u64,
}

/// Dense tableau simplex with Bland's rule. The origin is feasible because
/// the right-hand side is all ones.
pub(crate) fn simplex_packing(b: &Matrix) -> Result<LpSolution> {
    let m = b.rows();
    let n = b.cols();
    let width = n + m + 1;
    // rows 0..m are constraints, row m is the objective (reduced costs)
    let mut tab = vec![vec![0.0; width]; m + 1];
    for (i, row) in tab.iter_mut().take(m).enumerate() {
        for (j, x) in row.iter_mut().take(n).enumerate() {
            *x = b.get(i, j);
        }
        row[n + i] = 1.0;
        row[width - 1] = 1.0;
    }
    tab[m][..n].fill(-1.0);
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0u64;
    while let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -PIVOT_EPS) {
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = tab[i][enter];
            if a > PIVOT_EPS {
                let ratio = tab[i][width - 1] / a;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - PIVOT_EPS || (ratio <= best + PIVOT_EPS && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return Err(GameError::Solver("linear program is unbounded".into()));
        };
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(GameError::Solver(format!("pivot budget of {MAX_PIVOTS} exhausted")));
        }
        let p = tab[row][enter];
        for x in tab[row].iter_mut() {
            *x /= p;
        }
        let pivot_row = tab[row].clone();
        for (i, r) in tab.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[enter];
            if f != 0.0 {
                for (x, &y) in r.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        basis[row] = enter;
    }
    let mut primal = vec![0.0; n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            primal[var] = tab[i][width - 1];
        }
    }
    let dual = (0..m).map(|i| tab[m][n + i]).collect();
    Ok(LpSolution {
        primal,
        dual,
        objective: tab[m][width - 1],
        pivots,
    })
}

fn normalize(v: &[f64]) -> Result<MixedStrategy> {
    let clipped: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    if !(s > 0.0) {
        return Err(GameError::Solver("degenerate LP solution".into()));
    }
    MixedStrategy::renormalized(clipped.into_iter().map(|x| x / s).collect())
}

/// Optimal strategies of the matrix game `m` (row player maximizes):
/// `(row strategy from the dual, column strategy from the primal, value, pivots)`.
pub(crate) fn solve_matrix_game(m: &Matrix) -> Result<(MixedStrategy, MixedStrategy, f64, u64)> {
    let shift = 1.0 - m.min_entry();
    let b = Matrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j) + shift);
    let lp = simplex_packing(&b)?;
    if !(lp.objective > 0.0) {
        return Err(GameError::Solver("non-positive LP optimum".into()));
    }
    let value = 1.0 / lp.objective - shift;
    Ok((normalize(&lp.dual)?, normalize(&lp.primal)?, value, lp.pivots))
}

fn check_size(game: &ZeroSumGame) -> Result<()> {
    let c = game.counts();
    if c.n1 > MAX_ACTIONS || c.n2 > MAX_ACTIONS {
        return Err(GameError::InvalidInput(format!(
            "exact solver supports at most {MAX_ACTIONS} actions per player, got {}x{}",
            c.n1, c.n2
        )));
    }
    Ok(())
}

/// Exact Nash equilibrium. Each player's strategy is the primal solution of
/// the LP in which the opponent is the row player; the two values must agree.
pub fn exact_nash(game: &ZeroSumGame, tol: f64) -> Result<Equilibrium> {
    if !(tol >= 1e-10) {
        return Err(GameError::InvalidParameter(format!("tol must be at least 1e-10, got {tol}")));
    }
    check_size(game)?;
    // R^1: row player 1 maximizes, primal gives player 2's strategy
    let (_, p2, v1, piv1) = solve_matrix_game(game.r1())?;
    // R^2: row player 2 maximizes, primal gives player 1's strategy
    let (_, p1, v2, piv2) = solve_matrix_game(game.r2())?;
    if (v1 + v2).abs() > VALUE_AGREEMENT_TOL {
        return Err(GameError::Solver(format!(
            "player values disagree: v1 = {v1}, v2 = {v2}"
        )));
    }
    let joint = JointStrategy::new(p1, p2);
    let residual = game.nash_gap(&joint)?;
    if residual > tol {
        return Err(GameError::Solver(format!(
            "solution has Nash gap {residual:e} above tolerance {tol:e}"
        )));
    }
    Ok(Equilibrium {
        joint,
        value: v1,
        residual,
        iterations: piv1 + piv2,
        method: SolveMethod::Simplex,
    })
}

/// Closed-form equilibrium of a 2x2 game: a pure saddle point if one
/// exists, otherwise the indifference solution.
pub fn closed_form_2x2(game: &ZeroSumGame) -> Result<Equilibrium> {
    let c = game.counts();
    if c.n1 != 2 || c.n2 != 2 {
        return Err(GameError::DimensionMismatch(format!("expected a 2x2 game, got {}x{}", c.n1, c.n2)));
    }
    let r = game.r1();
    let finish = |p1: MixedStrategy, p2: MixedStrategy| -> Result<Equilibrium> {
        let joint = JointStrategy::new(p1, p2);
        Ok(Equilibrium {
            value: game.expected_payoff(&joint, Player::One)?,
            residual: game.nash_gap(&joint)?,
            joint,
            iterations: 0,
            method: SolveMethod::ClosedForm2x2,
        })
    };
    for i in 0..2 {
        for j in 0..2 {
            let x = r.get(i, j);
            let row_min = x <= r.get(i, 1 - j);
            let col_max = x >= r.get(1 - i, j);
            if row_min && col_max {
                return finish(MixedStrategy::pure(2, i), MixedStrategy::pure(2, j));
            }
        }
    }
    let (a, b, cc, d) = (r.get(0, 0), r.get(0, 1), r.get(1, 0), r.get(1, 1));
    let den = a - b - cc + d;
    let p = (d - cc) / den;
    let q = (d - b) / den;
    finish(
        MixedStrategy::renormalized(vec![p, 1.0 - p])?,
        MixedStrategy::renormalized(vec![q, 1.0 - q])?,
    )
}

/// Damping used by [`regularized_nash`]: `min(0.5, tau / (2 A_max^2))`.
pub fn regularized_damping(game: &ZeroSumGame, tau: Temperature) -> f64 {
    let a = game.a_max() as f64;
    (tau.value() / (2.0 * a * a)).min(0.5)
}

pub fn regularized_nash(
    game: &ZeroSumGame,
    tau: Temperature,
    tol: f64,
    max_iter: u64,
) -> Result<Equilibrium> {
    regularized_nash_from(game, &JointStrategy::uniform(game.counts()), tau, tol, max_iter)
}

/// Damped fixed-point iteration `pi <- pi + beta (sigma_tau(R pi) - pi)` from `init`.
pub fn regularized_nash_from(
    game: &ZeroSumGame,
    init: &JointStrategy,
    tau: Temperature,
    tol: f64,
    max_iter: u64,
) -> Result<Equilibrium> {
    if !(tol >= 1e-12) {
        return Err(GameError::InvalidParameter(format!("tol must be at least 1e-12, got {tol}")));
    }
    game.check_joint(init)?;
    let beta = regularized_damping(game, tau);
    let mut joint = init.clone();
    let mut residual = regularized_ne_residual(game, &joint, tau)?;
    let mut it = 0;
    while residual > tol {
        if it >= max_iter {
            return Err(GameError::NotConverged {
                iterations: it,
                residual,
            });
        }
        joint = step_full_raw(game, &joint, tau.value(), beta)?;
        residual = regularized_ne_residual(game, &joint, tau)?;
        it += 1;
    }
    Ok(Equilibrium {
        value: game.expected_payoff(&joint, Player::One)?,
        joint,
        residual,
        iterations: it,
        method: SolveMethod::Regularized,
    })
}
