//! Zero-sum matrix games and the exact quantities computed on them.
//!
//! Player 1 owns `r1` (n1 x n2), player 2 owns `r2` (n2 x n1), and the pair
//! satisfies `r1 + r2^T = 0`. All payoffs are normalized to `[-1, 1]`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Absolute tolerance for the zero-sum identity and simplex sums.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(GameError::DimensionMismatch("matrix has no rows".into()));
        }
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(GameError::DimensionMismatch("matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(GameError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `M x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `M^T y`
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += m * yi;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn opponent(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "player {}", self.index() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionCount {
    pub n1: usize,
    pub n2: usize,
    pub a_max: usize,
}

impl ActionCount {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(GameError::DimensionMismatch(format!(
                "action counts must be positive, got {n1} x {n2}"
            )));
        }
        Ok(Self {
            n1,
            n2,
            a_max: n1.max(n2),
        })
    }

    pub fn of(&self, player: Player) -> usize {
        match player {
            Player::One => self.n1,
            Player::Two => self.n2,
        }
    }

    /// `log A_max`, the entropy ceiling used throughout the bounds.
    pub fn log_a_max(&self) -> f64 {
        (self.a_max as f64).ln()
    }
}

/// A probability vector over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(GameError::InvalidStrategy("empty probability vector".into()));
        }
        if let Some((a, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(GameError::InvalidStrategy(format!(
                "entry {a} is {p}, expected a nonnegative number"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > STRUCTURE_TOL {
            return Err(GameError::InvalidStrategy(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over zero actions");
        Self(vec![1.0 / n as f64; n])
    }

    pub fn pure(n: usize, action: usize) -> Self {
        assert!(action < n, "action {action} out of range for {n} actions");
        let mut p = vec![0.0; n];
        p[action] = 1.0;
        Self(p)
    }

    /// Divides by the sum and zeroes tiny negative roundoff in `(-1e-15, 0)`.
    ///
    /// Used by the dynamics after each convex-combination update.
    pub fn renormalized(mut probs: Vec<f64>) -> Result<Self> {
        for p in probs.iter_mut() {
            if *p < 0.0 && *p > -1e-15 {
                *p = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(GameError::InvalidStrategy(format!(
                "cannot renormalize vector with sum {sum}"
            )));
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_mass(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = GameError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStrategy {
    pub p1: MixedStrategy,
    pub p2: MixedStrategy,
}

impl JointStrategy {
    pub fn new(p1: MixedStrategy, p2: MixedStrategy) -> Self {
        Self { p1, p2 }
    }

    pub fn uniform(counts: ActionCount) -> Self {
        Self::new(
            MixedStrategy::uniform(counts.n1),
            MixedStrategy::uniform(counts.n2),
        )
    }

    pub fn get(&self, player: Player) -> &MixedStrategy {
        match player {
            Player::One => &self.p1,
            Player::Two => &self.p2,
        }
    }

    pub fn min_mass(&self) -> f64 {
        self.p1.min_mass().min(self.p2.min_mass())
    }
}

/// A validated two-player zero-sum game.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSumGame {
    r1: Matrix,
    r2: Matrix,
    counts: ActionCount,
}

impl ZeroSumGame {
    /// Checks dimensions, the `[-1, 1]` range and `r1 + r2^T = 0`.
    pub fn validate_zero_sum(r1: Matrix, r2: Matrix) -> Result<Self> {
        let (n1, n2) = (r1.rows(), r1.cols());
        if r2.rows() != n2 || r2.cols() != n1 {
            return Err(GameError::DimensionMismatch(format!(
                "r1 is {n1}x{n2} so r2 must be {n2}x{n1}, got {}x{}",
                r2.rows(),
                r2.cols()
            )));
        }
        for (m, transposed) in [(&r1, false), (&r2, true)] {
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    let v = m.get(i, j);
                    if !v.is_finite() || v.abs() > 1.0 {
                        let (row, col) = if transposed { (j, i) } else { (i, j) };
                        return Err(GameError::EntryOutOfRange {
                            row,
                            col,
                            value: v,
                        });
                    }
                }
            }
        }
        for i in 0..n1 {
            for j in 0..n2 {
                let residual = r1.get(i, j) + r2.get(j, i);
                if residual.abs() > STRUCTURE_TOL {
                    return Err(GameError::ZeroSumViolation {
                        row: i,
                        col: j,
                        residual,
                    });
                }
            }
        }
        let counts = ActionCount::new(n1, n2)?;
        Ok(Self { r1, r2, counts })
    }

    /// Builds the game from player 1's matrix, with `r2 = -r1^T`.
    pub fn from_r1(r1: Matrix) -> Result<Self> {
        let r2 = Matrix::from_fn(r1.cols(), r1.rows(), |i, j| -r1.get(j, i));
        Self::validate_zero_sum(r1, r2)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_r1(Matrix::from_rows(rows)?)
    }

    pub fn counts(&self) -> ActionCount {
        self.counts
    }

    pub fn a_max(&self) -> usize {
        self.counts.a_max
    }

    pub fn r1(&self) -> &Matrix {
        &self.r1
    }

    pub fn r2(&self) -> &Matrix {
        &self.r2
    }

    pub fn payoff(&self, player: Player) -> &Matrix {
        match player {
            Player::One => &self.r1,
            Player::Two => &self.r2,
        }
    }

    fn check_len(&self, player: Player, len: usize) -> Result<()> {
        let expected = self.counts.of(player);
        if len != expected {
            return Err(GameError::DimensionMismatch(format!(
                "{player} has {expected} actions, got a vector of length {len}"
            )));
        }
        Ok(())
    }

    pub fn check_joint(&self, joint: &JointStrategy) -> Result<()> {
        self.check_len(Player::One, joint.p1.len())?;
        self.check_len(Player::Two, joint.p2.len())
    }

    /// `R^i pi^{-i}` for an arbitrary opponent vector (no simplex check).
    pub fn local_payoff_raw(&self, player: Player, opp: &[f64]) -> Vec<f64> {
        self.payoff(player).mul_vec(opp)
    }

    /// `R^i pi^{-i}`: expected payoff of each of `player`'s actions.
    pub fn local_payoff(&self, player: Player, opp_strategy: &MixedStrategy) -> Result<Vec<f64>> {
        self.check_len(player.opponent(), opp_strategy.len())?;
        Ok(self.local_payoff_raw(player, opp_strategy.probs()))
    }

    /// `pi^i^T R^i pi^{-i}`
    pub fn expected_payoff(&self, joint: &JointStrategy, player: Player) -> Result<f64> {
        self.check_joint(joint)?;
        let q = self.local_payoff_raw(player, joint.get(player.opponent()).probs());
        Ok(dot(joint.get(player).probs(), &q))
    }

    /// Best pure response; ties go to the lowest action index.
    pub fn best_response_value(
        &self,
        player: Player,
        opp_strategy: &MixedStrategy,
    ) -> Result<(f64, usize)> {
        let q = self.local_payoff(player, opp_strategy)?;
        Ok(argmax_lowest(&q))
    }

    /// Sum over players of the best unilateral improvement.
    pub fn nash_gap(&self, joint: &JointStrategy) -> Result<f64> {
        self.check_joint(joint)?;
        let mut gap = 0.0;
        for player in Player::BOTH {
            let (best, _) = self.best_response_value(player, joint.get(player.opponent()))?;
            gap += best - self.expected_payoff(joint, player)?;
        }
        Ok(gap.max(0.0))
    }

    /// Nash gap by explicit enumeration of every pure deviation, written
    /// directly against matrix entries. Kept separate from [`Self::nash_gap`]
    /// so the two can cross-check each other.
    pub fn nash_gap_vertex_enumeration(&self, joint: &JointStrategy) -> Result<f64> {
        self.check_joint(joint)?;
        let mut gap = 0.0;
        for player in Player::BOTH {
            let m = self.payoff(player);
            let own = joint.get(player).probs();
            let opp = joint.get(player.opponent()).probs();
            let mut current = 0.0;
            for (a, &pa) in own.iter().enumerate() {
                for (b, &pb) in opp.iter().enumerate() {
                    current += pa * m.get(a, b) * pb;
                }
            }
            let mut best_dev = f64::NEG_INFINITY;
            for a in 0..own.len() {
                let mut vertex = 0.0;
                for (b, &pb) in opp.iter().enumerate() {
                    vertex += m.get(a, b) * pb;
                }
                best_dev = best_dev.max(vertex - current);
            }
            gap += best_dev;
        }
        Ok(gap)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn argmax_lowest(v: &[f64]) -> (f64, usize) {
    let mut best = (v[0], 0);
    for (a, &x) in v.iter().enumerate().skip(1) {
        if x > best.0 {
            best = (x, a);
        }
    }
    best
}

/// Built-in game generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    MatchingPennies,
    RockPaperScissors,
    Random { n1: usize, n2: usize, seed: u64 },
}

pub fn generate_game(kind: &GameKind) -> Result<ZeroSumGame> {
    match kind {
        GameKind::MatchingPennies => {
            ZeroSumGame::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]])
        }
        GameKind::RockPaperScissors => ZeroSumGame::from_rows(&[
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ]),
        GameKind::Random { n1, n2, seed } => {
            if *n1 == 0 || *n2 == 0 {
                return Err(GameError::DimensionMismatch(format!(
                    "random game needs positive dimensions, got {n1} x {n2}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let r1 = Matrix::from_fn(*n1, *n2, |_, _| rng.gen_range(-1.0..=1.0));
            ZeroSumGame::from_r1(r1)
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    r1: Vec<Vec<f64>>,
}

impl ZeroSumGame {
    /// Parses `{"r1": [[...], ...]}`; `r2` is derived.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GameFile =
            serde_json::from_str(s).map_err(|e| GameError::Format(e.to_string()))?;
        Self::from_rows(&file.r1)
    }

    pub fn to_json_string(&self) -> String {
        let file = GameFile {
            r1: self.r1.to_rows(),
        };
        serde_json::to_string_pretty(&file).expect("game serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| GameError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s)
    }
}
