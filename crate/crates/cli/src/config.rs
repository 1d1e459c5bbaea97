use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use smoothbr_core::game::{JointStrategy, MixedStrategy};
use smoothbr_core::schedule::StepsizeSchedule;
use smoothbr_core::{generate_game, GameKind, ZeroSumGame};

use crate::error::Failure;

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSource {
    File { file: PathBuf },
    Generated(GameKind),
}

impl GameSource {
    /// Relative file paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<ZeroSumGame> {
        match self {
            GameSource::File { file } => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                ZeroSumGame::load(&path).map_err(|e| Failure::Config(e.to_string()).into())
            }
            GameSource::Generated(kind) => {
                generate_game(kind).map_err(|e| Failure::Config(e.to_string()).into())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    Minimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FromEpsilon {
    FromEpsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSetting {
    Value(f64),
    Derived(FromEpsilon),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSetting {
    Named(InitKind),
    Explicit { p1: Vec<f64>, p2: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Uniform,
    /// Both players on their first action.
    Corner,
}

impl InitSetting {
    pub fn joint(&self, game: &ZeroSumGame) -> Result<JointStrategy> {
        let c = game.counts();
        let joint = match self {
            InitSetting::Named(InitKind::Uniform) => JointStrategy::uniform(c),
            InitSetting::Named(InitKind::Corner) => {
                JointStrategy::new(MixedStrategy::pure(c.n1, 0), MixedStrategy::pure(c.n2, 0))
            }
            InitSetting::Explicit { p1, p2 } => {
                let conv = |p: &Vec<f64>| {
                    MixedStrategy::new(p.clone()).map_err(|e| Failure::Config(e.to_string()))
                };
                JointStrategy::new(conv(p1)?, conv(p2)?)
            }
        };
        game.check_joint(&joint).map_err(|e| Failure::Config(e.to_string()))?;
        Ok(joint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub mode: Mode,
    pub tau: TauSetting,
    #[serde(default)]
    pub schedule: Option<StepsizeSchedule>,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub record_every: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub init: Option<InitSetting>,
    /// Timescale separation for minimal mode: alpha_k = beta_k / c_sep.
    #[serde(default)]
    pub c_sep: Option<f64>,
    /// Threshold for the delta_good column in minimal mode.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Exponent for the polynomial regime when tau is derived in minimal mode.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub budget: Option<u64>,
}

fn one() -> u64 {
    1
}

fn default_replicas() -> u64 {
    20
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s).with_context(|| format!("in {}", path.display()))
    }

    /// Structural checks that do not need the game.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| -> Result<()> { Err(Failure::Config(m).into()) };
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if let Some(s) = &self.schedule {
            s.validate_relaxed().map_err(|e| Failure::Config(e.to_string()))?;
        }
        match self.tau {
            TauSetting::Value(t) => {
                if self.schedule.is_none() {
                    return bad("a schedule is required unless tau is \"from_epsilon\"".into());
                }
                if !(t.is_finite() && t > 0.0) {
                    return bad(format!("tau must be positive, got {t}"));
                }
            }
            TauSetting::Derived(_) => {
                if self.epsilon.is_none() {
                    return bad("tau = \"from_epsilon\" requires epsilon".into());
                }
                if self.schedule.is_some() {
                    return bad("schedule is derived when tau = \"from_epsilon\"; remove it".into());
                }
                if self.mode == Mode::Minimal && self.nu.is_none() {
                    return bad("minimal mode with tau = \"from_epsilon\" requires nu".into());
                }
            }
        }
        if self.mode == Mode::Minimal {
            if self.seed.is_none() {
                return bad("minimal mode requires a seed".into());
            }
            if matches!(self.tau, TauSetting::Value(_)) && self.c_sep.is_none() {
                return bad("minimal mode requires c_sep".into());
            }
        }
        Ok(())
    }

    pub fn budget(&self, flag: Option<u64>) -> u64 {
        flag.or(self.budget).unwrap_or(DEFAULT_BUDGET)
    }

    /// Total steps the run would take.
    pub fn steps(&self) -> u64 {
        let reps = if self.mode == Mode::Minimal { self.replicas } else { 1 };
        self.k.saturating_mul(reps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "game": "matching_pennies",
        "mode": "full",
        "tau": 0.1,
        "schedule": {"kind": "constant", "beta": 0.1},
        "K": 10,
        "output_dir": "out"
    }"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_json_str(BASE).unwrap();
        assert_eq!(cfg.game, GameSource::Generated(GameKind::MatchingPennies));
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.replicas, 20);
        assert_eq!(cfg.budget(None), DEFAULT_BUDGET);
    }

    #[test]
    fn game_sources() {
        let f: GameSource = serde_json::from_str(r#"{"file": "g.json"}"#).unwrap();
        assert!(matches!(f, GameSource::File { .. }));
        let r: GameSource = serde_json::from_str(r#"{"random": {"n1": 2, "n2": 3, "seed": 4}}"#).unwrap();
        assert_eq!(r, GameSource::Generated(GameKind::Random { n1: 2, n2: 3, seed: 4 }));
    }

    #[test]
    fn unknown_field_rejected() {
        let s = BASE.replace("\"K\"", "\"k_total\": 3, \"K\"");
        assert!(ExperimentConfig::from_json_str(&s).is_err());
    }

    #[test]
    fn invalid_schedule_rejected() {
        let s = BASE.replace("0.1}", "1.5}");
        let err = ExperimentConfig::from_json_str(&s).unwrap_err();
        assert_eq!(crate::error::exit_code(&err), 3);
    }

    #[test]
    fn derived_tau() {
        let s = BASE
            .replace("0.1,\n", "\"from_epsilon\", \"epsilon\": 0.5,\n")
            .replace("\"schedule\": {\"kind\": \"constant\", \"beta\": 0.1},", "");
        let cfg = ExperimentConfig::from_json_str(&s).unwrap();
        assert_eq!(cfg.tau, TauSetting::Derived(FromEpsilon::FromEpsilon));
    }

    #[test]
    fn minimal_needs_seed() {
        let s = BASE.replace("\"full\"", "\"minimal\", \"c_sep\": 0.5");
        assert!(ExperimentConfig::from_json_str(&s).is_err());
        let s = BASE.replace("\"full\"", "\"minimal\", \"c_sep\": 0.5, \"seed\": 1");
        assert!(ExperimentConfig::from_json_str(&s).is_ok());
    }
}
