//! Stepsize schedules, parameter prescriptions for both dynamics, and the
//! predicted iteration counts (required iterations, and the number of
//! iterations for which uniform-start iterates provably stay away from the
//! simplex boundary).

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::smoothed::Temperature;

/// Upper cap applied by [`StepsizeSchedule::beta_at`]. The inverse-linear
/// schedule has `beta > 1`, so its first step would otherwise leave (0, 1).
pub const STEP_CAP: f64 = 1.0 - 1e-9;

/// Width at which the bisections for `r` and `xi` stop.
pub const BISECTION_WIDTH: f64 = 1e-12;

/// Constant in front of `A_max^3 / eps^2` in the full-information iteration counts.
pub const FULL_INFO_CONSTANT: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    InverseLinear,
    InversePolynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsizeSchedule {
    Constant { beta: f64 },
    InverseLinear { beta: f64 },
    InversePolynomial { beta: f64, eta: f64, k0: u64 },
}

/// `(2 eta / beta)^{1 / (1 - eta)}`, the smallest admissible offset.
pub fn min_offset(beta: f64, eta: f64) -> f64 {
    (2.0 * eta / beta).powf(1.0 / (1.0 - eta))
}

fn in_open_unit(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x < 1.0
}

impl StepsizeSchedule {
    pub fn constant(beta: f64) -> Result<Self> {
        let s = Self::Constant { beta };
        s.validate()?;
        Ok(s)
    }

    pub fn inverse_linear(beta: f64) -> Result<Self> {
        let s = Self::InverseLinear { beta };
        s.validate()?;
        Ok(s)
    }

    pub fn inverse_polynomial(beta: f64, eta: f64, k0: u64) -> Result<Self> {
        let s = Self::InversePolynomial { beta, eta, k0 };
        s.validate()?;
        Ok(s)
    }

    /// Inverse-polynomial schedule with the smallest admissible integer offset.
    pub fn inverse_polynomial_min_offset(beta: f64, eta: f64) -> Result<Self> {
        if !in_open_unit(beta) || !in_open_unit(eta) {
            return Err(GameError::InvalidStepsize(format!(
                "inverse_polynomial needs beta, eta in (0, 1), got beta = {beta}, eta = {eta}"
            )));
        }
        Self::inverse_polynomial(beta, eta, ceil_to_u64(min_offset(beta, eta), "k0")?)
    }

    pub fn kind(&self) -> ScheduleKind {
        match self {
            Self::Constant { .. } => ScheduleKind::Constant,
            Self::InverseLinear { .. } => ScheduleKind::InverseLinear,
            Self::InversePolynomial { .. } => ScheduleKind::InversePolynomial,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Self::Constant { beta } | Self::InverseLinear { beta } => beta,
            Self::InversePolynomial { beta, .. } => beta,
        }
    }

    /// Full validation, including the offset condition for inverse-polynomial decay.
    pub fn validate(&self) -> Result<()> {
        self.validate_relaxed()?;
        if let Self::InversePolynomial { beta, eta, k0 } = *self {
            let need = min_offset(beta, eta);
            if (k0 as f64) < need {
                return Err(GameError::InvalidStepsize(format!(
                    "k0 = {k0} is below (2 eta / beta)^(1 / (1 - eta)) = {need}"
                )));
            }
        }
        Ok(())
    }

    /// Range checks only; the inverse-polynomial offset condition is skipped.
    /// Used for empirical runs with hand-picked schedules.
    pub fn validate_relaxed(&self) -> Result<()> {
        match *self {
            Self::Constant { beta } if !in_open_unit(beta) => Err(GameError::InvalidStepsize(
                format!("constant beta must lie in (0, 1), got {beta}"),
            )),
            Self::InverseLinear { beta } if !(beta.is_finite() && beta > 1.0 && beta <= 2.0) => {
                Err(GameError::InvalidStepsize(format!(
                    "inverse_linear beta must lie in (1, 2], got {beta}"
                )))
            }
            Self::InversePolynomial { beta, eta, .. } if !in_open_unit(beta) || !in_open_unit(eta) => {
                Err(GameError::InvalidStepsize(format!(
                    "inverse_polynomial needs beta, eta in (0, 1), got beta = {beta}, eta = {eta}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Does the schedule satisfy the offset condition? Always true for the
    /// other kinds.
    pub fn offset_admissible(&self) -> bool {
        match *self {
            Self::InversePolynomial { beta, eta, k0 } => k0 as f64 >= min_offset(beta, eta),
            _ => true,
        }
    }

    /// The stepsize at iteration `k >= 1`, capped at [`STEP_CAP`].
    pub fn beta_at(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(GameError::InvalidStepsize("iterations are numbered from 1".into()));
        }
        let raw = match *self {
            Self::Constant { beta } => beta,
            Self::InverseLinear { beta } => beta / k as f64,
            Self::InversePolynomial { beta, eta, k0 } => beta / (k as f64 + k0 as f64).powf(eta),
        };
        Ok(raw.min(STEP_CAP))
    }
}

fn ceil_to_u64(x: f64, what: &'static str) -> Result<u64> {
    to_u64(x.ceil(), what)
}

fn to_u64(x: f64, what: &'static str) -> Result<u64> {
    if x.is_nan() {
        return Err(GameError::InvalidParameter(format!("{what} is NaN")));
    }
    if x <= 0.0 {
        return Ok(0);
    }
    // 2^64 is exactly representable; anything at or above it does not fit
    if x >= 18_446_744_073_709_551_616.0 {
        return Err(GameError::Overflow(what));
    }
    Ok(x as u64)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !in_open_unit(epsilon) {
        return Err(GameError::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_a_max(a_max: usize) -> Result<()> {
    if a_max < 2 {
        return Err(GameError::InvalidParameter(format!(
            "A_max must be at least 2, got {a_max}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FullInfoRegime {
    /// beta and tau are both prescribed from epsilon.
    Constant,
    InverseLinear { beta: f64, tau: f64 },
    InversePolynomial { beta: f64, eta: f64, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullInfoParams {
    pub tau: Temperature,
    pub schedule: StepsizeSchedule,
    pub k_predicted: u64,
}

/// Parameters and iteration-count prediction for the full-information dynamics.
/// `v1` is the initial value of `V` and only enters the constant regime.
pub fn full_info_params(
    epsilon: f64,
    a_max: usize,
    regime: FullInfoRegime,
    v1: f64,
) -> Result<FullInfoParams> {
    check_epsilon(epsilon)?;
    if a_max == 0 {
        return Err(GameError::InvalidParameter("A_max must be positive".into()));
    }
    let a3 = (a_max as f64).powi(3);
    let scale = FULL_INFO_CONSTANT * a3 / (epsilon * epsilon);
    match regime {
        FullInfoRegime::Constant => {
            if !v1.is_finite() {
                return Err(GameError::InvalidParameter(format!("V_1 must be finite, got {v1}")));
            }
            let beta = 1.0 / scale;
            let tau = Temperature::new((a_max as f64 * beta).sqrt())?;
            let k = scale * (v1 / epsilon).ln().max(0.0);
            Ok(FullInfoParams {
                tau,
                schedule: StepsizeSchedule::constant(beta)?,
                k_predicted: ceil_to_u64(k, "k_predicted")?,
            })
        }
        FullInfoRegime::InverseLinear { beta, tau } => Ok(FullInfoParams {
            tau: Temperature::new(tau)?,
            schedule: StepsizeSchedule::inverse_linear(beta)?,
            k_predicted: ceil_to_u64(1.0 + scale, "k_predicted")?,
        }),
        FullInfoRegime::InversePolynomial { beta, eta, tau } => {
            let schedule = StepsizeSchedule::inverse_polynomial_min_offset(beta, eta)?;
            let k = 1.0 + (scale * beta).powf(1.0 / eta);
            Ok(FullInfoParams {
                tau: Temperature::new(tau)?,
                schedule,
                k_predicted: ceil_to_u64(k, "k_predicted")?,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MinimalRegime {
    Constant,
    InversePolynomial { eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimalInfoParams {
    pub epsilon: f64,
    pub nu: f64,
    pub r: f64,
    pub delta: f64,
    pub tau: Temperature,
    pub c_sep: f64,
    pub beta: f64,
    pub eta: Option<f64>,
    pub k0: Option<u64>,
    pub kind: ScheduleKind,
    pub xi: f64,
}

impl MinimalInfoParams {
    pub fn schedule(&self) -> Result<StepsizeSchedule> {
        match (self.kind, self.eta, self.k0) {
            (ScheduleKind::Constant, _, _) => StepsizeSchedule::constant(self.beta),
            (ScheduleKind::InversePolynomial, Some(eta), Some(k0)) => {
                StepsizeSchedule::inverse_polynomial(self.beta, eta, k0)
            }
            _ => Err(GameError::InvalidParameter(
                "minimal-information parameters need a constant or inverse_polynomial schedule with eta and k0"
                    .into(),
            )),
        }
    }

    pub fn alpha_at(&self, k: u64) -> Result<f64> {
        Ok(self.schedule()?.beta_at(k)? / self.c_sep)
    }
}

/// `tau`, `c_sep` and `beta` for a given `r`.
fn tau_csep_beta(epsilon: f64, a_max: usize, delta: f64, r: f64) -> (f64, f64, f64) {
    let a = a_max as f64;
    let tau = (1.0 - 2.0 * r) * epsilon / (12.0 * a.ln());
    let c_sep = r * tau.powi(3) / (6.0 * a * a);
    let beta = (1.0 - 2.0 * r) * c_sep * c_sep * delta * epsilon / (30.0 * a * a);
    (tau, c_sep, beta)
}

fn boundary_delta(epsilon: f64, nu: f64, a_max: usize, t1: f64, regime: MinimalRegime) -> f64 {
    let base = (epsilon / (3.0 * t1)).powf(1.0 + nu) / a_max as f64;
    match regime {
        MinimalRegime::Constant => base,
        MinimalRegime::InversePolynomial { .. } => base * std::f64::consts::E,
    }
}

/// Smallest `xi > 1` with `log(1 - beta1) >= -xi * beta1`, by bisection.
pub fn xi_for(beta1: f64) -> Result<f64> {
    if !in_open_unit(beta1) {
        return Err(GameError::InvalidParameter(format!(
            "xi needs beta_1 in (0, 1), got {beta1}"
        )));
    }
    let ok = |xi: f64| (-beta1).ln_1p() + xi * beta1 >= 0.0;
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !ok(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

struct Candidate {
    params: MinimalInfoParams,
    feasible: bool,
}

fn candidate(
    epsilon: f64,
    nu: f64,
    a_max: usize,
    t1: f64,
    regime: MinimalRegime,
    r: f64,
) -> Result<Candidate> {
    let delta = boundary_delta(epsilon, nu, a_max, t1, regime);
    let (tau, c_sep, beta) = tau_csep_beta(epsilon, a_max, delta, r);
    let tau = Temperature::new(tau)?;
    let (eta, k0, xi, feasible) = match regime {
        MinimalRegime::Constant => {
            let xi = (1.0 + nu).sqrt();
            let ratio = (-beta).ln_1p() / (-beta * (1.0 - 2.0 * r)).ln_1p();
            (None, None, xi, ratio <= (1.0 + nu) / xi)
        }
        MinimalRegime::InversePolynomial { eta } => {
            if !in_open_unit(eta) {
                return Err(GameError::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
            }
            let k0 = ceil_to_u64(min_offset(beta, eta), "k0")?;
            let beta1 = beta / (1.0 + k0 as f64).powf(eta);
            let xi = xi_for(beta1)?;
            let feasible = xi * xi < 1.0 + nu && 1.0 + nu >= xi * xi / (1.0 - 2.0 * r);
            (Some(eta), Some(k0), xi, feasible)
        }
    };
    let kind = match regime {
        MinimalRegime::Constant => ScheduleKind::Constant,
        MinimalRegime::InversePolynomial { .. } => ScheduleKind::InversePolynomial,
    };
    Ok(Candidate {
        params: MinimalInfoParams {
            epsilon,
            nu,
            r,
            delta,
            tau,
            c_sep,
            beta,
            eta,
            k0,
            kind,
            xi,
        },
        feasible,
    })
}

fn check_minimal_inputs(epsilon: f64, nu: f64, a_max: usize, t1: f64) -> Result<()> {
    check_epsilon(epsilon)?;
    check_a_max(a_max)?;
    if !(nu.is_finite() && nu > 0.0) {
        return Err(GameError::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    if !(t1.is_finite() && t1 > 0.0) {
        return Err(GameError::InvalidParameter(format!("T_1 must be positive, got {t1}")));
    }
    Ok(())
}

fn finish(params: MinimalInfoParams) -> Result<MinimalInfoParams> {
    if !in_open_unit(params.beta) || !in_open_unit(params.delta) {
        return Err(GameError::InvalidParameter(format!(
            "derived beta = {} and delta = {} must lie in (0, 1)",
            params.beta, params.delta
        )));
    }
    let alpha1 = params.alpha_at(1)?;
    if alpha1 > 1.0 {
        return Err(GameError::InvalidParameter(format!("alpha_1 = {alpha1} exceeds 1")));
    }
    Ok(params)
}

/// Theorem-prescribed parameters for the minimal-information dynamics. `r`
/// is the largest value in (0, 1/2) meeting the feasibility condition of the
/// chosen regime, found by bisection.
pub fn minimal_info_params(
    epsilon: f64,
    nu: f64,
    a_max: usize,
    t1: f64,
    regime: MinimalRegime,
) -> Result<MinimalInfoParams> {
    check_minimal_inputs(epsilon, nu, a_max, t1)?;
    let mut lo = BISECTION_WIDTH;
    let first = candidate(epsilon, nu, a_max, t1, regime, lo)?;
    if !first.feasible {
        return Err(GameError::NoAdmissibleR(format!(
            "infeasible already at r = {lo} (nu = {nu})"
        )));
    }
    let mut best = first.params;
    let mut hi = 0.5;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let c = candidate(epsilon, nu, a_max, t1, regime, mid)?;
        if c.feasible {
            lo = mid;
            best = c.params;
        } else {
            hi = mid;
        }
    }
    finish(best)
}

/// Same prescription with a caller-fixed `r`; the feasibility condition is not enforced.
pub fn minimal_info_params_fixed_r(
    epsilon: f64,
    nu: f64,
    a_max: usize,
    t1: f64,
    regime: MinimalRegime,
    r: f64,
) -> Result<MinimalInfoParams> {
    check_minimal_inputs(epsilon, nu, a_max, t1)?;
    if !(r > 0.0 && r < 0.5) {
        return Err(GameError::InvalidParameter(format!("r must lie in (0, 0.5), got {r}")));
    }
    finish(candidate(epsilon, nu, a_max, t1, regime, r)?.params)
}

/// Iterations after which the expected Nash gap is at most epsilon, provided
/// the iterates stay delta-good that long.
pub fn k_required_minimal(params: &MinimalInfoParams, t1: f64) -> Result<u64> {
    let eps = params.epsilon;
    if !(t1.is_finite() && t1 > 0.0) {
        return Err(GameError::InvalidParameter(format!("T_1 must be positive, got {t1}")));
    }
    if t1 <= eps / 3.0 {
        return Ok(0);
    }
    let contraction = params.beta * (1.0 - 2.0 * params.r);
    match params.kind {
        ScheduleKind::Constant => {
            let k = (eps / (3.0 * t1)).ln() / (-contraction).ln_1p();
            ceil_to_u64(k, "K_required")
        }
        ScheduleKind::InversePolynomial => {
            let (eta, k0) = match (params.eta, params.k0) {
                (Some(e), Some(k)) => (e, k as f64),
                _ => {
                    return Err(GameError::InvalidParameter(
                        "inverse_polynomial parameters need eta and k0".into(),
                    ))
                }
            };
            let inner =
                (1.0 - eta) / contraction * (3.0 * t1 / eps).ln() + (1.0 + k0).powf(1.0 - eta);
            let k = inner.powf(1.0 / (1.0 - eta)) - k0 - 1.0;
            ceil_to_u64(k, "K_required")
        }
        ScheduleKind::InverseLinear => Err(GameError::InvalidParameter(
            "no iteration count is defined for inverse_linear minimal-information runs".into(),
        )),
    }
}

/// Number of iterations for which uniform-start iterates are guaranteed to keep
/// every action probability at least `delta`.
pub fn k_good_lower_bound(schedule: &StepsizeSchedule, delta: f64, a_max: usize) -> Result<u64> {
    if a_max == 0 {
        return Err(GameError::InvalidParameter("A_max must be positive".into()));
    }
    let a = a_max as f64;
    if !(delta > 0.0 && delta <= 1.0 / a) {
        return Err(GameError::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1/A_max]; the uniform start already violates it"
        )));
    }
    match *schedule {
        StepsizeSchedule::Constant { beta } => {
            schedule.validate_relaxed()?;
            to_u64(((a * delta).ln() / (-beta).ln_1p()).floor(), "K_good")
        }
        StepsizeSchedule::InversePolynomial { beta, eta, k0 } => {
            schedule.validate_relaxed()?;
            let xi = xi_for(schedule.beta_at(1)?)?;
            let k0f = k0 as f64;
            let rhs = (1.0 - eta) / (xi * beta) * (std::f64::consts::E / (a * delta)).ln()
                + (1.0 + k0f).powf(1.0 - eta);
            to_u64((rhs.powf(1.0 / (1.0 - eta)) - k0f).floor(), "K_good")
        }
        StepsizeSchedule::InverseLinear { .. } => Err(GameError::InvalidParameter(
            "K_good is defined for constant and inverse_polynomial schedules".into(),
        )),
    }
}
