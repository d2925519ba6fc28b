//! Exposure bookkeeping, gap computations, the fairness metric, the
//! tolerance schedule, and the adaptive weight controller.
//!
//! The session-level requirement is a demographic-parity-style condition: at
//! the horizon, each group's share of all recommended items must reach its
//! target share up to a relative tolerance, `E_k >= rho_k * (1 - eps)`. The
//! per-step surrogate works on signed item-count gaps: `delta_current` (gap
//! contributed by one bundle) plus `delta_history` (accumulated gap) must be
//! non-negative per group. Satisfying the surrogate at every served step
//! implies the session-level condition.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{Bundle, Catalog};

/// Slack used for all `>= 0` feasibility comparisons on computed gaps, so the
/// integral constraints are not lost to float rounding.
pub const FEASIBILITY_EPS: f64 = 1e-9;

/// How the tolerance evolves over a session of `horizon` users.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ToleranceSchedule {
    /// Constant tolerance for every step.
    Fixed,
    /// `eps(t) = eps * (1 + ((T - t) / T)^alpha)`: starts near `2*eps`,
    /// decays to exactly `eps` at `t = T`. Exponent must be positive.
    Power(f64),
}

/// Target exposure shares, tolerance, and tolerance schedule.
#[derive(Clone, Debug)]
pub struct FairnessSpec {
    rho: Vec<f64>,
    epsilon: f64,
    schedule: ToleranceSchedule,
}

impl FairnessSpec {
    /// `rho` must sum to 1 (within 1e-9) with every entry in `(0, 1]`: the
    /// metric divides by `rho_k`, so a zero-target group must be dropped from
    /// the partition instead of carried with target 0.
    pub fn new(
        rho: Vec<f64>,
        epsilon: f64,
        schedule: ToleranceSchedule,
    ) -> Result<Self, FairnessError> {
        if rho.is_empty() {
            return Err(FairnessError::EmptyTarget);
        }
        for &r in &rho {
            if !r.is_finite() || r <= 0.0 || r > 1.0 {
                return Err(FairnessError::TargetOutOfRange(r));
            }
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FairnessError::TargetNotNormalized(sum));
        }
        if !epsilon.is_finite() || !(0.0..=1.0).contains(&epsilon) {
            return Err(FairnessError::ToleranceOutOfRange(epsilon));
        }
        if let ToleranceSchedule::Power(alpha) = schedule {
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(FairnessError::BadScheduleExponent(alpha));
            }
        }
        Ok(Self { rho, epsilon, schedule })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn group_count(&self) -> usize {
        self.rho.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn schedule(&self) -> ToleranceSchedule {
        self.schedule
    }
}

/// Running exposure counters for one recommendation session.
///
/// `next_user` is the 1-based index of the next user to serve; a session is
/// exhausted once it exceeds the horizon. Mutated by exactly one session
/// runner; reads are cheap and lock-free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionState {
    horizon: u32,
    next_user: u32,
    item_total: u64,
    group_counts: Vec<u64>,
}

impl SessionState {
    pub fn new(horizon: u32, group_count: usize) -> Result<Self, FairnessError> {
        if horizon == 0 {
            return Err(FairnessError::ZeroHorizon);
        }
        if group_count == 0 {
            return Err(FairnessError::EmptyTarget);
        }
        Ok(Self { horizon, next_user: 1, item_total: 0, group_counts: vec![0; group_count] })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// 1-based index of the next user to serve.
    pub fn next_user(&self) -> u32 {
        self.next_user
    }

    pub fn item_total(&self) -> u64 {
        self.item_total
    }

    pub fn group_counts(&self) -> &[u64] {
        &self.group_counts
    }

    pub fn group_count(&self) -> usize {
        self.group_counts.len()
    }

    /// Per-group share of all items recommended so far. Errors while nothing
    /// has been served (the shares are undefined at `N = 0`).
    pub fn exposure(&self) -> Result<Vec<f64>, FairnessError> {
        if self.item_total == 0 {
            return Err(FairnessError::EmptySession);
        }
        let n = self.item_total as f64;
        Ok(self.group_counts.iter().map(|&c| c as f64 / n).collect())
    }

    /// Adds a served bundle's items to the counters and advances the user
    /// index. Errors once the horizon is exhausted.
    pub fn record(&mut self, bundle: &Bundle, catalog: &Catalog) -> Result<(), FairnessError> {
        if self.next_user > self.horizon {
            return Err(FairnessError::HorizonExceeded { horizon: self.horizon });
        }
        if catalog.group_count() != self.group_counts.len() {
            return Err(FairnessError::GroupCountMismatch {
                expected: self.group_counts.len(),
                actual: catalog.group_count(),
            });
        }
        // Validate the whole bundle before touching any counter.
        let mut groups = Vec::with_capacity(bundle.len());
        for &id in bundle.ids() {
            groups.push(catalog.item(id).ok_or(FairnessError::UnknownItem)?.group);
        }
        for g in groups {
            self.group_counts[g] += 1;
        }
        self.item_total += bundle.len() as u64;
        self.next_user += 1;
        Ok(())
    }

    /// Marks a step as skipped (nothing served): advances the user index only.
    pub fn skip(&mut self) -> Result<(), FairnessError> {
        if self.next_user > self.horizon {
            return Err(FairnessError::HorizonExceeded { horizon: self.horizon });
        }
        self.next_user += 1;
        Ok(())
    }

    /// Zeroes all counters and rewinds to user 1, keeping the horizon. Used to
    /// run unbounded streams as back-to-back independent sessions.
    pub fn reset(&mut self) {
        self.next_user = 1;
        self.item_total = 0;
        self.group_counts.iter_mut().for_each(|c| *c = 0);
    }
}

/// Session fairness in `[0, 1]`: `1 - max_k max(0, (rho_k - E_k) / rho_k)`.
/// Equals 1 exactly when no group is under-exposed.
pub fn fairness_metric(state: &SessionState, spec: &FairnessSpec) -> Result<f64, FairnessError> {
    let exposure = state.exposure()?;
    if exposure.len() != spec.group_count() {
        return Err(FairnessError::GroupCountMismatch {
            expected: spec.group_count(),
            actual: exposure.len(),
        });
    }
    let mut worst = 0.0f64;
    for (&e, &r) in exposure.iter().zip(spec.rho()) {
        worst = worst.max((r - e) / r);
    }
    Ok(1.0 - worst)
}

/// [`fairness_metric`], reporting 1.0 before anything has been served (no
/// under-exposure has occurred yet). This keeps the adaptive controller
/// well-defined at the first step.
pub fn fairness_so_far(state: &SessionState, spec: &FairnessSpec) -> Result<f64, FairnessError> {
    if state.item_total() == 0 {
        return Ok(1.0);
    }
    fairness_metric(state, spec)
}

/// Effective tolerance at step `t` of a session with the given horizon.
///
/// `t = 0` is accepted as the pre-session boundary and yields the schedule's
/// largest value (`2 * eps` for the power schedule); steps past the horizon
/// are a domain error.
pub fn tolerance_at(t: u32, spec: &FairnessSpec, horizon: u32) -> Result<f64, FairnessError> {
    if horizon == 0 {
        return Err(FairnessError::ZeroHorizon);
    }
    if t > horizon {
        return Err(FairnessError::StepOutOfRange { t, horizon });
    }
    match spec.schedule() {
        ToleranceSchedule::Fixed => Ok(spec.epsilon()),
        ToleranceSchedule::Power(alpha) => {
            let frac = f64::from(horizon - t) / f64::from(horizon);
            Ok(spec.epsilon() * (1.0 + libm::pow(frac, alpha)))
        }
    }
}

/// Signed per-group item-count gap accumulated over the served history:
/// `N_k - N * rho_k * (1 - eps_t)`. All zeros while nothing has been served.
pub fn delta_history(state: &SessionState, spec: &FairnessSpec, eps_t: f64) -> Vec<f64> {
    let required = state.item_total() as f64 * (1.0 - eps_t);
    state
        .group_counts()
        .iter()
        .zip(spec.rho())
        .map(|(&n_k, &rho_k)| n_k as f64 - required * rho_k)
        .collect()
}

/// Signed per-group gap contributed by one bundle on its own:
/// `sum_i g_ik - |B| * rho_k * (1 - eps_t)`.
pub fn delta_current(
    bundle: &Bundle,
    catalog: &Catalog,
    spec: &FairnessSpec,
    eps_t: f64,
) -> Result<Vec<f64>, FairnessError> {
    if catalog.group_count() != spec.group_count() {
        return Err(FairnessError::GroupCountMismatch {
            expected: spec.group_count(),
            actual: catalog.group_count(),
        });
    }
    let mut counts = vec![0u64; spec.group_count()];
    for &id in bundle.ids() {
        counts[catalog.item(id).ok_or(FairnessError::UnknownItem)?.group] += 1;
    }
    let required = bundle.len() as f64 * (1.0 - eps_t);
    Ok(counts
        .iter()
        .zip(spec.rho())
        .map(|(&n_k, &rho_k)| n_k as f64 - required * rho_k)
        .collect())
}

/// True when serving `bundle` on top of the recorded history keeps every
/// group's accumulated gap non-negative (within [`FEASIBILITY_EPS`]), i.e.
/// the running exposure stays at or above `rho_k * (1 - eps_t)`.
pub fn stepwise_satisfied(
    bundle: &Bundle,
    catalog: &Catalog,
    state: &SessionState,
    spec: &FairnessSpec,
    eps_t: f64,
) -> Result<bool, FairnessError> {
    let history = delta_history(state, spec, eps_t);
    let current = delta_current(bundle, catalog, spec, eps_t)?;
    Ok(history.iter().zip(&current).all(|(h, c)| h + c >= -FEASIBILITY_EPS))
}

/// Clamped fairness weight for the adaptive greedy controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveWeight {
    pub lambda: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl AdaptiveWeight {
    pub fn new(lambda: f64, lambda_min: f64, lambda_max: f64) -> Result<Self, FairnessError> {
        if !(lambda.is_finite() && lambda_min.is_finite() && lambda_max.is_finite())
            || lambda_min < 0.0
            || lambda_min > lambda_max
            || lambda < lambda_min
            || lambda > lambda_max
        {
            return Err(FairnessError::BadWeightBounds { lambda, lambda_min, lambda_max });
        }
        Ok(Self { lambda, lambda_min, lambda_max })
    }
}

impl Default for AdaptiveWeight {
    /// Starts at 1 with clamp bounds `[2^-10, 2^10]`, wide enough for long
    /// sessions without letting the doubling rule overflow.
    fn default() -> Self {
        Self { lambda: 1.0, lambda_min: 1.0 / 1024.0, lambda_max: 1024.0 }
    }
}

/// One controller update: double the weight when fairness is below `1 - eps`,
/// halve it when above `1 - eps/2`, keep it inside the dead band. Comparisons
/// are strict, so both band edges leave the weight unchanged. The result is
/// clamped to the weight's bounds.
pub fn adapt_lambda(weight: AdaptiveWeight, current_f: f64, spec: &FairnessSpec) -> AdaptiveWeight {
    let raise_below = 1.0 - spec.epsilon();
    let lower_above = 1.0 - spec.epsilon() / 2.0;
    let lambda = if current_f < raise_below {
        weight.lambda * 2.0
    } else if current_f > lower_above {
        weight.lambda / 2.0
    } else {
        weight.lambda
    };
    AdaptiveWeight {
        lambda: lambda.clamp(weight.lambda_min, weight.lambda_max),
        ..weight
    }
}

/// Errors from exposure bookkeeping and fairness evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FairnessError {
    EmptySession,
    EmptyTarget,
    TargetOutOfRange(f64),
    TargetNotNormalized(f64),
    ToleranceOutOfRange(f64),
    BadScheduleExponent(f64),
    ZeroHorizon,
    StepOutOfRange { t: u32, horizon: u32 },
    HorizonExceeded { horizon: u32 },
    GroupCountMismatch { expected: usize, actual: usize },
    UnknownItem,
    BadWeightBounds { lambda: f64, lambda_min: f64, lambda_max: f64 },
}

impl fmt::Display for FairnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FairnessError::EmptySession => write!(f, "no items recorded yet"),
            FairnessError::EmptyTarget => write!(f, "exposure target has no groups"),
            FairnessError::TargetOutOfRange(r) => write!(f, "target share {r} outside (0, 1]"),
            FairnessError::TargetNotNormalized(s) => write!(f, "target shares sum to {s}, not 1"),
            FairnessError::ToleranceOutOfRange(e) => write!(f, "tolerance {e} outside [0, 1]"),
            FairnessError::BadScheduleExponent(a) => write!(f, "schedule exponent {a} must be > 0"),
            FairnessError::ZeroHorizon => write!(f, "horizon must be positive"),
            FairnessError::StepOutOfRange { t, horizon } => {
                write!(f, "step {t} outside 0..={horizon}")
            }
            FairnessError::HorizonExceeded { horizon } => {
                write!(f, "session horizon {horizon} exhausted")
            }
            FairnessError::GroupCountMismatch { expected, actual } => {
                write!(f, "group count mismatch: expected {expected}, got {actual}")
            }
            FairnessError::UnknownItem => write!(f, "bundle item not in catalog"),
            FairnessError::BadWeightBounds { lambda, lambda_min, lambda_max } => {
                write!(f, "weight {lambda} incompatible with bounds [{lambda_min}, {lambda_max}]")
            }
        }
    }
}
