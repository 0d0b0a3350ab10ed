//! Nelson-Aalen estimation of cumulative hazards and the step-function
//! Stieltjes calculus used by every estimand.

use crate::counting::ArmProcesses;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::step::{Continuity, StepFunction};

/// Which hazard a curve estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardKind {
    /// Marginal outcome hazard (from `N`, `Y`).
    Marginal,
    /// Composite first-event hazard (from `N_12`, `Y_12`).
    Composite,
    /// Cause-specific outcome hazard (from `N_1`, `Y_12`).
    CauseOutcome,
    /// Cause-specific intercurrent hazard (from `N_2`, `Y_12`).
    CauseIntercurrent,
}

/// One Nelson-Aalen increment `dN(s)/Y(s)` together with the at-risk count
/// the variance plug-ins divide by.
#[derive(Debug, Clone, Copy)]
pub struct HazardJump<F> {
    pub time: F,
    pub d_lambda: F,
    pub risk: F,
    pub events: F,
}

/// Nondecreasing cumulative hazard with `curve(0) = 0`.
#[derive(Debug, Clone)]
pub struct CumulativeHazard<F> {
    pub kind: HazardKind,
    pub arm: u8,
    jumps: Vec<HazardJump<F>>,
    curve: StepFunction<F>,
}

impl<F: Real> CumulativeHazard<F> {
    pub fn jumps(&self) -> &[HazardJump<F>] {
        &self.jumps
    }

    pub fn curve(&self) -> &StepFunction<F> {
        &self.curve
    }

    /// Cumulative hazard at `t`; beyond the last at-risk time the last value
    /// is carried forward (the caller checks the truncation flag).
    pub fn eval(&self, t: F) -> F {
        self.curve.eval(t)
    }

    /// Left limit at `t`.
    pub fn eval_left(&self, t: F) -> F {
        self.curve.eval_left(t)
    }

    /// Last time at which the risk set was positive; evaluation past this
    /// point is truncated.
    pub fn last_risk_time(&self) -> Option<F> {
        self.jumps.last().map(|j| j.time)
    }
}

/// Nelson-Aalen estimator: accumulate `dN(s)/Y(s)` over the jump times of
/// the event process, reading the at-risk count off `y_proc`.
pub fn nelson_aalen<F: Real>(
    n_proc: &StepFunction<F>,
    y_proc: &StepFunction<F>,
    kind: HazardKind,
    arm: u8,
) -> Result<CumulativeHazard<F>> {
    let mut jumps = Vec::new();
    let mut points = Vec::new();
    let mut cum = F::zero();
    for (time, events) in n_proc.jumps() {
        let risk = y_proc.eval(time);
        if risk <= F::zero() {
            return Err(Error::RiskSetEmptyAtEvent(time.to_f64x()));
        }
        let d_lambda = events / risk;
        cum = cum + d_lambda;
        jumps.push(HazardJump { time, d_lambda, risk, events });
        points.push((time, cum));
    }
    Ok(CumulativeHazard {
        kind,
        arm,
        jumps,
        curve: StepFunction::new(F::zero(), points, Continuity::Right),
    })
}

/// Survival factor `exp{-Lambda(t)}` as a step function.
pub fn exp_neg<F: Real>(h: &CumulativeHazard<F>) -> StepFunction<F> {
    h.curve.map(|v| (-v).exp())
}

/// Stieltjes sum `sum_{s <= t} weight(s-) dLambda(s)` with the weight taken
/// at its left limit (predictable-integrand convention).
pub fn integrate_against<F: Real>(
    weight: &StepFunction<F>,
    h: &CumulativeHazard<F>,
    t: F,
) -> F {
    let mut acc = F::zero();
    for j in h.jumps() {
        if j.time > t {
            break;
        }
        acc = acc + weight.eval_left(j.time) * j.d_lambda;
    }
    acc
}

/// The four cumulative hazards of one arm.
///
/// The composite curve is constructed as the pointwise sum of the two
/// cause-specific curves, so the additivity identity
/// `Lambda_1 + Lambda_2 = Lambda_12` holds exactly in floating point.
#[derive(Debug, Clone)]
pub struct ArmHazards<F> {
    pub arm: u8,
    /// Marginal outcome hazard; full form only.
    pub marginal: Option<CumulativeHazard<F>>,
    pub cause_outcome: CumulativeHazard<F>,
    pub cause_intercurrent: CumulativeHazard<F>,
    pub composite: CumulativeHazard<F>,
}

pub fn build_arm_hazards<F: Real>(procs: &ArmProcesses<F>) -> Result<ArmHazards<F>> {
    let arm = procs.arm;
    let cause_outcome = nelson_aalen(
        &procs.n_outcome_first,
        &procs.y_composite,
        HazardKind::CauseOutcome,
        arm,
    )?;
    let cause_intercurrent = nelson_aalen(
        &procs.n_intercurrent,
        &procs.y_composite,
        HazardKind::CauseIntercurrent,
        arm,
    )?;
    let composite = compose(&cause_outcome, &cause_intercurrent, procs)?;
    let marginal = match (&procs.n_outcome_marginal, &procs.y_outcome) {
        (Some(n), Some(y)) => Some(nelson_aalen(n, y, HazardKind::Marginal, arm)?),
        _ => None,
    };
    Ok(ArmHazards { arm, marginal, cause_outcome, cause_intercurrent, composite })
}

/// Composite hazard over the merged jump times. Increments come from
/// `dN_12 / Y_12`; curve values are the sum `Lambda_1(t) + Lambda_2(t)` of
/// the already-accumulated cause-specific values.
fn compose<F: Real>(
    l1: &CumulativeHazard<F>,
    l2: &CumulativeHazard<F>,
    procs: &ArmProcesses<F>,
) -> Result<CumulativeHazard<F>> {
    let mut jumps = Vec::new();
    let mut points = Vec::new();
    for (time, events) in procs.n_composite.jumps() {
        let risk = procs.y_composite.eval(time);
        if risk <= F::zero() {
            return Err(Error::RiskSetEmptyAtEvent(time.to_f64x()));
        }
        jumps.push(HazardJump { time, d_lambda: events / risk, risk, events });
        points.push((time, l1.eval(time) + l2.eval(time)));
    }
    Ok(CumulativeHazard {
        kind: HazardKind::Composite,
        arm: procs.arm,
        jumps,
        curve: StepFunction::new(F::zero(), points, Continuity::Right),
    })
}

/// Product-limit survival factor `prod_{s <= t} (1 - dLambda(s))`,
/// the cross-check variant of [`exp_neg`].
pub fn product_limit<F: Real>(h: &CumulativeHazard<F>) -> StepFunction<F> {
    let mut points = Vec::new();
    let mut surv = F::one();
    for j in h.jumps() {
        surv = surv * (F::one() - j.d_lambda);
        points.push((j.time, surv));
    }
    StepFunction::new(F::one(), points, Continuity::Right)
}
