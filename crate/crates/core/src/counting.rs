//! Per-arm event and at-risk processes over the observed time grid.

use crate::data::{Cause, Dataset, Form, Records, ReducedRecord, SubjectRecord};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::step::{at_risk_process, counting_process, StepFunction};

/// Which risk set a query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskSet {
    /// Outcome risk set `Y(t; w)` (treatment-policy pathway, full form only).
    Outcome,
    /// Composite risk set `Y_12(t; w)`.
    Composite,
}

/// Counting and at-risk processes of one arm.
#[derive(Debug, Clone)]
pub struct ArmProcesses<F> {
    pub arm: u8,
    /// `N_1(t; w)`: outcome-first events on the composite timeline.
    pub n_outcome_first: StepFunction<F>,
    /// `N_2(t; w)`: intercurrent-first events.
    pub n_intercurrent: StepFunction<F>,
    /// `N_12(t; w)`: first-of-either events.
    pub n_composite: StepFunction<F>,
    /// `Y_12(t; w)`: at risk of either event.
    pub y_composite: StepFunction<F>,
    /// `N(t; w)`: all observed outcome events, regardless of prior
    /// intercurrent events. Full form only.
    pub n_outcome_marginal: Option<StepFunction<F>>,
    /// `Y(t; w)`: at risk on the outcome timeline. Full form only.
    pub y_outcome: Option<StepFunction<F>>,
    pub n_subjects: usize,
}

/// Both arms plus the dataset-level context the variance plug-ins need.
#[derive(Debug, Clone)]
pub struct TrialProcesses<F> {
    arms: [ArmProcesses<F>; 2],
    pub n_total: usize,
    pub form: Form,
    pub t_star: F,
}

impl<F: Real> TrialProcesses<F> {
    pub fn arm(&self, w: u8) -> &ArmProcesses<F> {
        &self.arms[w as usize]
    }

    /// Plug-in estimate of `Pr(· >= t, W = w)`: `Y(t; w) / n_total`.
    pub fn at_risk_fraction(&self, w: u8, which: RiskSet, t: F) -> Result<F> {
        let arm = self.arm(w);
        let y = match which {
            RiskSet::Composite => arm.y_composite.eval(t),
            RiskSet::Outcome => arm
                .y_outcome
                .as_ref()
                .ok_or(Error::WrongForm { expected: "full" })?
                .eval(t),
        };
        if y <= F::zero() {
            return Err(Error::ZeroRisk(t.to_f64x()));
        }
        Ok(y / F::from_usize(self.n_total).unwrap())
    }
}

/// Build both arms' processes from a validated dataset.
pub fn build_processes<F: Real>(ds: &Dataset<F>) -> Result<TrialProcesses<F>> {
    let sizes = ds.arm_sizes();
    for (arm, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyArm(arm as u8));
        }
    }
    let arms = match &ds.records {
        Records::Full(records) => {
            let reduced = ds.reduce()?;
            let Records::Reduced(red) = reduced.records else { unreachable!() };
            [
                build_arm_full(0, records, &red),
                build_arm_full(1, records, &red),
            ]
        }
        Records::Reduced(red) => [build_arm_reduced(0, red), build_arm_reduced(1, red)],
    };
    Ok(TrialProcesses {
        arms,
        n_total: ds.len(),
        form: ds.form(),
        t_star: ds.t_star,
    })
}

fn build_arm_reduced<F: Real>(arm: u8, records: &[ReducedRecord<F>]) -> ArmProcesses<F> {
    let mine: Vec<&ReducedRecord<F>> = records.iter().filter(|r| r.arm == arm).collect();
    let composite_times: Vec<F> = mine.iter().map(|r| r.time).collect();
    let times_of = |cause: Cause| -> Vec<F> {
        mine.iter().filter(|r| r.cause == cause).map(|r| r.time).collect()
    };
    let event_times: Vec<F> =
        mine.iter().filter(|r| r.cause != Cause::Censored).map(|r| r.time).collect();
    ArmProcesses {
        arm,
        n_outcome_first: counting_process(times_of(Cause::Outcome)),
        n_intercurrent: counting_process(times_of(Cause::Intercurrent)),
        n_composite: counting_process(event_times),
        y_composite: at_risk_process(composite_times),
        n_outcome_marginal: None,
        y_outcome: None,
        n_subjects: mine.len(),
    }
}

fn build_arm_full<F: Real>(
    arm: u8,
    full: &[SubjectRecord<F>],
    reduced: &[ReducedRecord<F>],
) -> ArmProcesses<F> {
    let red: Vec<&ReducedRecord<F>> = reduced.iter().filter(|r| r.arm == arm).collect();
    let mut p = build_arm_reduced(arm, reduced);
    let outcome_times: Vec<F> =
        full.iter().filter(|r| r.arm == arm).map(|r| r.t_obs).collect();
    let outcome_events: Vec<F> = full
        .iter()
        .filter(|r| r.arm == arm && r.delta_t)
        .map(|r| r.t_obs)
        .collect();
    debug_assert_eq!(red.len(), outcome_times.len());
    p.n_outcome_marginal = Some(counting_process(outcome_events));
    p.y_outcome = Some(at_risk_process(outcome_times));
    p
}
