//! Weighted log-rank tests on the treatment-policy, composite and
//! hypothetical timelines.

use serde::Serialize;

use crate::counting::TrialProcesses;
use crate::error::{Error, Result};
use crate::num::{two_sided_p, Real};
use crate::step::StepFunction;

/// Which null hypothesis the test targets, i.e. which counting process and
/// risk set the sums run over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TestKind {
    /// Marginal outcome timeline `(N, Y)`; full form only.
    TP,
    /// Composite timeline `(N_12, Y_12)`.
    CV,
    /// Outcome-first events on the composite risk set `(N_1, Y_12)`.
    HP,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::TP, TestKind::CV, TestKind::HP];

    pub fn short_name(&self) -> &'static str {
        match self {
            TestKind::TP => "tp",
            TestKind::CV => "cv",
            TestKind::HP => "hp",
        }
    }

    pub fn parse(s: &str) -> Option<TestKind> {
        match s.to_ascii_lowercase().as_str() {
            "tp" => Some(TestKind::TP),
            "cv" => Some(TestKind::CV),
            "hp" => Some(TestKind::HP),
            _ => None,
        }
    }
}

/// Weight function `omega(s)` of the test.
#[derive(Debug, Clone)]
pub enum WeightSpec<F> {
    /// `omega == 1`, the default.
    Constant,
    /// Tabulated left-continuous weights, evaluated at each event time.
    Tabulated(StepFunction<F>),
}

impl<F: Real> WeightSpec<F> {
    fn at(&self, s: F) -> F {
        match self {
            WeightSpec::Constant => F::one(),
            WeightSpec::Tabulated(w) => w.eval_left(s),
        }
    }

    fn describe(&self) -> &'static str {
        match self {
            WeightSpec::Constant => "constant",
            WeightSpec::Tabulated(_) => "tabulated",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogRankResult<F> {
    pub test: TestKind,
    pub weight_spec: &'static str,
    pub u_stat: F,
    pub s_var: F,
    pub z: F,
    pub p_two_sided: F,
}

/// Weighted log-rank statistic over event times `s <= t*`:
/// `U = sum omega(s) [Y(s;1) dN(s;0) - Y(s;0) dN(s;1)] / (Y(s;1) + Y(s;0))`
/// with variance
/// `S = sum omega(s)^2 Y(s;1) Y(s;0) (dN(s;1) + dN(s;0)) / (Y(s;1) + Y(s;0))^2`.
pub fn logrank<F: Real>(
    procs: &TrialProcesses<F>,
    test: TestKind,
    weight: &WeightSpec<F>,
) -> Result<LogRankResult<F>> {
    let pick = |arm: u8| -> Result<(&StepFunction<F>, &StepFunction<F>)> {
        let a = procs.arm(arm);
        Ok(match test {
            TestKind::TP => (
                a.n_outcome_marginal.as_ref().ok_or(Error::WrongForm { expected: "full" })?,
                a.y_outcome.as_ref().ok_or(Error::WrongForm { expected: "full" })?,
            ),
            TestKind::CV => (&a.n_composite, &a.y_composite),
            TestKind::HP => (&a.n_outcome_first, &a.y_composite),
        })
    };
    let (n0, y0) = pick(0)?;
    let (n1, y1) = pick(1)?;
    let t_star = procs.t_star;

    // Merge the two arms' event times so each pooled event time contributes
    // one grouped term.
    let mut times: Vec<F> = n0
        .jump_times()
        .iter()
        .chain(n1.jump_times())
        .copied()
        .filter(|&s| s <= t_star)
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();

    let mut u = F::zero();
    let mut s_var = F::zero();
    let mut any_events = false;
    for &s in &times {
        let dn0 = n0.eval(s) - n0.eval_left(s);
        let dn1 = n1.eval(s) - n1.eval_left(s);
        let r0 = y0.eval(s);
        let r1 = y1.eval(s);
        let pooled = r0 + r1;
        if pooled <= F::zero() {
            return Err(Error::RiskSetEmptyAtEvent(s.to_f64x()));
        }
        any_events = true;
        let w = weight.at(s);
        u = u + w * (r1 * dn0 - r0 * dn1) / pooled;
        s_var = s_var + w * w * r1 * r0 * (dn1 + dn0) / (pooled * pooled);
    }
    if !any_events || s_var <= F::zero() {
        return Err(Error::NoEvents(match test {
            TestKind::TP => "tp log-rank",
            TestKind::CV => "cv log-rank",
            TestKind::HP => "hp log-rank",
        }));
    }
    let z = u / s_var.sqrt();
    let p = F::from_f64x(two_sided_p(z.to_f64x()));
    Ok(LogRankResult {
        test,
        weight_spec: weight.describe(),
        u_stat: u,
        s_var,
        z,
        p_two_sided: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::build_processes;
    use crate::data::{Cause, Dataset, Records, ReducedRecord};

    fn dataset(rows: Vec<(u8, f64, Cause)>, t_star: f64) -> Dataset<f64> {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (arm, time, cause))| ReducedRecord {
                id: format!("s{i}"),
                arm,
                time,
                cause,
            })
            .collect();
        Dataset { records: Records::Reduced(records), t_star }
    }

    #[test]
    fn hand_computed_two_subject_example() {
        // Arm 1: event at t=1; arm 0: censored at t=2.
        let ds = dataset(
            vec![(1, 1.0, Cause::Outcome), (0, 2.0, Cause::Censored)],
            3.0,
        );
        let procs = build_processes(&ds).unwrap();
        let r = logrank(&procs, TestKind::CV, &WeightSpec::Constant).unwrap();
        assert!((r.u_stat - (-0.5)).abs() < 1e-9);
        assert!((r.s_var - 0.25).abs() < 1e-9);
        assert!((r.z - (-1.0)).abs() < 1e-9);
        assert!((r.p_two_sided - 0.31731050786).abs() < 1e-7);
    }

    #[test]
    fn mirror_data_gives_zero_statistic() {
        let ds = dataset(
            vec![
                (0, 1.0, Cause::Outcome),
                (0, 2.0, Cause::Intercurrent),
                (0, 3.0, Cause::Censored),
                (1, 1.0, Cause::Outcome),
                (1, 2.0, Cause::Intercurrent),
                (1, 3.0, Cause::Censored),
            ],
            4.0,
        );
        let procs = build_processes(&ds).unwrap();
        for test in [TestKind::CV, TestKind::HP] {
            let r = logrank(&procs, test, &WeightSpec::Constant).unwrap();
            assert_eq!(r.u_stat, 0.0);
            assert!((r.p_two_sided - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arm_swap_negates_u_and_preserves_variance() {
        let ds = dataset(
            vec![
                (0, 1.0, Cause::Outcome),
                (0, 4.0, Cause::Censored),
                (1, 2.0, Cause::Outcome),
                (1, 3.0, Cause::Intercurrent),
                (1, 5.0, Cause::Censored),
            ],
            6.0,
        );
        let swapped = dataset(
            vec![
                (1, 1.0, Cause::Outcome),
                (1, 4.0, Cause::Censored),
                (0, 2.0, Cause::Outcome),
                (0, 3.0, Cause::Intercurrent),
                (0, 5.0, Cause::Censored),
            ],
            6.0,
        );
        let p1 = build_processes(&ds).unwrap();
        let p2 = build_processes(&swapped).unwrap();
        for test in [TestKind::CV, TestKind::HP] {
            let a = logrank(&p1, test, &WeightSpec::Constant).unwrap();
            let b = logrank(&p2, test, &WeightSpec::Constant).unwrap();
            assert!((a.u_stat + b.u_stat).abs() < 1e-15);
            assert_eq!(a.s_var, b.s_var);
            assert_eq!(a.p_two_sided, b.p_two_sided);
        }
    }

    #[test]
    fn hp_equals_cv_without_intercurrent_events() {
        let ds = dataset(
            vec![
                (0, 1.0, Cause::Outcome),
                (0, 4.0, Cause::Censored),
                (1, 2.0, Cause::Outcome),
                (1, 5.0, Cause::Censored),
            ],
            6.0,
        );
        let procs = build_processes(&ds).unwrap();
        let cv = logrank(&procs, TestKind::CV, &WeightSpec::Constant).unwrap();
        let hp = logrank(&procs, TestKind::HP, &WeightSpec::Constant).unwrap();
        assert_eq!(cv.u_stat, hp.u_stat);
        assert_eq!(cv.s_var, hp.s_var);
    }

    #[test]
    fn constant_weight_scaling_leaves_z_invariant() {
        let ds = dataset(
            vec![
                (0, 1.0, Cause::Outcome),
                (0, 4.0, Cause::Censored),
                (1, 2.0, Cause::Outcome),
                (1, 5.0, Cause::Censored),
            ],
            6.0,
        );
        let procs = build_processes(&ds).unwrap();
        let base = logrank(&procs, TestKind::CV, &WeightSpec::Constant).unwrap();
        let scaled = logrank(
            &procs,
            TestKind::CV,
            &WeightSpec::Tabulated(StepFunction::constant(3.0)),
        )
        .unwrap();
        assert!((scaled.u_stat - 3.0 * base.u_stat).abs() < 1e-12);
        assert!((scaled.s_var - 9.0 * base.s_var).abs() < 1e-12);
        assert!((scaled.z - base.z).abs() < 1e-12);
        assert!((scaled.p_two_sided - base.p_two_sided).abs() < 1e-12);
    }

    #[test]
    fn no_events_is_an_error_not_p_of_one() {
        let ds = dataset(
            vec![(0, 1.0, Cause::Censored), (1, 2.0, Cause::Censored)],
            3.0,
        );
        let procs = build_processes(&ds).unwrap();
        let err = logrank(&procs, TestKind::CV, &WeightSpec::Constant).unwrap_err();
        assert!(matches!(err, Error::NoEvents(_)));
    }

    #[test]
    fn tp_requires_full_form() {
        let ds = dataset(
            vec![(0, 1.0, Cause::Outcome), (1, 2.0, Cause::Outcome)],
            3.0,
        );
        let procs = build_processes(&ds).unwrap();
        let err = logrank(&procs, TestKind::TP, &WeightSpec::Constant).unwrap_err();
        assert!(matches!(err, Error::WrongForm { .. }));
    }

    #[test]
    fn events_past_t_star_are_excluded() {
        let ds = dataset(
            vec![
                (0, 1.0, Cause::Outcome),
                (0, 4.0, Cause::Censored),
                (1, 2.5, Cause::Outcome),
                (1, 5.0, Cause::Outcome),
            ],
            3.0,
        );
        let truncated = dataset(
            vec![
                (0, 1.0, Cause::Outcome),
                (0, 4.0, Cause::Censored),
                (1, 2.5, Cause::Outcome),
                (1, 5.0, Cause::Censored),
            ],
            3.0,
        );
        let a = logrank(&build_processes(&ds).unwrap(), TestKind::CV, &WeightSpec::Constant)
            .unwrap();
        let b = logrank(
            &build_processes(&truncated).unwrap(),
            TestKind::CV,
            &WeightSpec::Constant,
        )
        .unwrap();
        assert_eq!(a.u_stat, b.u_stat);
        assert_eq!(a.s_var, b.s_var);
    }

    #[test]
    fn ties_contribute_grouped_increments() {
        // Two arm-1 events tied at t=1 with Y = (2, 2):
        // U = [2*0 - 2*2]/4 = -1; S = 2*2*2/16 = 0.5.
        let ds = dataset(
            vec![
                (1, 1.0, Cause::Outcome),
                (1, 1.0, Cause::Outcome),
                (0, 2.0, Cause::Censored),
                (0, 3.0, Cause::Censored),
            ],
            4.0,
        );
        let procs = build_processes(&ds).unwrap();
        let r = logrank(&procs, TestKind::CV, &WeightSpec::Constant).unwrap();
        assert!((r.u_stat - (-1.0)).abs() < 1e-12);
        assert!((r.s_var - 0.5).abs() < 1e-12);
    }
}
