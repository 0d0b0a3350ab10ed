//! Piecewise-constant functions on `[0, t*]`, the carrier for counting
//! processes, cumulative hazards and incidence curves.

use crate::num::Real;

/// Continuity convention at jump times.
///
/// Counting processes `N` are right-continuous (evaluation at a jump returns
/// the post-jump value). At-risk processes `Y` are left-continuous:
/// `Y(t)` counts subjects with observed time `>= t`, so the drop happens
/// just after each observed time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    Right,
    Left,
}

#[derive(Debug, Clone)]
pub struct StepFunction<F> {
    initial: F,
    times: Vec<F>,
    values: Vec<F>,
    continuity: Continuity,
}

impl<F: Real> StepFunction<F> {
    /// Build from a starting value and `(jump_time, post_jump_value)` pairs.
    /// Jump times must be strictly increasing.
    pub fn new(initial: F, points: Vec<(F, F)>, continuity: Continuity) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].0 < w[1].0));
        let (times, values) = points.into_iter().unzip();
        Self { initial, times, values, continuity }
    }

    pub fn constant(value: F) -> Self {
        Self { initial: value, times: Vec::new(), values: Vec::new(), continuity: Continuity::Right }
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn jump_times(&self) -> &[F] {
        &self.times
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn initial(&self) -> F {
        self.initial
    }

    pub fn last_value(&self) -> F {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Evaluate at `t` under the tagged continuity convention.
    pub fn eval(&self, t: F) -> F {
        let idx = match self.continuity {
            Continuity::Right => self.times.partition_point(|&x| x <= t),
            Continuity::Left => self.times.partition_point(|&x| x < t),
        };
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit at `t` (the value just before `t`), regardless of the tag.
    pub fn eval_left(&self, t: F) -> F {
        let idx = self.times.partition_point(|&x| x < t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Jump sizes paired with their times.
    pub fn jumps(&self) -> impl Iterator<Item = (F, F)> + '_ {
        self.times.iter().enumerate().map(move |(i, &t)| {
            let before = if i == 0 { self.initial } else { self.values[i - 1] };
            (t, self.values[i] - before)
        })
    }

    /// Pointwise map of the values (and the initial value).
    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            initial: f(self.initial),
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            continuity: self.continuity,
        }
    }
}

/// Right-continuous cumulative count of `times` (with multiplicity).
pub fn counting_process<F: Real>(mut times: Vec<F>) -> StepFunction<F> {
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points: Vec<(F, F)> = Vec::new();
    let mut count = F::zero();
    for t in times {
        count = count + F::one();
        match points.last_mut() {
            Some(last) if last.0 == t => last.1 = count,
            _ => points.push((t, count)),
        }
    }
    StepFunction::new(F::zero(), points, Continuity::Right)
}

/// Left-continuous at-risk process: `Y(t)` = number of `times >= t`.
pub fn at_risk_process<F: Real>(mut times: Vec<F>) -> StepFunction<F> {
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = times.len();
    let mut points: Vec<(F, F)> = Vec::new();
    for (i, t) in times.into_iter().enumerate() {
        let remaining = F::from_usize(n - i - 1).unwrap();
        match points.last_mut() {
            Some(last) if last.0 == t => last.1 = remaining,
            _ => points.push((t, remaining)),
        }
    }
    StepFunction::new(F::from_usize(n).unwrap(), points, Continuity::Left)
}
