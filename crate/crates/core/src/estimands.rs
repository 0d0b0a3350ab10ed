//! Strategy estimands: cumulative incidences, treatment effects, pointwise
//! variances and normal-approximation confidence intervals.

use serde::Serialize;

use crate::counting::TrialProcesses;
use crate::error::{Error, Result};
use crate::hazard::{build_arm_hazards, product_limit, ArmHazards, CumulativeHazard};
use crate::num::{inv_normal_cdf, Real};
use crate::step::{Continuity, StepFunction};

/// Threshold below which the principal-stratum denominator is degenerate.
pub const PS_DENOMINATOR_EPS: f64 = 1e-8;

/// The five ICH E9(R1) strategies, with the hypothetical strategy split into
/// its two scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StrategyKind {
    /// Intention-to-treat on the outcome, intercurrent events as natural.
    TreatmentPolicy,
    /// First-of-either event as the endpoint.
    CompositeVariable,
    /// Subdistribution incidence of the outcome before the intercurrent event.
    WhileOnTreatment,
    /// Intercurrent hazard set to the control-arm hazard in both arms.
    HypotheticalI,
    /// Intercurrent hazard set to zero in both arms.
    HypotheticalII,
    /// Effect in the stratum that avoids the intercurrent event under both arms.
    PrincipalStratum,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::TreatmentPolicy,
        StrategyKind::CompositeVariable,
        StrategyKind::WhileOnTreatment,
        StrategyKind::HypotheticalI,
        StrategyKind::HypotheticalII,
        StrategyKind::PrincipalStratum,
    ];

    /// Short name used in CLI arguments and output file names.
    pub fn short_name(&self) -> &'static str {
        match self {
            StrategyKind::TreatmentPolicy => "tp",
            StrategyKind::CompositeVariable => "cv",
            StrategyKind::WhileOnTreatment => "wo",
            StrategyKind::HypotheticalI => "hp1",
            StrategyKind::HypotheticalII => "hp2",
            StrategyKind::PrincipalStratum => "ps",
        }
    }

    pub fn parse(s: &str) -> Option<StrategyKind> {
        match s.to_ascii_lowercase().as_str() {
            "tp" | "treatment-policy" => Some(StrategyKind::TreatmentPolicy),
            "cv" | "composite-variable" => Some(StrategyKind::CompositeVariable),
            "wo" | "while-on-treatment" => Some(StrategyKind::WhileOnTreatment),
            "hp1" | "hp-i" | "hypothetical-i" => Some(StrategyKind::HypotheticalI),
            "hp2" | "hp-ii" | "hypothetical-ii" => Some(StrategyKind::HypotheticalII),
            "ps" | "principal-stratum" => Some(StrategyKind::PrincipalStratum),
            _ => None,
        }
    }
}

/// Survival-factor transform applied to cumulative hazards.
///
/// The exponential form matches the identification formulas; the
/// product-limit form is the cross-check variant under which the strategy
/// curves collapse exactly on data without intercurrent events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurvivalTransform {
    #[default]
    Exponential,
    ProductLimit,
}

/// Per-arm incidence curve with pointwise variance and CI bounds.
#[derive(Debug, Clone)]
pub struct IncidenceResult<F> {
    pub strategy: StrategyKind,
    pub arm: u8,
    pub grid: Vec<F>,
    pub mu: Vec<F>,
    /// Plugged-in asymptotic variance (the avar expression).
    pub avar: Vec<F>,
    /// `avar / n_total`; what the CI uses.
    pub variance: Vec<F>,
    pub ci_lo: Vec<F>,
    pub ci_hi: Vec<F>,
    pub clipped: Vec<bool>,
    /// Grid point lies beyond the arm's last at-risk time; the value is the
    /// last one carried forward.
    pub truncated: Vec<bool>,
}

/// Treatment-effect curve `tau = mu_1 - mu_0`.
#[derive(Debug, Clone)]
pub struct EffectResult<F> {
    pub strategy: StrategyKind,
    pub grid: Vec<F>,
    pub tau: Vec<F>,
    pub avar: Vec<F>,
    pub variance: Vec<F>,
    pub ci_lo: Vec<F>,
    pub ci_hi: Vec<F>,
    pub clipped: Vec<bool>,
    pub truncated: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct StrategyEstimate<F> {
    /// Indexed by arm: `arms[0]` control, `arms[1]` active.
    pub arms: [IncidenceResult<F>; 2],
    pub effect: EffectResult<F>,
}

/// Normal-approximation bounds `point +- z * sqrt(variance)`, clipped to
/// `[lo, hi]`. Returns the bounds with a per-point clip flag.
pub fn confidence_band<F: Real>(
    points: &[F],
    variance: &[F],
    level: f64,
    lo: F,
    hi: F,
) -> (Vec<F>, Vec<F>, Vec<bool>) {
    assert!(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
    let z = F::from_f64x(inv_normal_cdf((1.0 + level) / 2.0));
    let mut ci_lo = Vec::with_capacity(points.len());
    let mut ci_hi = Vec::with_capacity(points.len());
    let mut clipped = Vec::with_capacity(points.len());
    for (&p, &v) in points.iter().zip(variance) {
        let half = z * v.max(F::zero()).sqrt();
        let (mut a, mut b) = (p - half, p + half);
        let mut clip = false;
        if a < lo {
            a = lo;
            clip = true;
        }
        if b > hi {
            b = hi;
            clip = true;
        }
        ci_lo.push(a);
        ci_hi.push(b);
        clipped.push(clip);
    }
    (ci_lo, ci_hi, clipped)
}

/// Complementary log-log confidence band for an incidence curve: intervals
/// for log(-log(1 - mu)) back-transformed, so bounds stay inside (0, 1)
/// without clipping. Falls back to the plain clipped band at boundary
/// points (mu = 0 or 1) or zero variance.
pub fn cloglog_band<F: Real>(
    mu: &[F],
    variance: &[F],
    level: f64,
) -> (Vec<F>, Vec<F>, Vec<bool>) {
    assert!(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
    let z = inv_normal_cdf((1.0 + level) / 2.0);
    let mut ci_lo = Vec::with_capacity(mu.len());
    let mut ci_hi = Vec::with_capacity(mu.len());
    let mut clipped = Vec::with_capacity(mu.len());
    for (&m, &v) in mu.iter().zip(variance) {
        let (m, v) = (m.to_f64x(), v.to_f64x().max(0.0));
        let s = 1.0 - m;
        if !(m > 0.0 && m < 1.0) || v == 0.0 {
            let half = z * v.sqrt();
            ci_lo.push(F::from_f64x((m - half).max(0.0)));
            ci_hi.push(F::from_f64x((m + half).min(1.0)));
            clipped.push(m - half < 0.0 || m + half > 1.0);
            continue;
        }
        let se_theta = v.sqrt() / (s * s.ln().abs());
        ci_lo.push(F::from_f64x(1.0 - s.powf((-z * se_theta).exp())));
        ci_hi.push(F::from_f64x(1.0 - s.powf((z * se_theta).exp())));
        clipped.push(false);
    }
    (ci_lo, ci_hi, clipped)
}

/// Precomputed hazards for one dataset; the entry point for estimation.
pub struct Analysis<F> {
    pub procs: TrialProcesses<F>,
    hazards: [ArmHazards<F>; 2],
}

impl<F: Real> Analysis<F> {
    pub fn new(procs: TrialProcesses<F>) -> Result<Self> {
        let hazards = [build_arm_hazards(procs.arm(0))?, build_arm_hazards(procs.arm(1))?];
        Ok(Self { procs, hazards })
    }

    pub fn from_dataset(ds: &crate::data::Dataset<F>) -> Result<Self> {
        Self::new(crate::counting::build_processes(ds)?)
    }

    pub fn hazards(&self, arm: u8) -> &ArmHazards<F> {
        &self.hazards[arm as usize]
    }

    /// Union of both arms' event times within `(0, t*]`, the canonical
    /// output grid (estimates are exact at event times, constant between).
    pub fn default_grid(&self) -> Vec<F> {
        let mut grid: Vec<F> = Vec::new();
        for arm in 0..2u8 {
            let h = &self.hazards[arm as usize];
            grid.extend(h.composite.jumps().iter().map(|j| j.time));
            if let Some(m) = &h.marginal {
                grid.extend(m.jumps().iter().map(|j| j.time));
            }
        }
        grid.retain(|&t| t > F::zero() && t <= self.procs.t_star);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        grid
    }

    /// Estimate one strategy on `grid` with `level` confidence intervals.
    pub fn estimate(
        &self,
        strategy: StrategyKind,
        grid: &[F],
        level: f64,
        transform: SurvivalTransform,
    ) -> Result<StrategyEstimate<F>> {
        let (arm0, arm1, effect_var) = match strategy {
            StrategyKind::TreatmentPolicy => {
                let a0 = self.exp_style_arm(strategy, 0, grid, transform)?;
                let a1 = self.exp_style_arm(strategy, 1, grid, transform)?;
                (a0, a1, None)
            }
            StrategyKind::CompositeVariable | StrategyKind::HypotheticalII => {
                let a0 = self.exp_style_arm(strategy, 0, grid, transform)?;
                let a1 = self.exp_style_arm(strategy, 1, grid, transform)?;
                (a0, a1, None)
            }
            StrategyKind::WhileOnTreatment => {
                let a0 = self.wo_arm(0, grid, transform);
                let a1 = self.wo_arm(1, grid, transform);
                (a0, a1, None)
            }
            StrategyKind::HypotheticalI => {
                let (a0, c0) = self.hp1_arm(0, grid, transform);
                let (a1, c1) = self.hp1_arm(1, grid, transform);
                let cross = self.hp1_effect_variance(&a0, &a1, &c0, &c1, grid, transform);
                (a0, a1, Some(cross))
            }
            StrategyKind::PrincipalStratum => {
                let a0 = self.ps_arm(0, grid, transform)?;
                let a1 = self.ps_arm(1, grid, transform)?;
                (a0, a1, None)
            }
        };
        Ok(self.assemble(strategy, grid, arm0, arm1, effect_var, level))
    }

    fn assemble(
        &self,
        strategy: StrategyKind,
        grid: &[F],
        arm0: ArmCurve<F>,
        arm1: ArmCurve<F>,
        effect_var: Option<Vec<F>>,
        level: f64,
    ) -> StrategyEstimate<F> {
        let n_total = F::from_usize(self.procs.n_total).unwrap();
        let make_arm = |arm: u8, c: ArmCurve<F>| {
            let (ci_lo, ci_hi, clipped) = confidence_band(&c.mu, &c.variance, level, F::zero(), F::one());
            IncidenceResult {
                strategy,
                arm,
                grid: grid.to_vec(),
                avar: c.variance.iter().map(|&v| v * n_total).collect(),
                mu: c.mu,
                variance: c.variance,
                ci_lo,
                ci_hi,
                clipped,
                truncated: c.truncated,
            }
        };
        let tau: Vec<F> = arm1.mu.iter().zip(&arm0.mu).map(|(&a, &b)| a - b).collect();
        let variance: Vec<F> = match effect_var {
            Some(v) => v,
            None => arm1
                .variance
                .iter()
                .zip(&arm0.variance)
                .map(|(&a, &b)| a + b)
                .collect(),
        };
        let truncated: Vec<bool> = arm1
            .truncated
            .iter()
            .zip(&arm0.truncated)
            .map(|(&a, &b)| a || b)
            .collect();
        let (ci_lo, ci_hi, clipped) =
            confidence_band(&tau, &variance, level, -F::one(), F::one());
        let effect = EffectResult {
            strategy,
            grid: grid.to_vec(),
            avar: variance.iter().map(|&v| v * n_total).collect(),
            tau,
            variance,
            ci_lo,
            ci_hi,
            clipped,
            truncated,
        };
        StrategyEstimate { arms: [make_arm(0, arm0), make_arm(1, arm1)], effect }
    }

    /// tp / cv / hp-II share the `1 - survival(Lambda)` shape and the
    /// `survival(t)^2 * int dLambda / Y` variance.
    fn exp_style_arm(
        &self,
        strategy: StrategyKind,
        arm: u8,
        grid: &[F],
        transform: SurvivalTransform,
    ) -> Result<ArmCurve<F>> {
        let h = &self.hazards[arm as usize];
        let (hazard, last_obs): (&CumulativeHazard<F>, Option<F>) = match strategy {
            StrategyKind::TreatmentPolicy => {
                let m = h.marginal.as_ref().ok_or(Error::WrongForm { expected: "full" })?;
                let last = self.procs.arm(arm).y_outcome.as_ref().unwrap().jump_times().last().copied();
                (m, last)
            }
            StrategyKind::CompositeVariable => (&h.composite, self.last_composite_obs(arm)),
            StrategyKind::HypotheticalII => (&h.cause_outcome, self.last_composite_obs(arm)),
            _ => unreachable!(),
        };
        let survival = match transform {
            SurvivalTransform::Exponential => hazard.curve().map(|v| (-v).exp()),
            SurvivalTransform::ProductLimit => product_limit(hazard),
        };
        let cum_var = WeightedMoments::build(
            hazard.jumps().iter().map(|j| (j.time, F::zero(), j.d_lambda / j.risk)),
        );
        let mut c = ArmCurve::with_capacity(grid.len());
        for &t in grid {
            let s = survival.eval(t);
            c.mu.push(F::one() - s);
            c.variance.push(s * s * cum_var.upto(t).0);
            c.truncated.push(truncated_at(t, last_obs));
        }
        Ok(c)
    }

    fn last_composite_obs(&self, arm: u8) -> Option<F> {
        self.procs.arm(arm).y_composite.jump_times().last().copied()
    }

    /// Survival weight `s -> survival factor at s-` for the while-on-treatment
    /// family: own-arm outcome hazard plus a referenced intercurrent hazard.
    fn family_weight<'a>(
        &'a self,
        arm: u8,
        intercurrent_ref: Option<u8>,
        transform: SurvivalTransform,
    ) -> Box<dyn Fn(F) -> F + 'a> {
        let l1 = &self.hazards[arm as usize].cause_outcome;
        match transform {
            SurvivalTransform::Exponential => match intercurrent_ref {
                Some(r) => {
                    let l2 = &self.hazards[r as usize].cause_intercurrent;
                    Box::new(move |s| (-(l1.eval_left(s) + l2.eval_left(s))).exp())
                }
                None => Box::new(move |s| (-l1.eval_left(s)).exp()),
            },
            SurvivalTransform::ProductLimit => {
                let pl1 = product_limit(l1);
                match intercurrent_ref {
                    Some(r) => {
                        let pl2 = product_limit(&self.hazards[r as usize].cause_intercurrent);
                        Box::new(move |s| pl1.eval_left(s) * pl2.eval_left(s))
                    }
                    None => Box::new(move |s| pl1.eval_left(s)),
                }
            }
        }
    }

    /// Aalen-Johansen style subdistribution curve for one arm, with the
    /// pieces the variance formulas reuse.
    fn sub_curve(
        &self,
        arm: u8,
        intercurrent_ref: Option<u8>,
        transform: SurvivalTransform,
    ) -> SubCurve<F> {
        let weight = self.family_weight(arm, intercurrent_ref, transform);
        let l1 = &self.hazards[arm as usize].cause_outcome;
        let mut times = Vec::new();
        let mut mu_points = Vec::new();
        let mut moments = Vec::new();
        let mut mu = F::zero();
        for j in l1.jumps() {
            let w = weight(j.time);
            let u = w + mu; // survival factor + mu at s-
            mu = mu + w * j.d_lambda;
            times.push(j.time);
            mu_points.push((j.time, mu));
            moments.push((j.time, u, j.d_lambda / j.risk));
        }
        SubCurve {
            mu: StepFunction::new(F::zero(), mu_points, Continuity::Right),
            outcome_moments: WeightedMoments::build(moments.into_iter()),
        }
    }

    /// Second variance term of the wo family: the integral against the
    /// referenced intercurrent hazard, with the curve taken at `s-`.
    fn intercurrent_moments(
        &self,
        curve: &StepFunction<F>,
        intercurrent_arm: u8,
    ) -> WeightedMoments<F> {
        let l2 = &self.hazards[intercurrent_arm as usize].cause_intercurrent;
        WeightedMoments::build(
            l2.jumps()
                .iter()
                .map(|j| (j.time, curve.eval_left(j.time), j.d_lambda / j.risk)),
        )
    }

    fn wo_arm(&self, arm: u8, grid: &[F], transform: SurvivalTransform) -> ArmCurve<F> {
        let sub = self.sub_curve(arm, Some(arm), transform);
        let ic = self.intercurrent_moments(&sub.mu, arm);
        let last_obs = self.last_composite_obs(arm);
        let mut c = ArmCurve::with_capacity(grid.len());
        for &t in grid {
            let m = sub.mu.eval(t);
            c.mu.push(m);
            c.variance.push(sub.outcome_moments.quad(t, m) + ic.quad(t, m));
            c.truncated.push(truncated_at(t, last_obs));
        }
        c
    }

    fn hp1_arm(
        &self,
        arm: u8,
        grid: &[F],
        transform: SurvivalTransform,
    ) -> (ArmCurve<F>, SubCurve<F>) {
        let sub = self.sub_curve(arm, Some(0), transform);
        let ic = self.intercurrent_moments(&sub.mu, 0);
        let last_obs = self.last_composite_obs(arm);
        let mut c = ArmCurve::with_capacity(grid.len());
        for &t in grid {
            let m = sub.mu.eval(t);
            c.mu.push(m);
            c.variance.push(sub.outcome_moments.quad(t, m) + ic.quad(t, m));
            c.truncated.push(truncated_at(t, last_obs));
        }
        (c, sub)
    }

    /// hp-I effect variance: not the sum of arm variances because both arms
    /// share the control-arm intercurrent hazard increments.
    fn hp1_effect_variance(
        &self,
        arm0: &ArmCurve<F>,
        arm1: &ArmCurve<F>,
        sub0: &SubCurve<F>,
        sub1: &SubCurve<F>,
        grid: &[F],
        _transform: SurvivalTransform,
    ) -> Vec<F> {
        let l2 = &self.hazards[0].cause_intercurrent;
        let tau_moments = WeightedMoments::build(l2.jumps().iter().map(|j| {
            let tau_left = sub1.mu.eval_left(j.time) - sub0.mu.eval_left(j.time);
            (j.time, tau_left, j.d_lambda / j.risk)
        }));
        grid.iter()
            .enumerate()
            .map(|(i, &t)| {
                let tau_t = arm1.mu[i] - arm0.mu[i];
                sub1.outcome_moments.quad(t, arm1.mu[i])
                    + sub0.outcome_moments.quad(t, arm0.mu[i])
                    + tau_moments.quad(t, tau_t)
            })
            .collect()
    }

    fn ps_arm(&self, arm: u8, grid: &[F], transform: SurvivalTransform) -> Result<ArmCurve<F>> {
        let t_star = self.procs.t_star;
        let sub = self.sub_curve(arm, Some(arm), transform);
        let weight = self.family_weight(arm, Some(arm), transform);
        let l2 = &self.hazards[arm as usize].cause_intercurrent;

        // Denominator: 1 - int_0^{t*} survival(s-) dLambda_2(s).
        let mut intercurrent_mass = F::zero();
        for j in l2.jumps() {
            if j.time > t_star {
                break;
            }
            intercurrent_mass = intercurrent_mass + weight(j.time) * j.d_lambda;
        }
        let denom = F::one() - intercurrent_mass;
        if denom.to_f64x() <= PS_DENOMINATOR_EPS {
            return Err(Error::DegenerateStratum {
                arm,
                denom: denom.to_f64x(),
                eps: PS_DENOMINATOR_EPS,
            });
        }

        // Kernel pieces shared by the A/B variance integrals.
        let ic = self.intercurrent_moments(&sub.mu, arm);
        let mu_wo_star = sub.mu.eval(t_star);
        let surv_star = match transform {
            SurvivalTransform::Exponential => {
                let h = &self.hazards[arm as usize];
                (-(h.cause_outcome.eval(t_star) + h.cause_intercurrent.eval(t_star))).exp()
            }
            SurvivalTransform::ProductLimit => {
                let h = &self.hazards[arm as usize];
                product_limit(&h.cause_outcome).eval(t_star)
                    * product_limit(&h.cause_intercurrent).eval(t_star)
            }
        };
        let v_star = surv_star + mu_wo_star;

        let last_obs = self.last_composite_obs(arm);
        let mut c = ArmCurve::with_capacity(grid.len());
        for &t in grid {
            let mu_wo = sub.mu.eval(t);
            let mu_ps = mu_wo / denom;
            // s <= t: A1 - mu_ps A2 = alpha * u(s) + beta with
            //   u(s) = survival(s-) + mu_wo(s-).
            let alpha = F::one() - mu_ps;
            let beta = mu_ps * v_star - mu_wo;
            let i_a = sub.outcome_moments.affine(t, alpha, beta)
                + mu_ps * mu_ps * sub.outcome_moments.affine_range(t, t_star, F::one(), -v_star);
            // B1 - mu_ps B2 = -(alpha * m(s) + beta); same square.
            let i_b = ic.affine(t, alpha, beta)
                + mu_ps * mu_ps * ic.affine_range(t, t_star, F::one(), -v_star);
            c.mu.push(mu_ps);
            c.variance.push((i_a + i_b) / (denom * denom));
            c.truncated.push(truncated_at(t, last_obs));
        }
        Ok(c)
    }
}

fn truncated_at<F: Real>(t: F, last_obs: Option<F>) -> bool {
    match last_obs {
        Some(last) => t > last,
        None => t > F::zero(),
    }
}

struct ArmCurve<F> {
    mu: Vec<F>,
    variance: Vec<F>,
    truncated: Vec<bool>,
}

impl<F> ArmCurve<F> {
    fn with_capacity(n: usize) -> Self {
        Self { mu: Vec::with_capacity(n), variance: Vec::with_capacity(n), truncated: Vec::with_capacity(n) }
    }
}

struct SubCurve<F> {
    mu: StepFunction<F>,
    outcome_moments: WeightedMoments<F>,
}

/// Prefix sums of `g`, `x g`, `x^2 g` over a jump sequence, supporting
/// O(1) evaluation of `sum_{s <= t} (x(s) - c)^2 g(s)` and its affine
/// generalizations.
struct WeightedMoments<F> {
    times: Vec<F>,
    m0: Vec<F>,
    m1: Vec<F>,
    m2: Vec<F>,
}

impl<F: Real> WeightedMoments<F> {
    fn build(jumps: impl Iterator<Item = (F, F, F)>) -> Self {
        let mut times = Vec::new();
        let (mut m0, mut m1, mut m2) = (Vec::new(), Vec::new(), Vec::new());
        let (mut a, mut b, mut c) = (F::zero(), F::zero(), F::zero());
        for (t, x, g) in jumps {
            a = a + g;
            b = b + x * g;
            c = c + x * x * g;
            times.push(t);
            m0.push(a);
            m1.push(b);
            m2.push(c);
        }
        Self { times, m0, m1, m2 }
    }

    fn upto(&self, t: F) -> (F, F, F) {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            (F::zero(), F::zero(), F::zero())
        } else {
            (self.m0[idx - 1], self.m1[idx - 1], self.m2[idx - 1])
        }
    }

    /// `sum_{s <= t} (x(s) - c)^2 g(s)`.
    fn quad(&self, t: F, c: F) -> F {
        let (s0, s1, s2) = self.upto(t);
        s2 - (c + c) * s1 + c * c * s0
    }

    /// `sum_{s <= t} (alpha x(s) + beta)^2 g(s)`.
    fn affine(&self, t: F, alpha: F, beta: F) -> F {
        let (s0, s1, s2) = self.upto(t);
        alpha * alpha * s2 + (F::one() + F::one()) * alpha * beta * s1 + beta * beta * s0
    }

    /// Same over the window `(lo, hi]`.
    fn affine_range(&self, lo: F, hi: F, alpha: F, beta: F) -> F {
        let (a0, a1, a2) = self.upto(hi);
        let (b0, b1, b2) = self.upto(lo);
        let (s0, s1, s2) = (a0 - b0, a1 - b1, a2 - b2);
        alpha * alpha * s2 + (F::one() + F::one()) * alpha * beta * s1 + beta * beta * s0
    }
}
