//! Certified fixed-point iteration and inverse-function solvers.
//!
//! The contraction factor `ρ` is always an input. Every run checks the
//! measured step ratios `d(x_{n+1}, x_n) / d(x_n, x_{n−1})` against it and
//! aborts after three consecutive violations.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{directional_derivative, default_steps, random_like, GradedMap};
use crate::error::{FrechetError, Result};
use crate::graded::GradedMetricConfig;
use crate::models::GradedPoint;
use crate::operators::{neumann_invert, LinearMapModel, ProbePlan};
use crate::par::{self, Execution};

/// Steps below this size are not used for ratio checks.
const RATIO_FLOOR: f64 = 1e-13;
const RATIO_SLACK: f64 = 1e-9;
const MAX_VIOLATIONS: usize = 3;

#[derive(Clone, Debug, Serialize)]
pub struct RetainedIterate {
    pub index: usize,
    pub point: GradedPoint,
    /// `ρ^n/(1−ρ)·d(x_0, x_1)` at this index.
    pub bound: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveTrace {
    pub rho: f64,
    pub iterations: usize,
    /// First and last retained iterates, in index order.
    pub iterates: Vec<RetainedIterate>,
    /// `d(x_{n+1}, x_n)` for every step.
    pub steps: Vec<f64>,
    /// Measured `steps[n] / steps[n−1]` (`NaN` where skipped).
    pub ratios: Vec<f64>,
    /// `d(f(x_n), y)` when solving `f(x) = y`.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SolveTrace {
    pub fn initial_step(&self) -> f64 {
        self.steps.first().copied().unwrap_or(0.0)
    }

    /// `ρ^n/(1−ρ)·d(x_0, x_1)`.
    pub fn bound_at(&self, n: usize) -> f64 {
        self.rho.powi(n as i32) / (1.0 - self.rho) * self.initial_step()
    }
}

/// Smallest `n` with `ρ^n/(1−ρ)·d01 ≤ tol`.
pub fn required_iterations(rho: f64, d01: f64, tol: f64) -> usize {
    if d01 == 0.0 {
        return 0;
    }
    if rho == 0.0 {
        return 1;
    }
    let mut n = 0usize;
    while rho.powi(n as i32) / (1.0 - rho) * d01 > tol {
        n += 1;
    }
    n
}

struct Retainer {
    keep: usize,
    head: Vec<(usize, GradedPoint)>,
    tail: std::collections::VecDeque<(usize, GradedPoint)>,
}

impl Retainer {
    fn new(keep: usize) -> Self {
        Self {
            keep: keep.max(1),
            head: Vec::new(),
            tail: Default::default(),
        }
    }

    fn push(&mut self, i: usize, x: &GradedPoint) {
        if self.head.len() < self.keep {
            self.head.push((i, x.clone()));
            return;
        }
        if self.tail.len() == self.keep {
            self.tail.pop_front();
        }
        self.tail.push_back((i, x.clone()));
    }

    fn finish(self, trace: &SolveTrace) -> Vec<RetainedIterate> {
        self.head
            .into_iter()
            .chain(self.tail)
            .map(|(index, point)| RetainedIterate {
                index,
                point,
                bound: trace.bound_at(index),
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Iterates kept at each end of the trace.
    pub retain: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            retain: 8,
        }
    }
}

/// Iterates `x_{n+1} = T(x_n)` until the a-priori bound
/// `ρ^n/(1−ρ)·d(x_0, x_1)` falls below `tol`.
pub fn banach_fixed_point<T: GradedMap + ?Sized>(
    t: &T,
    x0: &GradedPoint,
    cfg: &GradedMetricConfig,
    rho: f64,
    tol: f64,
    opts: &FixedPointOptions,
) -> Result<(GradedPoint, SolveTrace)> {
    run_fixed_point(t, x0, cfg, rho, tol, opts, |_| Ok(None))
}

fn run_fixed_point<T, R>(
    t: &T,
    x0: &GradedPoint,
    cfg: &GradedMetricConfig,
    rho: f64,
    tol: f64,
    opts: &FixedPointOptions,
    residual: R,
) -> Result<(GradedPoint, SolveTrace)>
where
    T: GradedMap + ?Sized,
    R: Fn(&GradedPoint) -> Result<Option<f64>>,
{
    if !(0.0..1.0).contains(&rho) {
        return Err(FrechetError::ContractionViolation { rho });
    }
    if !(tol > 0.0) {
        return Err(FrechetError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut trace = SolveTrace {
        rho,
        ..Default::default()
    };
    let mut keep = Retainer::new(opts.retain);
    let mut x = x0.clone();
    keep.push(0, &x);
    if let Some(r) = residual(&x)? {
        trace.residuals.push(r);
    }
    let mut needed = usize::MAX;
    let mut violations = 0;
    let mut n = 0;
    loop {
        if n >= needed {
            break;
        }
        if n >= opts.max_iter {
            trace.iterations = n;
            trace.iterates = keep.finish(&trace);
            return Err(FrechetError::NonConvergence {
                iterations: n,
                trace: Box::new(trace),
            });
        }
        let next = t.eval(&x)?;
        if !next.is_finite() {
            return Err(FrechetError::Evaluation(format!("{} produced a non-finite iterate", t.name())));
        }
        let step = cfg.distance(&next, &x)?;
        trace.steps.push(step);
        if n == 0 {
            needed = required_iterations(rho, step, tol);
        } else {
            let prev = trace.steps[n - 1];
            if prev >= RATIO_FLOOR {
                let ratio = step / prev;
                trace.ratios.push(ratio);
                if ratio > rho + RATIO_SLACK {
                    violations += 1;
                    trace.warnings.push(format!("step {n}: ratio {ratio:.6} exceeds rho {rho}"));
                    if violations >= MAX_VIOLATIONS {
                        trace.iterations = n + 1;
                        trace.iterates = keep.finish(&trace);
                        return Err(FrechetError::CertificateViolation {
                            detail: format!("{MAX_VIOLATIONS} consecutive step ratios above rho = {rho}"),
                            trace: Some(Box::new(trace)),
                        });
                    }
                } else {
                    violations = 0;
                }
            } else {
                trace.ratios.push(f64::NAN);
            }
        }
        x = next;
        n += 1;
        keep.push(n, &x);
        if let Some(r) = residual(&x)? {
            trace.residuals.push(r);
        }
        if step == 0.0 {
            break;
        }
    }
    trace.iterations = n;
    trace.iterates = keep.finish(&trace);
    Ok((x, trace))
}

type PointFn = dyn Fn(&GradedPoint) -> Result<GradedPoint> + Send + Sync;

/// Wraps a closure as a [`GradedMap`].
pub struct FnMap {
    name: String,
    f: Arc<PointFn>,
}

impl FnMap {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&GradedPoint) -> Result<GradedPoint> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }
}

impl GradedMap for FnMap {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint> {
        (self.f)(x)
    }
}

/// `Φ_y(x) = x − R_0(f(x) − y)`.
struct NewtonLikeMap<'a, F: GradedMap + ?Sized> {
    f: &'a F,
    r0: &'a LinearMapModel,
    y: &'a GradedPoint,
}

impl<F: GradedMap + ?Sized> GradedMap for NewtonLikeMap<'_, F> {
    fn name(&self) -> String {
        format!("Phi_y[{}]", self.f.name())
    }
    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint> {
        let defect = self.f.eval(x)?.sub(self.y)?;
        x.sub(&self.r0.apply(&defect)?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InverseCertificate {
    pub base_point: GradedPoint,
    /// Working radius `r_0`.
    pub radius: f64,
    pub rho: f64,
    /// Bound on `⟨L_0⟩` (or `⟨R_0⟩`).
    pub inverse_bound: f64,
    /// `(1 − ρ)/⟨L_0⟩`.
    pub lower_lipschitz: f64,
    /// `r_1 = (1 − ρ)/⟨R_0⟩·r_0` for right inverses.
    pub target_radius: Option<f64>,
    /// The target lies outside `B(f(x_0), r_1)`.
    pub void: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RightInverseSolution {
    pub x: GradedPoint,
    pub residual: f64,
    pub trace: SolveTrace,
    pub certificate: InverseCertificate,
}

/// Solves `f(x) = y` as the fixed point of `x ↦ x − R_0(f(x) − y)`.
///
/// `radius` is the working radius `r_0` on which `ρ` was established. The
/// certificate is flagged void when `y` is outside the guaranteed target
/// ball; the iteration is attempted regardless.
#[allow(clippy::too_many_arguments)]
pub fn right_inverse_solve<F: GradedMap + ?Sized>(
    f: &F,
    r0: &LinearMapModel,
    y: &GradedPoint,
    x0: &GradedPoint,
    cfg: &GradedMetricConfig,
    rho: f64,
    radius: f64,
    tol: f64,
    opts: &FixedPointOptions,
) -> Result<RightInverseSolution> {
    let r0_bound = r0
        .analytic_bound(cfg)
        .ok_or_else(|| FrechetError::NoCertificate("no bound on the right inverse".into()))?;
    if !(rho < 1.0) {
        return Err(FrechetError::NoCertificate(format!("rho = {rho} is not below 1")));
    }
    let lower = (1.0 - rho) / r0_bound;
    let r1 = lower * radius;
    let fx0 = f.eval(x0)?;
    let void = cfg.distance(y, &fx0)? > r1;
    let phi = NewtonLikeMap { f, r0, y };
    let res = |x: &GradedPoint| -> Result<Option<f64>> { Ok(Some(cfg.distance(&f.eval(x)?, y)?)) };
    let (x, mut trace) = run_fixed_point(&phi, x0, cfg, rho, tol, opts, res)?;
    if void {
        trace
            .warnings
            .push(format!("target outside certified ball of radius {r1:.6e}; certificate void"));
    }
    Ok(RightInverseSolution {
        residual: *trace.residuals.last().expect("at least the initial residual"),
        x,
        trace,
        certificate: InverseCertificate {
            base_point: x0.clone(),
            radius,
            rho,
            inverse_bound: r0_bound,
            lower_lipschitz: lower,
            target_radius: Some(r1),
            void,
        },
    })
}

/// Random point `x0 + w` with `d(w, 0) = u·radius` for uniform `u ∈ (0, 1)`.
pub fn sample_in_ball(
    x0: &GradedPoint,
    radius: f64,
    cfg: &GradedMetricConfig,
    rng: &mut ChaCha8Rng,
) -> GradedPoint {
    loop {
        let dir = random_like(x0, rng);
        let target = radius * rng.random_range(0.05..0.95);
        if let Some(w) = crate::graded::scale_to_norm(&dir, target, |p| cfg.norm(p)) {
            return x0.add(&w).expect("same model");
        }
    }
}

/// Largest probe value of `⟨I − R_0 f'(x)⟩` over sampled `x` in `B(x0, r)`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_estimate<F: GradedMap + ?Sized>(
    f: &F,
    r0: &LinearMapModel,
    x0: &GradedPoint,
    radius: f64,
    cfg: &GradedMetricConfig,
    plan: &ProbePlan,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = vec![x0.clone()];
    bases.extend((0..samples).map(|_| sample_in_ball(x0, radius, cfg, &mut rng)));
    let mut worst: f64 = 0.0;
    for x in &bases {
        let ratios: Vec<Result<f64>> = par::map_slice(exec, plan.points(), |p| {
            let d = cfg.norm(p);
            if d == 0.0 {
                return Ok(f64::NAN);
            }
            let q = p.sub(&r0.apply(&f.jacobian_apply(x, p)?)?)?;
            Ok(cfg.norm(&q) / d)
        });
        let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
        worst = worst.max(par::argmax(&ratios).map_or(0.0, |r| r.1));
    }
    Ok(worst)
}

/// Largest dyadic radius `2^{-k}` (`k ≥ 1`) whose sampled contraction
/// estimate is at most `rho_target`; returns `(radius, estimate)`.
#[allow(clippy::too_many_arguments)]
pub fn working_radius<F: GradedMap + ?Sized>(
    f: &F,
    r0: &LinearMapModel,
    x0: &GradedPoint,
    cfg: &GradedMetricConfig,
    rho_target: f64,
    plan: &ProbePlan,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64)> {
    for k in 1..=30 {
        let r = 0.5f64.powi(k);
        let est = contraction_estimate(f, r0, x0, r, cfg, plan, samples, seed, exec)?;
        if est <= rho_target {
            return Ok((r, est));
        }
    }
    Err(FrechetError::NoCertificate(format!(
        "no dyadic radius reaches rho <= {rho_target}"
    )))
}

/// Checks `(1−ρ)/⟨L_0⟩·d(x_1, x_2) ≤ d(f(x_1), f(x_2))` on the given pairs.
///
/// `rho` bounds `⟨L_0 f'(x) − I⟩` over the ball; when absent it is estimated
/// from `plan` at `x0` and at every pair point.
#[allow(clippy::too_many_arguments)]
pub fn left_inverse_certificate<F: GradedMap + ?Sized>(
    f: &F,
    l0: &LinearMapModel,
    x0: &GradedPoint,
    radius: f64,
    cfg: &GradedMetricConfig,
    pairs: &[(GradedPoint, GradedPoint)],
    rho: Option<f64>,
    plan: &ProbePlan,
    exec: Execution,
) -> Result<InverseCertificate> {
    let l0_bound = l0
        .analytic_bound(cfg)
        .ok_or_else(|| FrechetError::NoCertificate("no bound on the left inverse".into()))?;
    let rho = match rho {
        Some(r) => r,
        None => {
            let mut pts = vec![x0.clone()];
            for (a, b) in pairs {
                pts.push(a.clone());
                pts.push(b.clone());
            }
            let mut worst: f64 = 0.0;
            for x in &pts {
                let ratios: Vec<Result<f64>> = par::map_slice(exec, plan.points(), |p| {
                    let d = cfg.norm(p);
                    let q = l0.apply(&f.jacobian_apply(x, p)?)?.sub(p)?;
                    Ok(cfg.norm(&q) / d)
                });
                let ratios = ratios.into_iter().collect::<Result<Vec<_>>>()?;
                worst = worst.max(par::argmax(&ratios).map_or(0.0, |r| r.1));
            }
            worst
        }
    };
    if !(rho < 1.0) {
        return Err(FrechetError::NoCertificate(format!(
            "⟨L0 f' − I⟩ estimate {rho} is not below 1"
        )));
    }
    let lower = (1.0 - rho) / l0_bound;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let lhs = lower * cfg.distance(a, b)?;
        let rhs = cfg.distance(&f.eval(a)?, &f.eval(b)?)?;
        if lhs > rhs + 1e-9 {
            return Err(FrechetError::CertificateViolation {
                detail: format!("pair {i}: {lhs:.6e} > {rhs:.6e}"),
                trace: None,
            });
        }
    }
    Ok(InverseCertificate {
        base_point: x0.clone(),
        radius,
        rho,
        inverse_bound: l0_bound,
        lower_lipschitz: lower,
        target_radius: None,
        void: false,
    })
}

/// Max over `directions` of `d(φ'(b)v − f'(φ(b))^{-1}v, 0)`, with `φ'(b)v`
/// from finite differences and the inverse from a Neumann series.
pub fn inverse_derivative_check<F, P>(
    f: Arc<F>,
    phi: P,
    b: &GradedPoint,
    directions: &[GradedPoint],
    cfg: &GradedMetricConfig,
    plan: &ProbePlan,
    exec: Execution,
) -> Result<f64>
where
    F: GradedMap + 'static,
    P: Fn(&GradedPoint) -> Result<GradedPoint> + Send + Sync + 'static,
{
    let x = phi(b)?;
    let phi_map = FnMap::new("phi", phi);
    let jac = LinearMapModel::Linearized { map: f, at: x };
    let inv = neumann_invert(&jac, cfg, f64::INFINITY, 1e-15, 500, plan, None, exec)?;
    let steps = default_steps();
    let mut worst: f64 = 0.0;
    for v in directions {
        let scale = v.max_abs();
        if scale == 0.0 {
            continue;
        }
        let unit = v.scaled(1.0 / scale);
        let lhs = directional_derivative(&phi_map, b, &unit, &steps)?.value.scaled(scale);
        let rhs = inv.operator.apply(v)?;
        worst = worst.max(cfg.norm(&lhs.sub(&rhs)?));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{AffineMap, LinearGradedMap};
    use crate::graded::WeightSequence;

    fn cfg() -> GradedMetricConfig {
        GradedMetricConfig::standard(WeightSequence::dyadic(64))
    }

    #[test]
    fn iteration_count_example() {
        assert_eq!(required_iterations(0.5, 0.1, 1e-8), 25);
        assert_eq!(required_iterations(0.0, 0.3, 1e-8), 1);
    }

    #[test]
    fn identity_is_immediately_fixed() {
        let f = LinearGradedMap(LinearMapModel::Identity);
        let x0 = GradedPoint::sequence(vec![1.0, 2.0]);
        let (x, tr) = banach_fixed_point(&f, &x0, &cfg(), 0.0, 1e-12, &Default::default()).unwrap();
        assert_eq!(x, x0);
        assert_eq!(tr.iterations, 1);
    }

    #[test]
    fn wrong_rho_is_caught() {
        // T = 0.9·id contracts by roughly 0.9 in the linear regime
        let t = AffineMap {
            linear: LinearMapModel::Diagonal(vec![0.9; 4]),
            offset: GradedPoint::sequence(vec![0.0; 4]),
        };
        let x0 = GradedPoint::sequence(vec![1e-3; 4]);
        let err = banach_fixed_point(&t, &x0, &cfg(), 0.5, 1e-12, &Default::default()).unwrap_err();
        assert!(matches!(err, FrechetError::CertificateViolation { .. }));
    }

    #[test]
    fn max_iter_reports_trace() {
        let t = AffineMap {
            linear: LinearMapModel::scaled(0.5, LinearMapModel::DownShift),
            offset: GradedPoint::sequence(vec![1.0; 8]),
        };
        let x0 = GradedPoint::sequence(vec![0.0; 8]);
        let opts = FixedPointOptions { max_iter: 3, retain: 2 };
        match banach_fixed_point(&t, &x0, &cfg(), 0.5, 1e-14, &opts) {
            Err(FrechetError::NonConvergence { iterations, trace }) => {
                assert_eq!(iterations, 3);
                assert_eq!(trace.steps.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_right_inverse() {
        let f = LinearGradedMap(LinearMapModel::Identity);
        let y = GradedPoint::sequence(vec![0.1, -0.2, 0.0]);
        let x0 = y.zero_like();
        let sol = right_inverse_solve(&f, &LinearMapModel::Identity, &y, &x0, &cfg(), 0.0, 0.5, 1e-12, &Default::default()).unwrap();
        assert_eq!(sol.x, y);
        assert_eq!(sol.trace.iterations, 1);
    }

    #[test]
    fn zero_map_has_no_left_inverse_certificate() {
        let zero = LinearGradedMap(LinearMapModel::Combination(Vec::new()));
        let x0 = GradedPoint::sequence(vec![0.0; 4]);
        let plan = ProbePlan::sequences(4, 1, 5);
        let err = left_inverse_certificate(&zero, &LinearMapModel::Identity, &x0, 0.5, &cfg(), &[], None, &plan, Execution::Sequential)
            .unwrap_err();
        assert!(matches!(err, FrechetError::NoCertificate(_)));
    }
}
