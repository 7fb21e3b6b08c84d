//! Directional derivatives, b-differentiability diagnostics and test maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FrechetError, Result};
use crate::graded::GradedMetricConfig;
use crate::models::{GradedPoint, PeriodicFunction};
use crate::operators::{LinearMapModel, ProbePlan};
use crate::par::{self, Execution};

/// A (possibly nonlinear) map between graded models.
pub trait GradedMap: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint>;

    /// `f'(x)v`; defaults to a Richardson-extrapolated central difference.
    fn jacobian_apply(&self, x: &GradedPoint, v: &GradedPoint) -> Result<GradedPoint> {
        Ok(directional_derivative(self, x, v, &default_steps())?.value)
    }

    /// A certified upper bound on `⟨f'(x)⟩`, when one is known.
    fn derivative_bound(&self, _x: &GradedPoint, _cfg: &GradedMetricConfig) -> Option<f64> {
        None
    }
}

/// A linear operator viewed as a map.
#[derive(Clone, Debug)]
pub struct LinearGradedMap(pub LinearMapModel);

impl GradedMap for LinearGradedMap {
    fn name(&self) -> String {
        format!("{:?}", self.0)
    }
    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint> {
        self.0.apply(x)
    }
    fn jacobian_apply(&self, _x: &GradedPoint, v: &GradedPoint) -> Result<GradedPoint> {
        self.0.apply(v)
    }
    fn derivative_bound(&self, _x: &GradedPoint, cfg: &GradedMetricConfig) -> Option<f64> {
        self.0.analytic_bound(cfg)
    }
}

/// `x ↦ Lx + c`
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub linear: LinearMapModel,
    pub offset: GradedPoint,
}

impl GradedMap for AffineMap {
    fn name(&self) -> String {
        format!("affine({:?})", self.linear)
    }
    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint> {
        self.linear.apply(x)?.add(&self.offset)
    }
    fn jacobian_apply(&self, _x: &GradedPoint, v: &GradedPoint) -> Result<GradedPoint> {
        self.linear.apply(v)
    }
    fn derivative_bound(&self, _x: &GradedPoint, cfg: &GradedMetricConfig) -> Option<f64> {
        self.linear.analytic_bound(cfg)
    }
}

/// `x ↦ x + ε·τ(sin ∘ x)` on truncated sequences (sine taken entrywise).
#[derive(Clone, Copy, Debug)]
pub struct TauSineMap {
    pub eps: f64,
}

impl TauSineMap {
    pub fn new(eps: f64) -> Self {
        Self { eps }
    }

    fn coords(x: &GradedPoint) -> Result<&[f64]> {
        x.as_sequence()
            .ok_or_else(|| FrechetError::Shape("tau-sine map acts on sequences".into()))
    }

    /// `f'(x) = I + ε·τ·diag(cos x)` as an operator.
    pub fn linearization(&self, x: &GradedPoint) -> Result<LinearMapModel> {
        let d = Self::coords(x)?.iter().map(|c| c.cos()).collect();
        Ok(LinearMapModel::identity_plus(
            self.eps,
            LinearMapModel::Compose(vec![LinearMapModel::DownShift, LinearMapModel::Diagonal(d)]),
        ))
    }

    /// Analytic bound on `⟨f'(x) − I⟩`: `max(1, ε)·⟨τ⟩`.
    pub fn defect_bound(&self, cfg: &GradedMetricConfig) -> f64 {
        LinearMapModel::scaled(self.eps, LinearMapModel::DownShift)
            .analytic_bound(cfg)
            .expect("structured")
    }
}

impl GradedMap for TauSineMap {
    fn name(&self) -> String {
        format!("tau-sine({})", self.eps)
    }
    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint> {
        let c = Self::coords(x)?;
        let mut out = c.to_vec();
        for i in 1..c.len() {
            out[i] += self.eps * c[i - 1].sin();
        }
        Ok(GradedPoint::sequence(out))
    }
    fn jacobian_apply(&self, x: &GradedPoint, v: &GradedPoint) -> Result<GradedPoint> {
        let (c, w) = (Self::coords(x)?, Self::coords(v)?);
        if c.len() != w.len() {
            return Err(FrechetError::Shape("direction length differs from base".into()));
        }
        let mut out = w.to_vec();
        for i in 1..c.len() {
            out[i] += self.eps * c[i - 1].cos() * w[i - 1];
        }
        Ok(GradedPoint::sequence(out))
    }
    fn derivative_bound(&self, _x: &GradedPoint, cfg: &GradedMetricConfig) -> Option<f64> {
        Some(1.0 + self.defect_bound(cfg))
    }
}

/// `C¹` cutoff helper `ψ(t) = exp(−1/t)` for `t > 0`.
fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn psi_prime(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp() / (t * t)
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on `|y| ≤ 1`, 0 on `|y| ≥ 2`.
pub fn bump(y: f64) -> f64 {
    let a = y.abs();
    let (p, q) = (psi(2.0 - a), psi(a - 1.0));
    p / (p + q)
}

fn bump_prime(y: f64) -> f64 {
    let a = y.abs();
    let (p, q) = (psi(2.0 - a), psi(a - 1.0));
    let (dp, dq) = (-psi_prime(2.0 - a), psi_prime(a - 1.0));
    let da = (dp * q - p * dq) / ((p + q) * (p + q));
    da * y.signum()
}

/// Superposition `u ↦ g ∘ u` with `g(y) = bump(y)·sin(M y)`, projected back
/// onto the bandwidth of its argument.
#[derive(Clone, Copy, Debug)]
pub struct CompositionOperator {
    pub frequency: f64,
}

impl CompositionOperator {
    pub fn new(frequency: f64) -> Self {
        Self { frequency }
    }

    pub fn g(&self, y: f64) -> f64 {
        bump(y) * (self.frequency * y).sin()
    }

    pub fn g_prime(&self, y: f64) -> f64 {
        let m = self.frequency;
        bump_prime(y) * (m * y).sin() + bump(y) * m * (m * y).cos()
    }

    fn grid(bandwidth: usize) -> usize {
        (4 * (2 * bandwidth + 1)).next_power_of_two()
    }

    fn func(x: &GradedPoint) -> Result<&PeriodicFunction> {
        x.as_function()
            .ok_or_else(|| FrechetError::Shape("composition acts on periodic functions".into()))
    }
}

impl GradedMap for CompositionOperator {
    fn name(&self) -> String {
        format!("composition(M={})", self.frequency)
    }
    fn eval(&self, x: &GradedPoint) -> Result<GradedPoint> {
        let f = Self::func(x)?;
        let m = Self::grid(f.bandwidth());
        let vals: Vec<f64> = f.sample(m).into_iter().map(|y| self.g(y)).collect();
        Ok(GradedPoint::Func(PeriodicFunction::from_samples(&vals, f.bandwidth())?))
    }
    fn jacobian_apply(&self, x: &GradedPoint, v: &GradedPoint) -> Result<GradedPoint> {
        let (f, w) = (Self::func(x)?, Self::func(v)?);
        let m = Self::grid(f.bandwidth());
        let vals: Vec<f64> = f
            .sample(m)
            .into_iter()
            .zip(w.sample(m))
            .map(|(y, dy)| self.g_prime(y) * dy)
            .collect();
        Ok(GradedPoint::Func(PeriodicFunction::from_samples(&vals, f.bandwidth())?))
    }
}

/// `t ∈ {1e-2, 5e-3, …}`: nine steps, halving each time.
pub fn default_steps() -> Vec<f64> {
    (0..9).map(|i| 1e-2 / f64::powi(2.0, i)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionalDerivative {
    pub value: GradedPoint,
    /// Max-abs gap between the last two Richardson estimates.
    pub error: f64,
    /// Ratio of successive central-difference changes over the three largest
    /// steps (≈ 4 for smooth maps when the steps halve).
    pub richardson_ratio: f64,
}

/// Richardson-extrapolated central difference of `f` at `x` along `v`.
pub fn directional_derivative<F: GradedMap + ?Sized>(
    f: &F,
    x: &GradedPoint,
    v: &GradedPoint,
    steps: &[f64],
) -> Result<DirectionalDerivative> {
    if steps.len() < 3 {
        return Err(FrechetError::Domain("need at least three steps".into()));
    }
    if steps.windows(2).any(|w| !(w[1] < w[0]) || !(w[1] > 0.0)) {
        return Err(FrechetError::Domain("steps must be positive and decreasing".into()));
    }
    let n = steps.len();
    let quotient = |t: f64| -> Result<GradedPoint> {
        let plus = f.eval(&x.axpy(t, v)?)?;
        let minus = f.eval(&x.axpy(-t, v)?)?;
        let q = plus.sub(&minus)?.scaled(0.5 / t);
        if !q.is_finite() {
            return Err(FrechetError::Evaluation(format!("{} at step {t}", f.name())));
        }
        Ok(q)
    };
    let d: Vec<GradedPoint> = steps[n - 3..].iter().map(|t| quotient(*t)).collect::<Result<_>>()?;
    let extrapolate = |big: &GradedPoint, small: &GradedPoint, q: f64| -> Result<GradedPoint> {
        let q2 = q * q;
        Ok(small.scaled(q2).sub(big)?.scaled(1.0 / (q2 - 1.0)))
    };
    let r_old = extrapolate(&d[0], &d[1], steps[n - 3] / steps[n - 2])?;
    let r_new = extrapolate(&d[1], &d[2], steps[n - 2] / steps[n - 1])?;
    // convergence rate measured where truncation error dominates roundoff
    let head: Vec<GradedPoint> = steps[..3].iter().map(|t| quotient(*t)).collect::<Result<_>>()?;
    let c1 = head[0].sub(&head[1])?.max_abs();
    let c2 = head[1].sub(&head[2])?.max_abs();
    Ok(DirectionalDerivative {
        error: r_new.sub(&r_old)?.max_abs(),
        richardson_ratio: if c2 > 0.0 { c1 / c2 } else { f64::INFINITY },
        value: r_new,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum LineVerdict {
    Bounded { m: f64 },
    Unbounded { increments: Vec<f64> },
}

impl LineVerdict {
    pub fn is_bounded(&self) -> bool {
        matches!(self, LineVerdict::Bounded { .. })
    }
}

/// Whether the line `t ↦ t·v` is b-differentiable, read off the per-level seminorms.
///
/// The verdict is *unbounded* when the per-level seminorms increase strictly
/// (relative margin `1e-9`) across the last half of the levels.
pub fn line_b_differentiable(v: &GradedPoint, depth: usize) -> LineVerdict {
    let inc = v.ladder(depth).increments();
    let tail = &inc[depth / 2..];
    let growing = tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9) && w[1] > 0.0);
    if growing {
        LineVerdict::Unbounded { increments: inc }
    } else {
        LineVerdict::Bounded {
            m: inc.iter().fold(0.0, |a, b| a.max(*b)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BDiffOptions {
    /// Additional base points at which `⟨f'⟩` is estimated, in order.
    pub extra_bases: Vec<GradedPoint>,
    /// Number of sampled segments for the mean-value check.
    pub segments: usize,
    /// Number of directions in the finite-difference table.
    pub table_directions: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for BDiffOptions {
    fn default() -> Self {
        Self {
            extra_bases: Vec::new(),
            segments: 20,
            table_directions: 8,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectionalEntry {
    pub direction: usize,
    pub error: f64,
    pub richardson_ratio: f64,
    /// Max-abs gap between the finite difference and `jacobian_apply`.
    pub jacobian_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanValueCheck {
    pub segments: usize,
    /// `min (d(y,z)·L − d(f(y), f(z)))`; non-negative up to `1e-9` when the inequality holds.
    pub worst_slack: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DifferentiabilityReport {
    pub base_point: GradedPoint,
    pub radius: f64,
    pub table: Vec<DirectionalEntry>,
    /// Probe lower bound on `⟨f'(x)⟩_R`.
    pub derivative_bound: f64,
    /// Probe lower bound on `⟨f'(x) − I⟩_R`.
    pub identity_defect: f64,
    pub analytic_bound: Option<f64>,
    /// `⟨f'(y)⟩_R` estimates at `x` followed by each extra base point.
    pub base_bounds: Vec<f64>,
    /// `max ⟨f'(y) − f'(x)⟩ / d(y, x)` over the extra bases.
    pub base_lipschitz: f64,
    pub mean_value: Option<MeanValueCheck>,
    pub differentiable_at_point: bool,
    pub derivative_bounded: bool,
}

/// Largest `d(Lp)/d(p)` and `d(Lp − p)/d(p)` over probes inside the ball.
fn probe_jacobian<F: GradedMap + ?Sized>(
    f: &F,
    y: &GradedPoint,
    cfg: &GradedMetricConfig,
    radius: f64,
    plan: &ProbePlan,
    exec: Execution,
    against: Option<&GradedPoint>,
) -> Result<(f64, f64)> {
    let rows: Vec<Result<(f64, f64)>> = par::map_slice(exec, plan.points(), |p| {
        let d = cfg.norm(p);
        if !(d > 0.0 && d < radius) {
            return Ok((f64::NAN, f64::NAN));
        }
        let jp = f.jacobian_apply(y, p)?;
        let jp = match against {
            Some(x) => jp.sub(&f.jacobian_apply(x, p)?)?,
            None => jp,
        };
        let defect = jp.sub(p).map(|q| cfg.norm(&q) / d).unwrap_or(f64::NAN);
        Ok((cfg.norm(&jp) / d, defect))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let best = par::argmax(&a).ok_or(FrechetError::EmptyEstimate { radius })?.1;
    Ok((best, par::argmax(&b).map_or(f64::NAN, |r| r.1)))
}

/// Random element of the same model as `like`, max-abs 1.
pub(crate) fn random_like(like: &GradedPoint, rng: &mut ChaCha8Rng) -> GradedPoint {
    let v: Vec<f64> = (0..like.dof()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut p = like.from_vec_like(&v).expect("matching dof");
    if let GradedPoint::Func(_) = like {
        // keep the zero mode real
        let mut w = p.to_vec();
        w[0] = v[0];
        p = like.from_vec_like(&w).expect("matching dof");
    }
    let m = p.max_abs();
    p.scaled(1.0 / m)
}

/// Assembles directional derivatives, derivative-bound estimates and a
/// mean-value check for `f` near `x`.
pub fn b_diff_report<F: GradedMap + ?Sized>(
    f: &F,
    x: &GradedPoint,
    radius: f64,
    cfg: &GradedMetricConfig,
    plan: &ProbePlan,
    opts: &BDiffOptions,
) -> Result<DifferentiabilityReport> {
    let steps = default_steps();
    let mut table = Vec::new();
    let mut differentiable = true;
    for (i, p) in plan.points().iter().take(opts.table_directions).enumerate() {
        let dir = p.scaled(1.0 / p.max_abs());
        match directional_derivative(f, x, &dir, &steps) {
            Ok(dd) => {
                let gap = f.jacobian_apply(x, &dir)?.sub(&dd.value)?.max_abs();
                let scale = 1.0 + dd.value.max_abs();
                if !(dd.error <= 1e-6 * scale) {
                    differentiable = false;
                }
                table.push(DirectionalEntry {
                    direction: i,
                    error: dd.error,
                    richardson_ratio: dd.richardson_ratio,
                    jacobian_gap: gap,
                });
            }
            Err(FrechetError::Evaluation(_)) => differentiable = false,
            Err(e) => return Err(e),
        }
    }

    let (bound, defect) = probe_jacobian(f, x, cfg, radius, plan, opts.exec, None)?;
    let mut base_bounds = vec![bound];
    let mut base_lipschitz: f64 = 0.0;
    for y in &opts.extra_bases {
        base_bounds.push(probe_jacobian(f, y, cfg, radius, plan, opts.exec, None)?.0);
        let dist = cfg.distance(y, x)?;
        if dist > 0.0 {
            let (diff, _) = probe_jacobian(f, y, cfg, radius, plan, opts.exec, Some(x))?;
            base_lipschitz = base_lipschitz.max(diff / dist);
        }
    }
    let growing = base_bounds.len() >= 3
        && base_bounds.windows(2).all(|w| w[1] > w[0])
        && base_bounds[base_bounds.len() - 1] >= 4.0 * base_bounds[0];
    let derivative_bounded = base_bounds.iter().all(|b| b.is_finite()) && !growing;

    let analytic = f.derivative_bound(x, cfg);
    let mean_value = match analytic {
        Some(_) => Some(mean_value_check(f, x, cfg, opts)?),
        None => None,
    };

    Ok(DifferentiabilityReport {
        base_point: x.clone(),
        radius,
        table,
        derivative_bound: bound,
        identity_defect: defect,
        analytic_bound: analytic,
        base_bounds,
        base_lipschitz,
        mean_value,
        differentiable_at_point: differentiable,
        derivative_bounded,
    })
}

fn mean_value_check<F: GradedMap + ?Sized>(
    f: &F,
    x: &GradedPoint,
    cfg: &GradedMetricConfig,
    opts: &BDiffOptions,
) -> Result<MeanValueCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6d65_616e);
    let mut worst = f64::INFINITY;
    for s in 0..opts.segments {
        let scale = 10f64.powf(-2.0 + 3.0 * (s % 4) as f64 / 3.0);
        let y = x.axpy(scale, &random_like(x, &mut rng))?;
        let z = x.axpy(scale, &random_like(x, &mut rng))?;
        let l = (0..=4)
            .map(|k| {
                let t = k as f64 / 4.0;
                let p = y.axpy(t, &z.sub(&y).expect("same model")).expect("same model");
                f.derivative_bound(&p, cfg).unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        let lhs = cfg.distance(&f.eval(&y)?, &f.eval(&z)?)?;
        worst = worst.min(cfg.distance(&y, &z)? * l - lhs);
    }
    Ok(MeanValueCheck {
        segments: opts.segments,
        worst_slack: worst,
        holds: worst >= -1e-9,
    })
}

/// `u_k(x) = a·sin(kx)`: base points whose slopes sharpen with `k`.
pub fn sharpening_bases(bandwidth: usize, amplitude: f64, ks: &[usize]) -> Result<Vec<GradedPoint>> {
    ks.iter()
        .map(|&k| Ok(GradedPoint::Func(PeriodicFunction::sin(bandwidth, k)?.scaled(amplitude))))
        .collect()
}
