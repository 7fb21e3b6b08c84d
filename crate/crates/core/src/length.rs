//! Curve lengths: the Gromov partition length `L₀`, the metric length `l`
//! and the smooth length `L`, plus arc-length reparametrization.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::random_like;
use crate::error::{FrechetError, Result};
use crate::graded::{Flavor, GradedMetricConfig, Modulus};
use crate::minkowski::scaled_minkowski_ladder;
use crate::models::CurveSpec;
use crate::models::GradedPoint;
use crate::par::{self, Execution};

/// Growth factor over three refinement levels that counts as divergence.
pub const GROWTH_FACTOR: f64 = 1.5;
/// The growth test applies once every chord's top seminorm is below this,
/// where `Φ` is close to linear.
pub const LINEAR_REGIME: f64 = 0.1;
/// Deepest dyadic level for curves without a closed-form chord.
pub const MAX_SAMPLED_LEVEL: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthVerdict {
    Finite,
    Divergent,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct LengthResult {
    /// Last estimate; only a length when the verdict is finite.
    pub value: f64,
    pub verdict: LengthVerdict,
    /// Refinement or quadrature level reached.
    pub level: usize,
    /// Estimates per level.
    pub history: Vec<f64>,
    /// Value restricted to the first `t + 1` metric levels, at the final refinement.
    pub depth_profile: Vec<f64>,
}

impl LengthResult {
    pub fn is_finite(&self) -> bool {
        self.verdict == LengthVerdict::Finite
    }
}

/// Metric of a ladder truncated to every prefix `1..=T`.
fn prefix_values(cfg: &GradedMetricConfig, ladder: &[f64]) -> Vec<f64> {
    let w = &cfg.weights.values()[..cfg.truncation];
    let mut acc = 0.0;
    w.iter()
        .zip(ladder)
        .map(|(a, d)| {
            let term = a * Modulus.apply(*d);
            acc = match cfg.flavor {
                Flavor::StandardSum => acc + term,
                Flavor::Supremum => f64::max(acc, term),
            };
            acc
        })
        .collect()
}

/// Whether the per-level contributions to the depth profile stop decaying.
///
/// With bounded seminorms the contribution of level `n` shrinks with the
/// weights. The profile counts as growing when the contributions over the
/// last half of the levels are positive and non-decreasing.
pub fn depth_profile_grows(profile: &[f64]) -> bool {
    let t = profile.len();
    if t < 4 {
        return false;
    }
    let gain = |n: usize| if n == 0 { profile[0] } else { profile[n] - profile[n - 1] };
    let half = t / 2;
    gain(half) > 0.0 && (half + 1..t).all(|n| gain(n) >= gain(n - 1))
}

/// Sum of chord distances over the uniform partition into `2^level` pieces,
/// resolved by metric depth, with the largest top seminorm over all chords.
fn partition_profile(c: &CurveSpec, cfg: &GradedMetricConfig, level: usize, exec: Execution) -> (Vec<f64>, f64) {
    let (a, b) = c.domain;
    let pieces = 1usize << level;
    let h = (b - a) / pieces as f64;
    if c.has_constant_velocity() {
        let ladder = c.velocity(a).scaled(h).ladder_values(cfg.truncation);
        let top = ladder.last().copied().unwrap_or(0.0);
        let profile = prefix_values(cfg, &ladder).into_iter().map(|p| p * pieces as f64).collect();
        return (profile, top);
    }
    let t = |i: usize| if i == pieces { b } else { a + h * i as f64 };
    let rows = par::map_range(exec, pieces, |i| {
        let chord = c.position(t(i + 1)).sub(&c.position(t(i))).expect("curve stays in one model");
        let ladder = chord.ladder_values(cfg.truncation);
        (prefix_values(cfg, &ladder), ladder.last().copied().unwrap_or(0.0))
    });
    let mut total = vec![0.0; cfg.truncation];
    let mut top = 0.0f64;
    for (row, t) in rows {
        top = top.max(t);
        for (s, x) in total.iter_mut().zip(row) {
            *s += x;
        }
    }
    (total, top)
}

/// `L₀(c) = sup_P Σ d(c(t_{i+1}), c(t_i))` over dyadic partitions.
///
/// Finite once consecutive levels differ by less than `tol`. Divergent when
/// the sum grows by [`GROWTH_FACTOR`] over three levels that all have their
/// chords in the [`LINEAR_REGIME`], or when the depth profile keeps growing.
/// Otherwise the result is indeterminate at `max_level`.
pub fn gromov_length(c: &CurveSpec, cfg: &GradedMetricConfig, tol: f64, max_level: usize) -> Result<LengthResult> {
    gromov_length_with(c, cfg, tol, max_level, Execution::default())
}

pub fn gromov_length_with(
    c: &CurveSpec,
    cfg: &GradedMetricConfig,
    tol: f64,
    max_level: usize,
    exec: Execution,
) -> Result<LengthResult> {
    if !(tol > 0.0) {
        return Err(FrechetError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let cap = if c.has_constant_velocity() { 62 } else { MAX_SAMPLED_LEVEL };
    let max_level = max_level.min(cap);
    let mut history: Vec<f64> = Vec::new();
    let mut tops: Vec<f64> = Vec::new();
    let mut best = 0.0f64;
    let mut profile = Vec::new();
    for level in 0..=max_level {
        let (p, top) = partition_profile(c, cfg, level, exec);
        profile = p;
        tops.push(top);
        let sum = profile.last().copied().unwrap_or(0.0);
        if !sum.is_finite() {
            return Err(FrechetError::Evaluation(format!("non-finite partition sum at level {level}")));
        }
        best = best.max(sum);
        history.push(best);
        let result = |verdict| LengthResult {
            value: best,
            verdict,
            level,
            history: history.clone(),
            depth_profile: profile.clone(),
        };
        if level >= 1 && (best - history[level - 1]).abs() < tol {
            return Ok(result(LengthVerdict::Finite));
        }
        let grew = level >= 3 && tops[level - 3] <= LINEAR_REGIME && best >= GROWTH_FACTOR * history[level - 3];
        if grew || (level >= 1 && depth_profile_grows(&profile)) {
            return Ok(result(LengthVerdict::Divergent));
        }
    }
    Ok(LengthResult {
        value: best,
        verdict: LengthVerdict::Indeterminate,
        level: max_level,
        history,
        depth_profile: profile,
    })
}

const QUAD_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 40;

type Sample = Vec<f64>;

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn simpson_rule(h: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Sample {
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((a, m), b)| h / 6.0 * (a + 4.0 * m + b))
        .collect()
}

struct Panel {
    integral: Sample,
    coarse: Sample,
    converged: bool,
}

/// Adaptive Simpson on one panel; `tol` is an absolute max-norm target.
#[allow(clippy::too_many_arguments)]
fn adapt<F>(f: &F, a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64], whole: Sample, tol: f64, depth: usize) -> Result<(Sample, bool)>
where
    F: Fn(f64) -> Result<Sample>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (f(0.5 * (a + m))?, f(0.5 * (m + b))?);
    let left = simpson_rule(m - a, fa, &lm, fm);
    let right = simpson_rule(b - m, fm, &rm, fb);
    let sum: Sample = left.iter().zip(&right).map(|(l, r)| l + r).collect();
    let err = max_gap(&sum, &whole);
    if err <= 15.0 * tol {
        let corrected = sum.iter().zip(&whole).map(|(s, w)| s + (s - w) / 15.0).collect();
        return Ok((corrected, true));
    }
    if depth >= MAX_BISECTIONS {
        return Ok((sum, false));
    }
    let (l, lok) = adapt(f, a, m, fa, &lm, fm, left, 0.5 * tol, depth + 1)?;
    let (r, rok) = adapt(f, m, b, fm, &rm, fb, right, 0.5 * tol, depth + 1)?;
    Ok((l.iter().zip(&r).map(|(x, y)| x + y).collect(), lok && rok))
}

/// Vector-valued adaptive Simpson over `nodes` uniform panels. Returns the
/// integral, the history `[uniform Simpson, adaptive]` of the scalar summary
/// `reduce`, and whether every panel met the tolerance.
fn simpson_vec<F, R>(f: F, reduce: R, domain: (f64, f64), nodes: usize) -> Result<(Vec<f64>, Vec<f64>, bool)>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync + Send,
    R: Fn(&[f64]) -> f64,
{
    let (a, b) = domain;
    let panels = nodes.max(1);
    let h = (b - a) / panels as f64;
    let edge = |i: usize| if i == panels { b } else { a + h * i as f64 };
    let scale = {
        let probe = f(a)?;
        probe.iter().fold(1.0f64, |m, x| m.max(x.abs())) * (b - a).abs().max(f64::MIN_POSITIVE)
    };
    let tol = QUAD_TOL * scale / panels as f64;
    let results = par::map_range(Execution::default(), panels, |i| -> Result<Panel> {
        let (lo, hi) = (edge(i), edge(i + 1));
        let (fa, fm, fb) = (f(lo)?, f(0.5 * (lo + hi))?, f(hi)?);
        let coarse = simpson_rule(hi - lo, &fa, &fm, &fb);
        let (integral, converged) = adapt(&f, lo, hi, &fa, &fm, &fb, coarse.clone(), tol, 0)?;
        Ok(Panel { integral, coarse, converged })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let width = results.first().map_or(0, |p| p.integral.len());
    let mut total = vec![0.0; width];
    let mut coarse = vec![0.0; width];
    let mut stable = true;
    for p in &results {
        for k in 0..width {
            total[k] += p.integral[k];
            coarse[k] += p.coarse[k];
        }
        stable &= p.converged;
    }
    Ok((total.clone(), vec![reduce(&coarse), reduce(&total)], stable))
}

fn check_velocity(v: &GradedPoint, t: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(FrechetError::Evaluation(format!("velocity is not finite at t = {t}")))
    }
}

/// `L(c) = Σ_n α_n Φ(∫ δ_n(ċ(t)) dt)`.
pub fn smooth_length(c: &CurveSpec, cfg: &GradedMetricConfig, nodes: usize) -> Result<LengthResult> {
    let (a, b) = c.domain;
    let finish = |ints: &[f64], level, history, verdict| LengthResult {
        value: cfg.evaluate_unchecked(ints),
        verdict,
        level,
        history,
        depth_profile: prefix_values(cfg, ints),
    };
    if c.has_constant_velocity() {
        let v = c.velocity(a);
        check_velocity(&v, a)?;
        let ints: Vec<f64> = v.ladder_values(cfg.truncation).iter().map(|d| d * (b - a)).collect();
        let value = cfg.evaluate_unchecked(&ints);
        return Ok(finish(&ints, 0, vec![value], LengthVerdict::Finite));
    }
    let ladder = |t: f64| -> Result<Vec<f64>> {
        let v = c.velocity(t);
        check_velocity(&v, t)?;
        Ok(v.ladder_values(cfg.truncation))
    };
    let (ints, history, stable) = simpson_vec(ladder, |x| cfg.evaluate_unchecked(x), c.domain, nodes)?;
    let verdict = if stable { LengthVerdict::Finite } else { LengthVerdict::Indeterminate };
    Ok(finish(&ints, history.len() - 1, history, verdict))
}

/// `l(c) = ∫ Σ_n α_n Φ(m_n(ċ(t))) dt` with `m_n` the scaled Minkowski ladder.
pub fn metric_length(c: &CurveSpec, cfg: &GradedMetricConfig, nodes: usize) -> Result<LengthResult> {
    const GAUGE_TOL: f64 = 1e-13;
    let (a, b) = c.domain;
    let terms = |t: f64| -> Result<Vec<f64>> {
        let v = c.velocity(t);
        check_velocity(&v, t)?;
        let m = scaled_minkowski_ladder(cfg, &v, GAUGE_TOL);
        Ok(prefix_values(cfg, &m))
    };
    if c.has_constant_velocity() {
        let profile: Vec<f64> = terms(a)?.into_iter().map(|p| p * (b - a)).collect();
        let value = profile.last().copied().unwrap_or(0.0);
        return Ok(LengthResult {
            value,
            verdict: LengthVerdict::Finite,
            level: 0,
            history: vec![value],
            depth_profile: profile,
        });
    }
    let (profile, history, stable) = simpson_vec(terms, |x| x.last().copied().unwrap_or(0.0), c.domain, nodes)?;
    Ok(LengthResult {
        value: profile.last().copied().unwrap_or(0.0),
        verdict: if stable { LengthVerdict::Finite } else { LengthVerdict::Indeterminate },
        level: history.len() - 1,
        history,
        depth_profile: profile,
    })
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss_legendre<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

/// Cumulative first-order arc length of a curve on a fixed grid.
struct ArcTable {
    knots: Vec<f64>,
    cumulative: Vec<f64>,
    speed: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ArcTable {
    fn integral(&self, a: f64, b: f64) -> f64 {
        // four Gauss-Legendre panels per call keep the local error far below 1e-10
        let h = (b - a) / 4.0;
        (0..4)
            .map(|k| gauss_legendre(&*self.speed, a + h * k as f64, a + h * (k + 1) as f64))
            .sum()
    }

    /// Parameter `t` with `s(t) = sigma`, by safeguarded Newton steps.
    fn invert(&self, sigma: f64) -> f64 {
        let last = self.knots.len() - 1;
        let i = match self.cumulative.binary_search_by(|x| x.total_cmp(&sigma)) {
            Ok(i) => return self.knots[i],
            Err(0) => return self.knots[0],
            Err(i) if i > last => return self.knots[last],
            Err(i) => i - 1,
        };
        let (mut lo, mut hi) = (self.knots[i], self.knots[i + 1]);
        let base = self.cumulative[i];
        let target = sigma - base;
        let mut t = lo + (hi - lo) * target / (self.cumulative[i + 1] - base);
        for _ in 0..60 {
            let g = self.integral(self.knots[i], t) - target;
            if g.abs() <= 1e-15 * sigma.abs().max(1.0) {
                break;
            }
            if g > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = t - g / (self.speed)(t);
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        t
    }
}

/// Reparametrizes `c` by first-order arc length, so that the rate of the
/// new velocity is 1 everywhere.
pub fn arclength_reparam(c: &CurveSpec, cfg: &GradedMetricConfig, nodes: usize) -> Result<CurveSpec> {
    let nodes = nodes.max(1);
    let (a, b) = c.domain;
    let curve = c.clone();
    let metric = cfg.clone();
    let speed = Arc::new(move |t: f64| metric.point_rate(&curve.velocity(t)));
    let knots: Vec<f64> = (0..=nodes)
        .map(|i| if i == nodes { b } else { a + (b - a) * i as f64 / nodes as f64 })
        .collect();
    let speeds: Vec<f64> = knots.iter().map(|t| speed(*t)).collect();
    let top = speeds.iter().fold(0.0f64, |m, s| m.max(*s));
    for (t, s) in knots.iter().zip(&speeds) {
        if !(s.is_finite()) || *s <= 1e-12 * top || *s == 0.0 {
            return Err(FrechetError::SingularVelocity { t: *t });
        }
    }
    let mut table = ArcTable {
        knots,
        cumulative: vec![0.0],
        speed: speed.clone(),
    };
    for w in 0..nodes {
        let piece = table.integral(table.knots[w], table.knots[w + 1]);
        table.cumulative.push(table.cumulative[w] + piece);
    }
    let total = *table.cumulative.last().expect("non-empty");
    let table = Arc::new(table);
    Ok(c.reparametrized((0.0, total), move |sigma| {
        let t = table.invert(sigma);
        (t, 1.0 / (table.speed)(t))
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    pub affine_length: f64,
    /// `L(perturbed) − L(affine)` per perturbation.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// Index of the perturbation attaining the minimal margin.
    pub witness: Option<usize>,
    pub holds: bool,
}

/// `t ↦ (1 − t)a + tb + sin(πt)·w`.
pub fn bumped_affine(a: &GradedPoint, b: &GradedPoint, w: &GradedPoint) -> Result<CurveSpec> {
    let d = b.sub(a)?;
    w.sub(a)?;
    let (a, w, w2, d2) = (a.clone(), w.clone(), w.clone(), d.clone());
    let pi = std::f64::consts::PI;
    Ok(CurveSpec::closed(
        move |t| a.axpy(t, &d).and_then(|p| p.axpy((pi * t).sin(), &w)).expect("same model"),
        move |t| d2.axpy(pi * (pi * t).cos(), &w2).expect("same model"),
        (0.0, 1.0),
    ))
}

/// Compares the smooth length of endpoint-fixed perturbations of the affine
/// path `a → b` against the affine path itself.
///
/// Perturbation `j` is `sin(πt)·w_j` with `w_j` a seeded random direction of
/// max-abs size `amplitude`.
#[allow(clippy::too_many_arguments)]
pub fn affine_minimality_probe(
    a: &GradedPoint,
    b: &GradedPoint,
    cfg: &GradedMetricConfig,
    seed: u64,
    count: usize,
    amplitude: f64,
    nodes: usize,
) -> Result<MinimalityReport> {
    let straight = smooth_length(&crate::models::affine_curve(a.clone(), b.clone())?, cfg, nodes)?.value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<GradedPoint> = (0..count)
        .map(|_| {
            let w = random_like(a, &mut rng);
            let m = w.max_abs();
            let s = if m > 0.0 { amplitude * rng.random_range(0.5..1.0) / m } else { 0.0 };
            w.scaled(s)
        })
        .collect();
    let mut margins = Vec::with_capacity(count);
    for w in &dirs {
        let c = bumped_affine(a, b, w)?;
        margins.push(smooth_length(&c, cfg, nodes)?.value - straight);
    }
    let witness = par::argmax(&margins.iter().map(|m| -m).collect::<Vec<_>>()).map(|(i, _)| i);
    let min_margin = witness.map_or(0.0, |i| margins[i]);
    Ok(MinimalityReport {
        affine_length: straight,
        holds: min_margin >= -1e-9,
        margins,
        min_margin,
        witness,
    })
}
