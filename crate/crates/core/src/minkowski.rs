//! Gauges of supremum-metric balls and empirical tame-grade estimation.

use serde::Serialize;

use crate::error::{FrechetError, Result};
use crate::graded::{Flavor, GradedMetricConfig, Modulus};
use crate::models::GradedPoint;
use crate::operators::ProbePlan;
use crate::par::{self, Execution};

/// Supremum of the supremum metric over the whole space (never attained).
fn metric_sup(cfg: &GradedMetricConfig) -> f64 {
    cfg.weights.values()[..cfg.truncation]
        .iter()
        .fold(0.0, |m, a| m.max(*a))
}

fn sup_value(weights: &[f64], ladder: &[f64], lambda: f64) -> f64 {
    weights
        .iter()
        .zip(ladder)
        .map(|(a, l)| a * Modulus.apply(l / lambda))
        .fold(0.0, f64::max)
}

/// Gauge of the closed supremum-metric ball of radius `eps`, from a ladder.
///
/// Bisection runs on the ladder normalised by its largest entry, so scaling
/// the element by a power of two scales the result exactly.
fn gauge_from_ladder(weights: &[f64], ladder: &[f64], eps: f64, tol: f64) -> f64 {
    let top = ladder.iter().fold(0.0, |m: f64, x| m.max(*x));
    if top == 0.0 {
        return 0.0;
    }
    let reach = weights
        .iter()
        .zip(ladder)
        .filter(|(_, l)| **l > 0.0)
        .fold(0.0, |m: f64, (a, _)| m.max(*a));
    if reach <= eps {
        // the whole ray through v stays inside the ball
        return 0.0;
    }
    let unit: Vec<f64> = ladder.iter().map(|l| l / top).collect();
    // d(v/λ) is non-increasing in λ; find λ with d(v/λ) = eps
    let (mut lo, mut hi) = (1.0, 1.0);
    while sup_value(weights, &unit, lo) <= eps {
        lo *= 0.5;
    }
    while sup_value(weights, &unit, hi) > eps {
        hi *= 2.0;
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if sup_value(weights, &unit, mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi * top
}

/// `‖v‖_i = inf{λ > 0 : d_sup(v/λ, 0) ≤ 1/i}`.
///
/// The supremum flavor of `cfg` is used whatever its configured flavor.
pub fn minkowski_functional(cfg: &GradedMetricConfig, i: usize, v: &GradedPoint, tol: f64) -> Result<f64> {
    if i == 0 {
        return Err(FrechetError::Domain("index must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(FrechetError::Domain("tolerance must be positive".into()));
    }
    let eps = 1.0 / i as f64;
    let sup = metric_sup(cfg);
    if v.is_zero() {
        return Ok(0.0);
    }
    if eps >= sup {
        return Err(FrechetError::DegenerateBall { radius: eps, sup });
    }
    let w = &cfg.weights.values()[..cfg.truncation];
    Ok(gauge_from_ladder(w, &v.ladder_values(cfg.truncation), eps, tol))
}

/// `M_n = α_n · gauge(B_{α_n})(v)` for every level `n < truncation`.
///
/// With weights at most 1 and non-increasing, `M_n ≤ δ_n(v)`. The first
/// level's ball is the whole space, so `M_0 = 0`.
pub fn scaled_minkowski_ladder(cfg: &GradedMetricConfig, v: &GradedPoint, tol: f64) -> Vec<f64> {
    let w = &cfg.weights.values()[..cfg.truncation];
    let ladder = v.ladder_values(cfg.truncation);
    let sup = metric_sup(cfg);
    w.iter()
        .map(|&a| {
            if a >= sup {
                0.0
            } else {
                a * gauge_from_ladder(w, &ladder, a, tol)
            }
        })
        .collect()
}

/// Residual `d_sup(v/λ, 0) − 1/i` of a computed functional.
pub fn bisection_residual(cfg: &GradedMetricConfig, i: usize, v: &GradedPoint, lambda: f64) -> f64 {
    let sup_cfg = cfg.with_flavor(Flavor::Supremum);
    sup_cfg.norm(&v.scaled(1.0 / lambda)) - 1.0 / i as f64
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum TameVerdict {
    Satisfied,
    Falsified {
        probe: usize,
        level: usize,
        ratio: f64,
        reason: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct TameEstimate {
    pub base: usize,
    pub grade: usize,
    /// `C_n` for `n = base + 1, …` (entry `j` is level `base + 1 + j`).
    pub constants: Vec<f64>,
    /// Largest / smallest per-magnitude maximum, per level.
    pub spreads: Vec<f64>,
    pub stability_threshold: f64,
    pub verdict: TameVerdict,
}

impl TameEstimate {
    pub fn is_satisfied(&self) -> bool {
        matches!(self.verdict, TameVerdict::Satisfied)
    }
}

pub const STABILITY_THRESHOLD: f64 = 10.0;

struct LevelStats {
    constant: f64,
    spread: f64,
    worst_probe: usize,
}

fn level_stats(a: &[Vec<f64>], b: &[Vec<f64>], groups: &[usize], n: usize, r: usize) -> LevelStats {
    let ratios: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(fa, fb)| {
            let (num, den) = (fb[n], fa[n + r]);
            if num == 0.0 {
                f64::NAN
            } else if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            }
        })
        .collect();
    let (worst_probe, constant) = par::argmax(&ratios).unwrap_or((0, 0.0));
    let mut group_max: std::collections::BTreeMap<usize, f64> = Default::default();
    for (g, r) in groups.iter().zip(&ratios) {
        if !r.is_nan() {
            let e = group_max.entry(*g).or_insert(0.0);
            *e = e.max(*r);
        }
    }
    let hi = group_max.values().fold(0.0, |m: f64, x| m.max(*x));
    let lo = group_max.values().fold(f64::INFINITY, |m: f64, x| m.min(*x));
    let spread = if group_max.is_empty() { 1.0 } else { hi / lo };
    LevelStats {
        constant,
        spread,
        worst_probe,
    }
}

/// Smallest grade `r ≤ max_grade` (then smallest base `b`) such that
/// `b_n ≤ C_n·a_{n+r}` holds with finite, magnitude-stable constants for all
/// `n > b`, over a probe set.
pub fn tame_grade_estimate<A, B>(
    family_a: A,
    family_b: B,
    probes: &ProbePlan,
    max_grade: usize,
    exec: Execution,
) -> TameEstimate
where
    A: Fn(&GradedPoint) -> Vec<f64> + Sync + Send,
    B: Fn(&GradedPoint) -> Vec<f64> + Sync + Send,
{
    let a = par::map_slice(exec, probes.points(), &family_a);
    let b = par::map_slice(exec, probes.points(), &family_b);
    let depth = a.iter().chain(&b).map(Vec::len).min().unwrap_or(0);
    let groups = probes.groups();
    let mut first_failure: Option<TameEstimate> = None;
    for r in 0..=max_grade.min(depth.saturating_sub(1)) {
        let top = depth - r;
        let stats: Vec<LevelStats> = (0..top).map(|n| level_stats(&a, &b, groups, n, r)).collect();
        let bad = |s: &LevelStats| !s.constant.is_finite() || !(s.spread < STABILITY_THRESHOLD);
        // smallest base such that every level above it is good
        let base = stats.iter().rposition(bad).map_or(0, |p| p + 1);
        if base + 1 < top {
            let kept = &stats[base + 1..];
            return TameEstimate {
                base,
                grade: r,
                constants: kept.iter().map(|s| s.constant).collect(),
                spreads: kept.iter().map(|s| s.spread).collect(),
                stability_threshold: STABILITY_THRESHOLD,
                verdict: TameVerdict::Satisfied,
            };
        }
        if first_failure.is_none() {
            let (level, s) = stats
                .iter()
                .enumerate()
                .filter(|(_, s)| bad(s))
                .max_by(|x, y| x.1.spread.total_cmp(&y.1.spread))
                .expect("some level failed");
            first_failure = Some(TameEstimate {
                base: 0,
                grade: r,
                constants: stats.iter().map(|s| s.constant).collect(),
                spreads: stats.iter().map(|s| s.spread).collect(),
                stability_threshold: STABILITY_THRESHOLD,
                verdict: TameVerdict::Falsified {
                    probe: s.worst_probe,
                    level,
                    ratio: s.constant,
                    reason: if s.constant.is_finite() {
                        format!("constant varies {:.3e}x across probe magnitudes", s.spread)
                    } else {
                        "family_a vanishes where family_b does not".into()
                    },
                },
            });
        }
    }
    first_failure.unwrap_or(TameEstimate {
        base: 0,
        grade: 0,
        constants: Vec::new(),
        spreads: Vec::new(),
        stability_threshold: STABILITY_THRESHOLD,
        verdict: TameVerdict::Falsified {
            probe: 0,
            level: 0,
            ratio: f64::NAN,
            reason: "families too short for any grade".into(),
        },
    })
}

/// Tame estimates in both directions: `(b by a, a by b)`.
pub fn tame_equivalence<A, B>(
    family_a: A,
    family_b: B,
    probes: &ProbePlan,
    max_grade: usize,
    exec: Execution,
) -> (TameEstimate, TameEstimate)
where
    A: Fn(&GradedPoint) -> Vec<f64> + Sync + Send,
    B: Fn(&GradedPoint) -> Vec<f64> + Sync + Send,
{
    let forward = tame_grade_estimate(&family_a, &family_b, probes, max_grade, exec);
    let backward = tame_grade_estimate(&family_b, &family_a, probes, max_grade, exec);
    (forward, backward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::WeightSequence;

    fn sup_cfg(levels: usize) -> GradedMetricConfig {
        GradedMetricConfig::supremum(WeightSequence::dyadic(levels))
    }

    #[test]
    fn e1_at_four() {
        let cfg = sup_cfg(30);
        let e1 = GradedPoint::basis(30, 1);
        let m = minkowski_functional(&cfg, 4, &e1, 1e-12).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
        let m2 = minkowski_functional(&cfg, 4, &e1.scaled(2.0), 1e-12).unwrap();
        assert_eq!(m2, 2.0 * m);
        assert_eq!(minkowski_functional(&cfg, 4, &e1.zero_like(), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn ray_inside_ball_has_zero_gauge() {
        let cfg = sup_cfg(12);
        let e12 = GradedPoint::basis(12, 12);
        assert_eq!(minkowski_functional(&cfg, 4, &e12, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_radius() {
        let cfg = sup_cfg(8);
        let e1 = GradedPoint::basis(8, 1);
        assert!(matches!(
            minkowski_functional(&cfg, 2, &e1, 1e-9),
            Err(FrechetError::DegenerateBall { .. })
        ));
    }

    #[test]
    fn scaled_ladder_below_seminorms() {
        let cfg = sup_cfg(12);
        let v = GradedPoint::sequence(vec![0.3, -2.0, 0.0, 5.0, 1e-3, 0.7, 0.0, 0.0, 2.0, 0.1, 0.0, 1.0]);
        let m = scaled_minkowski_ladder(&cfg, &v, 1e-12);
        let l = v.ladder_values(12);
        assert_eq!(m[0], 0.0);
        for (a, b) in m.iter().zip(&l) {
            assert!(*a <= b * (1.0 + 1e-9), "{m:?} vs {l:?}");
        }
    }

    #[test]
    fn self_family_is_grade_zero() {
        let plan = ProbePlan::sequences(6, 4, 10);
        let fam = |p: &GradedPoint| p.ladder_values(6);
        let est = tame_grade_estimate(fam, fam, &plan, 3, Execution::Sequential);
        assert!(est.is_satisfied());
        assert_eq!((est.base, est.grade), (0, 0));
        assert!(est.constants.iter().all(|c| *c == 1.0));
    }
}
