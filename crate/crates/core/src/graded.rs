//! Weight sequences, the concave modulus, and the two graded metric flavors.
//!
//! A graded metric turns an increasing ladder of seminorms
//! `δ_1 ≤ δ_2 ≤ …` into a single translation-invariant distance:
//!
//! * standard flavor: `Σ_n α_n Φ(δ_n)`
//! * supremum flavor: `max_n α_n Φ(δ_n)`
//!
//! where `Φ(x) = x / (1 + x)` and `α` is a positive non-increasing weight
//! sequence. Ladder entry `j` (zero based) is paired with weight `values[j]`,
//! so with dyadic weights the first level carries weight `1/2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrechetError, Result};
use crate::models::GradedPoint;

/// The fixed modulus `Φ(x) = x / (1 + x)` on `[0, ∞)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Modulus;

impl Modulus {
    /// `Φ(x)`; callers guarantee `x ≥ 0`.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        if x.is_infinite() {
            return 1.0;
        }
        x / (1.0 + x)
    }

    /// `Φ⁻¹(y) = y / (1 − y)` for `y ∈ [0, 1)`.
    #[inline]
    pub fn inverse(self, y: f64) -> f64 {
        y / (1.0 - y)
    }
}

/// `Φ(x)` with a domain check.
pub fn phi(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(FrechetError::Domain(format!("phi requires x >= 0, got {x}")));
    }
    Ok(Modulus.apply(x))
}

/// Positive, non-increasing weights `α_1, α_2, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    values: Vec<f64>,
}

impl WeightSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FrechetError::Domain("weight sequence is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(FrechetError::Domain(format!(
                "weights must be finite and positive, got {bad}"
            )));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(FrechetError::Domain("weights must be non-increasing".into()));
        }
        Ok(Self { values })
    }

    /// `(r, r², …, r^depth)`.
    pub fn geometric(r: f64, depth: usize) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(FrechetError::Domain(format!(
                "geometric weights need 0 < r < 1, got {r}"
            )));
        }
        if depth == 0 {
            return Err(FrechetError::Domain("depth must be positive".into()));
        }
        let values = (1..=depth).map(|n| r.powi(n as i32)).collect();
        Self::new(values)
    }

    /// `α_n = 2^{-n}`.
    pub fn dyadic(depth: usize) -> Self {
        Self::geometric(0.5, depth).expect("dyadic weights are valid for positive depth")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `max_n α_n / α_{n+1}`: how much a grade-lowering shift can dilate.
    pub fn max_up_ratio(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0] / w[1])
            .fold(1.0, f64::max)
    }

    /// `max_n α_{n+1} / α_n`: how much a grade-raising shift can dilate.
    pub fn max_down_ratio(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

/// Non-negative, non-decreasing seminorm values of one element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormLadder {
    values: Vec<f64>,
}

impl SeminormLadder {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0) || v.is_nan()) {
            return Err(FrechetError::Domain("ladder entries must be non-negative".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(FrechetError::Domain("ladder must be non-decreasing".into()));
        }
        Ok(Self { values })
    }

    /// Partial sums of the given per-level seminorms.
    pub fn from_increments(increments: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let values = increments
            .iter()
            .map(|x| {
                acc += x.abs();
                acc
            })
            .collect();
        Self::new(values)
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Per-level seminorms `δ_n − δ_{n−1}` (with `δ_{−1} = 0`).
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.values
            .iter()
            .map(|v| {
                let d = v - prev;
                prev = *v;
                d
            })
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c.abs()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// `Σ α_n Φ(δ_n)`
    StandardSum,
    /// `max α_n Φ(δ_n)`
    Supremum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradedMetricConfig {
    pub flavor: Flavor,
    pub weights: WeightSequence,
    pub truncation: usize,
}

impl GradedMetricConfig {
    pub fn new(flavor: Flavor, weights: WeightSequence, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(FrechetError::Domain("truncation must be positive".into()));
        }
        if truncation > weights.len() {
            return Err(FrechetError::Shape(format!(
                "truncation {truncation} exceeds {} weights",
                weights.len()
            )));
        }
        Ok(Self {
            flavor,
            weights,
            truncation,
        })
    }

    /// Standard flavor over all given weights.
    pub fn standard(weights: WeightSequence) -> Self {
        let truncation = weights.len();
        Self {
            flavor: Flavor::StandardSum,
            weights,
            truncation,
        }
    }

    /// Supremum flavor over all given weights.
    pub fn supremum(weights: WeightSequence) -> Self {
        let truncation = weights.len();
        Self {
            flavor: Flavor::Supremum,
            weights,
            truncation,
        }
    }

    pub fn with_flavor(&self, flavor: Flavor) -> Self {
        Self {
            flavor,
            ..self.clone()
        }
    }

    /// Metric value of a difference ladder, dispatching on the flavor.
    pub fn evaluate(&self, ladder: &SeminormLadder) -> Result<f64> {
        match self.flavor {
            Flavor::StandardSum => standard_metric(ladder, self),
            Flavor::Supremum => sup_metric(ladder, self),
        }
    }

    /// First-order rate `lim_{h→0} d(h·w, 0) / h` for a ladder of `w`.
    ///
    /// Since `Φ'(0) = 1` this is `Σ α_n δ_n` (resp. `max α_n δ_n`), which is
    /// positively homogeneous.
    pub fn rate(&self, ladder: &SeminormLadder) -> Result<f64> {
        check_len(ladder, self)?;
        let terms = self.weights.values()[..self.truncation]
            .iter()
            .zip(ladder.values())
            .map(|(a, d)| a * d);
        Ok(match self.flavor {
            Flavor::StandardSum => terms.sum(),
            Flavor::Supremum => terms.fold(0.0, f64::max),
        })
    }

    pub(crate) fn evaluate_unchecked(&self, ladder: &[f64]) -> f64 {
        let terms = self.weights.values()[..self.truncation]
            .iter()
            .zip(ladder)
            .map(|(a, d)| a * Modulus.apply(*d));
        match self.flavor {
            Flavor::StandardSum => terms.sum(),
            Flavor::Supremum => terms.fold(0.0, f64::max),
        }
    }
}

fn check_len(ladder: &SeminormLadder, cfg: &GradedMetricConfig) -> Result<()> {
    if ladder.len() < cfg.truncation {
        return Err(FrechetError::Shape(format!(
            "ladder has {} levels, metric truncation is {}",
            ladder.len(),
            cfg.truncation
        )));
    }
    Ok(())
}

/// `Σ_{n ≤ truncation} α_n Φ(δ_n)` for the ladder of a difference `a − b`.
pub fn standard_metric(ladder: &SeminormLadder, cfg: &GradedMetricConfig) -> Result<f64> {
    check_len(ladder, cfg)?;
    Ok(cfg.weights.values()[..cfg.truncation]
        .iter()
        .zip(ladder.values())
        .map(|(a, d)| a * Modulus.apply(*d))
        .sum())
}

/// `max_{n ≤ truncation} α_n Φ(δ_n)` for the ladder of a difference `a − b`.
pub fn sup_metric(ladder: &SeminormLadder, cfg: &GradedMetricConfig) -> Result<f64> {
    check_len(ladder, cfg)?;
    Ok(cfg.weights.values()[..cfg.truncation]
        .iter()
        .zip(ladder.values())
        .map(|(a, d)| a * Modulus.apply(*d))
        .fold(0.0, f64::max))
}

/// `l(r)_n = r^n` for `n = 1..=depth`.
pub fn geometric_weights(r: f64, depth: usize) -> Result<WeightSequence> {
    WeightSequence::geometric(r, depth)
}

/// The triple `(D_{l(r²)}, d_{l(r)}, D_{l(r)})` on one ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparability {
    pub standard_squared: f64,
    pub supremum: f64,
    pub standard: f64,
    /// Whether the triple is non-decreasing up to `1e-12`.
    pub ordered: bool,
    /// All three vanish (zero ladder).
    pub degenerate: bool,
}

pub fn comparability_check(ladder: &SeminormLadder, r: f64) -> Result<Comparability> {
    let depth = ladder.len();
    let squared = GradedMetricConfig::standard(WeightSequence::geometric(r * r, depth)?);
    let plain = WeightSequence::geometric(r, depth)?;
    let d_sup = sup_metric(ladder, &GradedMetricConfig::supremum(plain.clone()))?;
    let d_std = standard_metric(ladder, &GradedMetricConfig::standard(plain))?;
    let d_sq = standard_metric(ladder, &squared)?;
    const EQ_TOL: f64 = 1e-12;
    Ok(Comparability {
        standard_squared: d_sq,
        supremum: d_sup,
        standard: d_std,
        ordered: d_sq <= d_sup + EQ_TOL && d_sup <= d_std + EQ_TOL,
        degenerate: ladder.is_zero(),
    })
}

/// The piecewise-linear profile whose balls are not star shaped.
fn line_profile(t: f64) -> f64 {
    if t <= 1.0 {
        t
    } else if t <= 2.0 {
        1.0 - (t - 1.0) / 2.0
    } else {
        0.5 + (t - 2.0) / 3.0
    }
}

/// A translation-invariant metric on the real line with disconnected balls.
pub fn piecewise_line_metric(x: f64, y: f64) -> f64 {
    line_profile((x - y).abs())
}

/// A standard-metric ball that fails midpoint convexity.
#[derive(Clone, Debug, Serialize)]
pub struct NonConvexWitness {
    pub radius: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub d_u: f64,
    pub d_v: f64,
    pub d_mid: f64,
}

/// Scales `w` so that `norm(t·w) = target` (bisection on `t`); `None` when unreachable.
pub fn scale_to_norm<F>(w: &GradedPoint, target: f64, norm: F) -> Option<GradedPoint>
where
    F: Fn(&GradedPoint) -> f64,
{
    let mut hi = 1.0;
    let mut guard = 0;
    while norm(&w.scaled(hi)) < target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(&w.scaled(mid)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(w.scaled(lo))
}

/// Random search for `u, v` on a standard-metric sphere of radius `R` whose
/// midpoint leaves the closed ball.
pub fn find_nonconvex_witness(
    cfg: &GradedMetricConfig,
    dim: usize,
    seed: u64,
    trials: usize,
) -> Option<NonConvexWitness> {
    let cfg = cfg.with_flavor(Flavor::StandardSum);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii = [0.05, 0.1, 0.2, 0.3, 0.4];
    for trial in 0..trials {
        let radius = radii[trial % radii.len()];
        let draw = |rng: &mut ChaCha8Rng| {
            // sparse directions make the level structure differ between u and v
            let k = rng.random_range(0..dim);
            let mut c = vec![0.0; dim];
            c[k] = 1.0;
            if rng.random_bool(0.5) {
                for x in c.iter_mut() {
                    *x += rng.random_range(-0.2..0.2);
                }
            }
            GradedPoint::sequence(c)
        };
        let (Some(u), Some(v)) = (
            scale_to_norm(&draw(&mut rng), radius, |p| cfg.norm(p)),
            scale_to_norm(&draw(&mut rng), radius, |p| cfg.norm(p)),
        ) else {
            continue;
        };
        let mid = u.add(&v).ok()?.scaled(0.5);
        let (d_u, d_v, d_mid) = (cfg.norm(&u), cfg.norm(&v), cfg.norm(&mid));
        if d_u <= radius && d_v <= radius && d_mid > radius {
            return Some(NonConvexWitness {
                radius,
                u: u.as_sequence().unwrap().to_vec(),
                v: v.as_sequence().unwrap().to_vec(),
                d_u,
                d_v,
                d_mid,
            });
        }
    }
    None
}
