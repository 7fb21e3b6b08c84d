use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::models::{GradedPoint, PeriodicFunction};

/// Log-spaced values `10^{lo}, …, 10^{hi}` (inclusive), `count ≥ 2`.
pub(crate) fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// A deterministic, ordered family of nonzero probe elements.
///
/// Each probe records the magnitude it was scaled to and a group id shared
/// by all probes of that magnitude.
#[derive(Clone, Debug)]
pub struct ProbePlan {
    points: Vec<GradedPoint>,
    magnitudes: Vec<f64>,
    groups: Vec<usize>,
}

const BASIS_SCALES: usize = 21;
const RANDOM_SCALES: usize = 8;

impl ProbePlan {
    pub fn from_points(points: Vec<GradedPoint>) -> Self {
        let magnitudes = points.iter().map(GradedPoint::max_abs).collect();
        let groups = vec![0; points.len()];
        Self {
            points,
            magnitudes,
            groups,
        }
    }

    /// `t·e_k` for every `k ≤ dim` and 21 log-spaced `t ∈ [1e-3, 1e3]`, then
    /// `random` seeded vectors, each scaled to 8 log-spaced magnitudes.
    pub fn sequences(dim: usize, seed: u64, random: usize) -> Self {
        let mut plan = Self::empty();
        for (g, t) in log_spaced(-3.0, 3.0, BASIS_SCALES).into_iter().enumerate() {
            for k in 1..=dim {
                plan.push(GradedPoint::basis(dim, k).scaled(t), t, g);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<GradedPoint> = (0..random)
            .map(|_| normalized(GradedPoint::sequence((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())))
            .collect();
        plan.push_scaled(&dirs);
        plan
    }

    /// `t·cos(kx)`, `t·sin(kx)` for `k ≤ bandwidth` and 21 scales, then
    /// `random` seeded band-limited functions at 8 magnitudes.
    pub fn functions(bandwidth: usize, seed: u64, random: usize) -> Self {
        let mut plan = Self::empty();
        for (g, t) in log_spaced(-3.0, 3.0, BASIS_SCALES).into_iter().enumerate() {
            for k in 0..=bandwidth {
                let c = PeriodicFunction::cos(bandwidth, k).expect("k within bandwidth");
                plan.push(GradedPoint::Func(c).scaled(t), t, g);
                if k > 0 {
                    let s = PeriodicFunction::sin(bandwidth, k).expect("k within bandwidth");
                    plan.push(GradedPoint::Func(s).scaled(t), t, g);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dirs: Vec<GradedPoint> = (0..random)
            .map(|_| normalized(random_function(&mut rng, bandwidth)))
            .collect();
        plan.push_scaled(&dirs);
        plan
    }

    fn empty() -> Self {
        Self {
            points: Vec::new(),
            magnitudes: Vec::new(),
            groups: Vec::new(),
        }
    }

    fn push(&mut self, p: GradedPoint, magnitude: f64, group: usize) {
        self.points.push(p);
        self.magnitudes.push(magnitude);
        self.groups.push(group);
    }

    fn push_scaled(&mut self, dirs: &[GradedPoint]) {
        let base = self.groups.iter().max().map_or(0, |g| g + 1);
        for (g, t) in log_spaced(-3.0, 3.0, RANDOM_SCALES).into_iter().enumerate() {
            for d in dirs {
                self.push(d.scaled(t), t, base + g);
            }
        }
    }

    pub fn points(&self) -> &[GradedPoint] {
        &self.points
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn normalized(p: GradedPoint) -> GradedPoint {
    let m = p.max_abs();
    if m > 0.0 {
        p.scaled(1.0 / m)
    } else {
        p
    }
}

/// Random real trigonometric polynomial with decaying mode amplitudes.
pub(crate) fn random_function(rng: &mut ChaCha8Rng, bandwidth: usize) -> GradedPoint {
    let coeffs = (0..=bandwidth)
        .map(|k| {
            let decay = 1.0 / (1.0 + k as f64);
            let re = rng.random_range(-1.0..1.0) * decay;
            let im = if k == 0 { 0.0 } else { rng.random_range(-1.0..1.0) * decay };
            num_complex::Complex64::new(re, im)
        })
        .collect();
    GradedPoint::Func(PeriodicFunction::new(coeffs).expect("finite coefficients"))
}

/// The single Banach norm `sup |·|` (sup over the circle, or max-abs for sequences).
pub fn c0_norm(p: &GradedPoint) -> f64 {
    match p {
        GradedPoint::Seq(s) => s.coords().iter().fold(0.0, |m, x| m.max(x.abs())),
        GradedPoint::Func(f) => f.sup_norm(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UnboundednessReport {
    pub ratios: Vec<f64>,
    /// Ratios strictly increase along the family.
    pub monotone_growth: bool,
    /// Last ratio over first ratio.
    pub growth_factor: f64,
}

impl UnboundednessReport {
    fn from_ratios(ratios: Vec<f64>) -> Self {
        let monotone_growth = ratios.len() > 1 && ratios.windows(2).all(|w| w[1] > w[0]);
        let growth_factor = match (ratios.first(), ratios.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            _ => f64::NAN,
        };
        Self {
            ratios,
            monotone_growth,
            growth_factor,
        }
    }
}

/// `norm(map(w_k)) / norm(w_k)` along an indexed witness family.
pub fn unboundedness_probe<F, N>(map: F, witnesses: &[GradedPoint], norm: N) -> Result<UnboundednessReport>
where
    F: Fn(&GradedPoint) -> Result<GradedPoint>,
    N: Fn(&GradedPoint) -> f64,
{
    let ratios = witnesses
        .iter()
        .map(|w| Ok(norm(&map(w)?) / norm(w)))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnboundednessReport::from_ratios(ratios))
}

/// Difference-quotient ratios `norm(f(u_k + h v_k) − f(u_k)) / norm(h v_k)`
/// for a nonlinear map along base points `u_k` and directions `v_k`.
pub fn difference_quotient_probe<F, N>(
    map: F,
    bases: &[GradedPoint],
    directions: &[GradedPoint],
    h: f64,
    norm: N,
) -> Result<UnboundednessReport>
where
    F: Fn(&GradedPoint) -> Result<GradedPoint>,
    N: Fn(&GradedPoint) -> f64,
{
    let ratios = bases
        .iter()
        .zip(directions)
        .map(|(u, v)| {
            let step = v.scaled(h);
            let num = map(&u.add(&step)?)?.sub(&map(u)?)?;
            Ok(norm(&num) / norm(&step))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnboundednessReport::from_ratios(ratios))
}
