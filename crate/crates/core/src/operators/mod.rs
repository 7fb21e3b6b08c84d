//! Linear maps on graded models and their r-bounded norms.
//!
//! [`LinearMapModel`] is a small expression tree. Structured leaves (shifts,
//! diagonals, spectral differentiation) carry analytic bounds for `⟨·⟩`
//! obtained by re-indexing ladders; [`rbound_estimate`] brackets the same
//! quantity from below using a deterministic [`ProbePlan`].

mod distortion;
mod neumann;
mod probe;

pub use distortion::{distortion, DistortionReport};
pub use neumann::{identity_minus, neumann_invert, perturbed_invert_bound, NeumannInverse};
pub use probe::{c0_norm, difference_quotient_probe, unboundedness_probe, ProbePlan, UnboundednessReport};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::GradedMap;
use crate::error::{FrechetError, Result};
use crate::graded::GradedMetricConfig;
use crate::models::{GradedPoint, PeriodicFunction};
use crate::par::{self, Execution};

#[derive(Clone)]
pub enum LinearMapModel {
    Identity,
    /// Matrix acting on the flat degree-of-freedom vector.
    Dense(DMatrix<f64>),
    /// `(σa)_n = a_{n+1}`
    UpShift,
    /// `(τa)_1 = 0`, `(τa)_n = a_{n−1}`
    DownShift,
    /// Entrywise scaling (per coordinate, or per Fourier mode).
    Diagonal(Vec<f64>),
    /// Spectral `d/dx` on periodic functions.
    Derivative,
    /// `L_1 ∘ L_2 ∘ … ∘ L_k`; the last factor is applied first.
    Compose(Vec<LinearMapModel>),
    /// `Σ c_i L_i`
    Combination(Vec<(f64, LinearMapModel)>),
    /// `Σ_{i < terms} N^i`, optionally with a known bound `ρ ≥ ⟨N⟩`.
    NeumannSeries {
        residual: Box<LinearMapModel>,
        terms: usize,
        rho_bound: Option<f64>,
    },
    /// Jacobian of a nonlinear map at a base point.
    Linearized {
        map: Arc<dyn GradedMap>,
        at: GradedPoint,
    },
}

impl fmt::Debug for LinearMapModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "I"),
            Self::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            Self::UpShift => write!(f, "σ"),
            Self::DownShift => write!(f, "τ"),
            Self::Diagonal(d) => write!(f, "Diag(len {})", d.len()),
            Self::Derivative => write!(f, "∂"),
            Self::Compose(fs) => f.debug_tuple("Compose").field(fs).finish(),
            Self::Combination(ts) => f.debug_tuple("Sum").field(ts).finish(),
            Self::NeumannSeries { residual, terms, .. } => {
                write!(f, "Neumann({residual:?}, {terms} terms)")
            }
            Self::Linearized { map, .. } => write!(f, "D[{}]", map.name()),
        }
    }
}

fn shape(msg: impl Into<String>) -> FrechetError {
    FrechetError::Shape(msg.into())
}

impl LinearMapModel {
    /// `c·L`
    pub fn scaled(c: f64, l: LinearMapModel) -> Self {
        Self::Combination(vec![(c, l)])
    }

    /// `I + c·L`
    pub fn identity_plus(c: f64, l: LinearMapModel) -> Self {
        Self::Combination(vec![(1.0, Self::Identity), (c, l)])
    }

    pub fn derivative_operator() -> Self {
        Self::Derivative
    }

    pub fn apply(&self, v: &GradedPoint) -> Result<GradedPoint> {
        match self {
            Self::Identity => Ok(v.clone()),
            Self::Dense(m) => {
                let x = v.to_vec();
                if m.ncols() != x.len() || m.nrows() != x.len() {
                    return Err(shape(format!(
                        "{}x{} matrix on {} degrees of freedom",
                        m.nrows(),
                        m.ncols(),
                        x.len()
                    )));
                }
                let y = m * DVector::from_vec(x);
                v.from_vec_like(y.as_slice())
            }
            Self::UpShift => {
                let c = v.as_sequence().ok_or_else(|| shape("σ acts on sequences"))?;
                let mut out = vec![0.0; c.len()];
                if c.len() > 1 {
                    out[..c.len() - 1].copy_from_slice(&c[1..]);
                }
                Ok(GradedPoint::sequence(out))
            }
            Self::DownShift => {
                let c = v.as_sequence().ok_or_else(|| shape("τ acts on sequences"))?;
                let mut out = vec![0.0; c.len()];
                if c.len() > 1 {
                    out[1..].copy_from_slice(&c[..c.len() - 1]);
                }
                Ok(GradedPoint::sequence(out))
            }
            Self::Diagonal(d) => match v {
                GradedPoint::Seq(s) if s.len() == d.len() => Ok(GradedPoint::sequence(
                    s.coords().iter().zip(d).map(|(x, w)| w * x).collect(),
                )),
                GradedPoint::Func(f) if f.coeffs().len() == d.len() => {
                    let coeffs: Vec<Complex64> =
                        f.coeffs().iter().zip(d).map(|(c, w)| c * *w).collect();
                    Ok(GradedPoint::Func(PeriodicFunction::new(coeffs)?))
                }
                _ => Err(shape(format!("diagonal of length {} on {:?}", d.len(), v.tag()))),
            },
            Self::Derivative => {
                let f = v.as_function().ok_or_else(|| shape("∂ acts on periodic functions"))?;
                Ok(GradedPoint::Func(f.derivative(1)))
            }
            Self::Compose(fs) => fs.iter().rev().try_fold(v.clone(), |acc, l| l.apply(&acc)),
            Self::Combination(ts) => {
                let mut acc = v.zero_like();
                for (c, l) in ts {
                    acc = acc.axpy(*c, &l.apply(v)?)?;
                }
                Ok(acc)
            }
            Self::NeumannSeries { residual, terms, .. } => {
                let mut acc = v.zero_like();
                let mut power = v.clone();
                for i in 0..*terms {
                    if i > 0 {
                        power = residual.apply(&power)?;
                    }
                    acc = acc.add(&power)?;
                }
                Ok(acc)
            }
            Self::Linearized { map, at } => map.jacobian_apply(at, v),
        }
    }

    /// Matrix of the map on the degrees of freedom of `template`'s model.
    pub fn to_dense(&self, template: &GradedPoint) -> Result<DMatrix<f64>> {
        if let Self::Dense(m) = self {
            return Ok(m.clone());
        }
        let n = template.dof();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.apply(&template.from_vec_like(&e)?)?.to_vec();
            if col.len() != n {
                return Err(shape("map changes the model"));
            }
            m.set_column(j, &DVector::from_vec(col));
        }
        Ok(m)
    }

    /// Upper bound on `⟨L⟩_∞` valid for every radius, when the structure gives one.
    ///
    /// For [`Derivative`](Self::Derivative) the bound assumes the deepest
    /// level of the argument is not dominated by the top truncated level, which
    /// holds for any function whose sup-norm is not negligibly small.
    pub fn analytic_bound(&self, cfg: &GradedMetricConfig) -> Option<f64> {
        let w = &cfg.weights.values()[..cfg.truncation];
        let up = w.windows(2).map(|p| p[0] / p[1]).fold(1.0, f64::max);
        let down = w.windows(2).map(|p| p[1] / p[0]).fold(0.0, f64::max);
        match self {
            Self::Identity => Some(1.0),
            Self::Dense(_) => None,
            Self::UpShift | Self::Derivative => Some(up),
            Self::DownShift => Some(down),
            Self::Diagonal(d) => Some(d.iter().fold(1.0, |m, x| m.max(x.abs()))),
            Self::Compose(fs) => fs.iter().try_fold(1.0, |acc, l| Some(acc * l.analytic_bound(cfg)?)),
            Self::Combination(ts) => ts.iter().try_fold(0.0, |acc, (c, l)| {
                Some(acc + c.abs().max(1.0) * l.analytic_bound(cfg)?)
            }),
            Self::NeumannSeries {
                residual,
                terms,
                rho_bound,
            } => {
                let rho = rho_bound.or_else(|| residual.analytic_bound(cfg))?;
                Some((0..*terms).map(|i| rho.powi(i as i32)).sum())
            }
            Self::Linearized { map, at } => map.derivative_bound(at, cfg),
        }
    }
}

/// Probe-based lower bound on `⟨L⟩_r`, bracketed by the analytic bound when known.
#[derive(Clone, Debug, Serialize)]
pub struct RBoundEstimate {
    pub radius: f64,
    pub probes_inside: usize,
    pub witness_index: usize,
    pub witness: GradedPoint,
    pub lower_bound: f64,
    pub analytic_upper: Option<f64>,
    /// Every probe ratio, in probe order (`NaN` outside the ball).
    #[serde(skip)]
    pub ratios: Vec<f64>,
}

/// `max d(Lv, 0)/d(v, 0)` over probes with `0 < d(v, 0) < r`.
pub fn rbound_estimate(
    l: &LinearMapModel,
    cfg: &GradedMetricConfig,
    radius: f64,
    plan: &ProbePlan,
    exec: Execution,
) -> Result<RBoundEstimate> {
    if !(radius > 0.0) {
        return Err(FrechetError::Domain(format!("radius must be positive, got {radius}")));
    }
    let ratios: Vec<Result<f64>> = par::map_slice(exec, plan.points(), |p| {
        let d = cfg.norm(p);
        if d > 0.0 && d < radius {
            Ok(cfg.norm(&l.apply(p)?) / d)
        } else {
            Ok(f64::NAN)
        }
    });
    let ratios = ratios.into_iter().collect::<Result<Vec<f64>>>()?;
    let inside = ratios.iter().filter(|r| !r.is_nan()).count();
    let (idx, best) = par::argmax(&ratios).ok_or(FrechetError::EmptyEstimate { radius })?;
    Ok(RBoundEstimate {
        radius,
        probes_inside: inside,
        witness_index: idx,
        witness: plan.points()[idx].clone(),
        lower_bound: best,
        analytic_upper: l.analytic_bound(cfg),
        ratios,
    })
}

/// Shorthand for a standard-flavor dyadic config.
pub fn dyadic_standard(levels: usize) -> GradedMetricConfig {
    GradedMetricConfig::standard(crate::graded::WeightSequence::dyadic(levels))
}
