//! Concrete graded elements and their seminorm ladders.
//!
//! Two models are provided. A [`TruncatedSequence`] is a finitely supported
//! real sequence whose `n`-th seminorm is `Σ_{i ≤ n} |v_i|`; coordinates past
//! the stored length are zero, so its ladder can be read at any number of
//! levels. A [`PeriodicFunction`] is a band-limited real function on the
//! circle whose `n`-th seminorm is `Σ_{i ≤ n} sup |f^{(i)}|`.

mod curve;
mod periodic;

pub use curve::{affine_curve, line_curve, CurveKind, CurveSpec};
pub use periodic::{make_fk, PeriodicFunction};

use serde::{Deserialize, Serialize};

use crate::error::{FrechetError, Result};
use crate::graded::{GradedMetricConfig, SeminormLadder};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSequence {
    coords: Vec<f64>,
}

impl TruncatedSequence {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(FrechetError::Domain("sequence entries must be finite".into()));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Partial sums of `|coords|`, continued as a constant past the support.
    pub(crate) fn ladder_values(&self, levels: usize) -> Vec<f64> {
        let mut acc = 0.0;
        (0..levels)
            .map(|i| {
                if let Some(c) = self.coords.get(i) {
                    acc += c.abs();
                }
                acc
            })
            .collect()
    }
}

/// Partial-sum ladder of a truncated sequence.
pub fn seq_ladder(v: &TruncatedSequence, depth: usize) -> Result<SeminormLadder> {
    if depth > v.len() {
        return Err(FrechetError::Shape(format!(
            "depth {depth} exceeds sequence length {}",
            v.len()
        )));
    }
    Ok(SeminormLadder::from_raw(v.ladder_values(depth)))
}

/// Derivative sup-norm ladder of a periodic function.
pub fn fn_ladder(f: &PeriodicFunction, depth: usize) -> Result<SeminormLadder> {
    Ok(SeminormLadder::from_raw(f.ladder_values(depth)))
}

/// Which model a point lives in, with its size parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModelTag {
    Sequence { len: usize },
    Function { bandwidth: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GradedPoint {
    Seq(TruncatedSequence),
    Func(PeriodicFunction),
}

impl GradedPoint {
    /// Wraps coordinates without validation; use [`TruncatedSequence::new`] for checked input.
    pub fn sequence(coords: Vec<f64>) -> Self {
        GradedPoint::Seq(TruncatedSequence { coords })
    }

    pub fn function(f: PeriodicFunction) -> Self {
        GradedPoint::Func(f)
    }

    /// Basis vector `e_k` (1-based) in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k >= 1 && k <= dim, "basis index {k} outside 1..={dim}");
        let mut c = vec![0.0; dim];
        c[k - 1] = 1.0;
        Self::sequence(c)
    }

    pub fn tag(&self) -> ModelTag {
        match self {
            GradedPoint::Seq(s) => ModelTag::Sequence { len: s.len() },
            GradedPoint::Func(f) => ModelTag::Function {
                bandwidth: f.bandwidth(),
            },
        }
    }

    pub fn zero_like(&self) -> Self {
        match self {
            GradedPoint::Seq(s) => Self::sequence(vec![0.0; s.len()]),
            GradedPoint::Func(f) => GradedPoint::Func(PeriodicFunction::zero(f.bandwidth())),
        }
    }

    pub fn as_sequence(&self) -> Option<&[f64]> {
        match self {
            GradedPoint::Seq(s) => Some(s.coords()),
            GradedPoint::Func(_) => None,
        }
    }

    pub fn as_function(&self) -> Option<&PeriodicFunction> {
        match self {
            GradedPoint::Func(f) => Some(f),
            GradedPoint::Seq(_) => None,
        }
    }

    /// Real degrees of freedom: coordinates, or `2B + 1` Fourier reals.
    pub fn dof(&self) -> usize {
        match self {
            GradedPoint::Seq(s) => s.len(),
            GradedPoint::Func(f) => 2 * f.bandwidth() + 1,
        }
    }

    /// Flat real vector of degrees of freedom (`c_0`, then `Re c_k, Im c_k`).
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            GradedPoint::Seq(s) => s.coords.clone(),
            GradedPoint::Func(f) => {
                let mut out = vec![f.coeffs()[0].re];
                for c in &f.coeffs()[1..] {
                    out.push(c.re);
                    out.push(c.im);
                }
                out
            }
        }
    }

    /// Inverse of [`to_vec`](Self::to_vec) in the model of `self`.
    pub fn from_vec_like(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dof() {
            return Err(FrechetError::Shape(format!(
                "{} values for {} degrees of freedom",
                v.len(),
                self.dof()
            )));
        }
        Ok(match self {
            GradedPoint::Seq(_) => Self::sequence(v.to_vec()),
            GradedPoint::Func(_) => {
                let mut coeffs = vec![num_complex::Complex64::new(v[0], 0.0)];
                coeffs.extend(v[1..].chunks(2).map(|p| num_complex::Complex64::new(p[0], p[1])));
                GradedPoint::Func(PeriodicFunction::from_raw(coeffs))
            }
        })
    }

    fn mismatch(&self, other: &Self) -> FrechetError {
        FrechetError::Shape(format!("{:?} vs {:?}", self.tag(), other.tag()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        match (self, other) {
            (GradedPoint::Seq(x), GradedPoint::Seq(y)) if x.len() == y.len() => Ok(Self::sequence(
                x.coords.iter().zip(&y.coords).map(|(p, q)| p + a * q).collect(),
            )),
            (GradedPoint::Func(f), GradedPoint::Func(g)) if f.bandwidth() == g.bandwidth() => {
                Ok(GradedPoint::Func(f.add(&g.scaled(a))?))
            }
            _ => Err(self.mismatch(other)),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            GradedPoint::Seq(s) => Self::sequence(s.coords.iter().map(|x| c * x).collect()),
            GradedPoint::Func(f) => GradedPoint::Func(f.scaled(c)),
        }
    }

    /// Largest absolute coordinate or Fourier-coefficient component.
    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.to_vec().iter().all(|x| *x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }

    /// Seminorm ladder with `levels` entries.
    pub fn ladder(&self, levels: usize) -> SeminormLadder {
        SeminormLadder::from_raw(self.ladder_values(levels))
    }

    pub(crate) fn ladder_values(&self, levels: usize) -> Vec<f64> {
        match self {
            GradedPoint::Seq(s) => s.ladder_values(levels),
            GradedPoint::Func(f) => f.ladder_values(levels),
        }
    }
}

impl GradedMetricConfig {
    /// `d(v, 0)`.
    pub fn norm(&self, v: &GradedPoint) -> f64 {
        self.evaluate_unchecked(&v.ladder_values(self.truncation))
    }

    /// `d(a, b) = d(a − b, 0)`.
    pub fn distance(&self, a: &GradedPoint, b: &GradedPoint) -> Result<f64> {
        Ok(self.norm(&a.sub(b)?))
    }

    /// First-order speed `lim_{h→0} d(h·v, 0)/h`.
    pub fn point_rate(&self, v: &GradedPoint) -> f64 {
        self.rate(&v.ladder(self.truncation))
            .expect("ladder length matches truncation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::WeightSequence;

    #[test]
    fn seq_ladder_examples() {
        let e1 = TruncatedSequence::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(seq_ladder(&e1, 4).unwrap().values(), &[1.0; 4]);
        let v = TruncatedSequence::new(vec![1.0, 2.0, 0.0]).unwrap();
        assert_eq!(seq_ladder(&v, 3).unwrap().values(), &[1.0, 3.0, 3.0]);
        let z = TruncatedSequence::new(vec![0.0; 5]).unwrap();
        assert!(seq_ladder(&z, 5).unwrap().is_zero());
        assert!(matches!(seq_ladder(&z, 6), Err(FrechetError::Shape(_))));
        assert!(TruncatedSequence::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn fn_ladder_examples() {
        let s = PeriodicFunction::sin(4, 1).unwrap();
        let l = fn_ladder(&s, 3).unwrap();
        assert!((l.values()[2] - 3.0).abs() < 1e-12);
        assert!(fn_ladder(&PeriodicFunction::zero(4), 5).unwrap().is_zero());
    }

    #[test]
    fn mismatched_models() {
        let a = GradedPoint::sequence(vec![1.0, 2.0]);
        let b = GradedPoint::sequence(vec![1.0]);
        assert!(a.add(&b).is_err());
        let f = GradedPoint::Func(PeriodicFunction::zero(2));
        assert!(a.sub(&f).is_err());
    }

    #[test]
    fn metric_on_points() {
        let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(64));
        let e1 = GradedPoint::basis(16, 1);
        let e2 = GradedPoint::basis(16, 2);
        assert!((cfg.norm(&e1) - 0.5).abs() < 1e-15);
        assert!((cfg.norm(&e1) / cfg.norm(&e2) - 2.0).abs() < 1e-12);
        assert!((cfg.point_rate(&e1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vec_roundtrip() {
        let f = GradedPoint::Func(PeriodicFunction::mode(3, 2, 0.5, -1.0).unwrap());
        let back = f.from_vec_like(&f.to_vec()).unwrap();
        assert_eq!(f, back);
    }
}
