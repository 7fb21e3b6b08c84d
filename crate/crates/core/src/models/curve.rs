use std::fmt;
use std::sync::Arc;

use crate::error::{FrechetError, Result};

use super::GradedPoint;

pub type PointFn = Arc<dyn Fn(f64) -> GradedPoint + Send + Sync>;

#[derive(Clone)]
pub enum CurveKind {
    /// `t ↦ t·v`
    Line(GradedPoint),
    /// `t ↦ (1 − t)·a + t·b`
    Affine(GradedPoint, GradedPoint),
    /// Arbitrary curve with explicit position and velocity.
    Closed { position: PointFn, velocity: PointFn },
}

/// A `C¹` curve `[t0, t1] → model`.
#[derive(Clone)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub domain: (f64, f64),
}

impl fmt::Debug for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            CurveKind::Line(_) => "line",
            CurveKind::Affine(..) => "affine",
            CurveKind::Closed { .. } => "closed",
        };
        f.debug_struct("CurveSpec")
            .field("kind", &kind)
            .field("domain", &self.domain)
            .finish()
    }
}

pub fn line_curve(v: GradedPoint) -> CurveSpec {
    CurveSpec {
        kind: CurveKind::Line(v),
        domain: (0.0, 1.0),
    }
}

pub fn affine_curve(a: GradedPoint, b: GradedPoint) -> Result<CurveSpec> {
    if a.tag() != b.tag() {
        return Err(FrechetError::Shape(format!(
            "affine endpoints {:?} vs {:?}",
            a.tag(),
            b.tag()
        )));
    }
    Ok(CurveSpec {
        kind: CurveKind::Affine(a, b),
        domain: (0.0, 1.0),
    })
}

impl CurveSpec {
    pub fn closed<P, V>(position: P, velocity: V, domain: (f64, f64)) -> Self
    where
        P: Fn(f64) -> GradedPoint + Send + Sync + 'static,
        V: Fn(f64) -> GradedPoint + Send + Sync + 'static,
    {
        Self {
            kind: CurveKind::Closed {
                position: Arc::new(position),
                velocity: Arc::new(velocity),
            },
            domain,
        }
    }

    pub fn position(&self, t: f64) -> GradedPoint {
        match &self.kind {
            CurveKind::Line(v) => v.scaled(t),
            CurveKind::Affine(a, b) => a.scaled(1.0 - t).axpy(t, b).expect("endpoints share a model"),
            CurveKind::Closed { position, .. } => position(t),
        }
    }

    pub fn velocity(&self, t: f64) -> GradedPoint {
        match &self.kind {
            CurveKind::Line(v) => v.clone(),
            CurveKind::Affine(a, b) => b.sub(a).expect("endpoints share a model"),
            CurveKind::Closed { velocity, .. } => velocity(t),
        }
    }

    /// Whether the velocity is the same at every parameter.
    pub fn has_constant_velocity(&self) -> bool {
        !matches!(self.kind, CurveKind::Closed { .. })
    }

    pub fn start(&self) -> GradedPoint {
        self.position(self.domain.0)
    }

    pub fn end(&self) -> GradedPoint {
        self.position(self.domain.1)
    }

    /// Same curve on a sub-interval.
    pub fn restrict(&self, t0: f64, t1: f64) -> Result<Self> {
        let (a, b) = self.domain;
        if !(a <= t0 && t0 <= t1 && t1 <= b) {
            return Err(FrechetError::Domain(format!(
                "[{t0}, {t1}] is not inside [{a}, {b}]"
            )));
        }
        Ok(Self {
            kind: self.kind.clone(),
            domain: (t0, t1),
        })
    }

    /// `τ ↦ c(θ(τ))` on `domain`, where `theta` returns `(θ(τ), θ'(τ))`.
    pub fn reparametrized<F>(&self, domain: (f64, f64), theta: F) -> Self
    where
        F: Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    {
        let theta = Arc::new(theta);
        let (c1, c2) = (self.clone(), self.clone());
        let th1 = Arc::clone(&theta);
        Self::closed(
            move |tau| c1.position(th1(tau).0),
            move |tau| {
                let (t, dt) = theta(tau);
                c2.velocity(t).scaled(dt)
            },
            domain,
        )
    }

    /// Max-abs gap between the central difference of the position and the velocity.
    pub fn velocity_consistency(&self, t: f64, h: f64) -> Result<f64> {
        let fd = self
            .position(t + h)
            .sub(&self.position(t - h))?
            .scaled(0.5 / h);
        Ok(fd.sub(&self.velocity(t))?.max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_and_affine() {
        let e1 = GradedPoint::basis(4, 1);
        let c = line_curve(e1.clone());
        assert_eq!(c.position(0.5), e1.scaled(0.5));
        assert_eq!(c.velocity(0.3), e1);
        let a = affine_curve(e1.zero_like(), e1.clone()).unwrap();
        for t in [0.0, 0.25, 0.7, 1.0] {
            assert_eq!(a.position(t), c.position(t));
        }
        let k = affine_curve(e1.clone(), e1.clone()).unwrap();
        assert!(k.velocity(0.5).is_zero());
        assert_eq!(k.position(0.9), e1);
        assert!(affine_curve(e1, GradedPoint::basis(3, 1)).is_err());
    }

    #[test]
    fn closed_consistency() {
        let c = CurveSpec::closed(
            |t| GradedPoint::sequence(vec![t.sin(), t * t]),
            |t| GradedPoint::sequence(vec![t.cos(), 2.0 * t]),
            (0.0, 1.0),
        );
        let e1 = c.velocity_consistency(0.4, 1e-3).unwrap();
        let e2 = c.velocity_consistency(0.4, 5e-4).unwrap();
        assert!(e1 < 1e-6 && e2 < e1 / 3.0);
    }

    #[test]
    fn reparam_chain_rule() {
        let c = line_curve(GradedPoint::basis(2, 2)).reparametrized((0.0, 1.0), |s| (s * s, 2.0 * s));
        assert!(c.velocity_consistency(0.5, 1e-4).unwrap() < 1e-10);
    }
}
