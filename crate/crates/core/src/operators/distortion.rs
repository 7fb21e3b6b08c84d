use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{FrechetError, Result};

/// Upper, lower and total distortion of a linear map between Euclidean spaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistortionReport {
    pub upper: f64,
    pub lower: f64,
    pub total: f64,
}

/// `upper = σ_max`, `lower = 1/σ_min` (∞ without full column rank), `total = max`.
pub fn distortion(f: &DMatrix<f64>) -> Result<DistortionReport> {
    if f.is_empty() {
        return Err(FrechetError::Shape("empty matrix".into()));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(FrechetError::Domain("non-finite matrix entry".into()));
    }
    let sv = f.clone().singular_values();
    let upper = sv.max();
    let smallest = sv.min();
    let rank_tol = f64::EPSILON * f.nrows().max(f.ncols()) as f64 * upper;
    let lower = if f.ncols() > f.nrows() || smallest <= rank_tol {
        f64::INFINITY
    } else {
        1.0 / smallest
    };
    Ok(DistortionReport {
        upper,
        lower,
        total: upper.max(lower),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_identity() {
        let d = distortion(&DMatrix::from_diagonal(&nalgebra::dvector![2.0, 0.5])).unwrap();
        assert!((d.upper - 2.0).abs() < 1e-14 && (d.lower - 2.0).abs() < 1e-14 && (d.total - 2.0).abs() < 1e-14);
        let i = distortion(&DMatrix::identity(3, 3)).unwrap();
        assert!((i.upper - 1.0).abs() < 1e-15 && (i.lower - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(distortion(&m).unwrap().lower.is_infinite());
        assert!(distortion(&DMatrix::zeros(2, 3)).unwrap().lower.is_infinite());
    }
}
