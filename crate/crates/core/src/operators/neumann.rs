use serde::Serialize;

use crate::error::{FrechetError, Result};
use crate::graded::GradedMetricConfig;
use crate::par::Execution;

use super::{rbound_estimate, LinearMapModel, ProbePlan};

/// `I − A`, simplified when `A = I + Σ c_i L_i`.
pub fn identity_minus(a: &LinearMapModel) -> LinearMapModel {
    match a {
        LinearMapModel::Identity => LinearMapModel::Combination(Vec::new()),
        LinearMapModel::Combination(ts) => {
            let ids = ts
                .iter()
                .filter(|(c, l)| *c == 1.0 && matches!(l, LinearMapModel::Identity))
                .count();
            if ids == 1 {
                LinearMapModel::Combination(
                    ts.iter()
                        .filter(|(c, l)| !(*c == 1.0 && matches!(l, LinearMapModel::Identity)))
                        .map(|(c, l)| (-c, l.clone()))
                        .collect(),
                )
            } else {
                generic(a)
            }
        }
        _ => generic(a),
    }
}

fn generic(a: &LinearMapModel) -> LinearMapModel {
    LinearMapModel::Combination(vec![(1.0, LinearMapModel::Identity), (-1.0, a.clone())])
}

#[derive(Clone, Debug, Serialize)]
pub struct NeumannInverse {
    #[serde(skip)]
    pub operator: LinearMapModel,
    /// Number of summed powers `m + 1`.
    pub terms: usize,
    /// `ρ` used for the truncation rule.
    pub rho: f64,
    /// Whether `ρ` was supplied (analytic) rather than probed.
    pub rho_supplied: bool,
    /// `ρ^{m+1} / (1 − ρ)`: bound on `⟨S_m − A^{-1}⟩`.
    pub truncation_bound: f64,
    /// `1 / (1 − ρ)`: bound on `⟨A^{-1}⟩`.
    pub inverse_bound: f64,
}

/// Smallest `m ≥ 0` with `ρ^{m+1}/(1−ρ) < tol`.
pub(crate) fn truncation_index(rho: f64, tol: f64) -> usize {
    if rho == 0.0 {
        return 0;
    }
    let mut m = 0usize;
    while rho.powi(m as i32 + 1) / (1.0 - rho) >= tol {
        m += 1;
    }
    m
}

/// Truncated Neumann series `Σ_{i ≤ m} (I − A)^i` approximating `A^{-1}`.
///
/// `rho` overrides the probe estimate of `⟨I − A⟩_R` (for instance with an
/// analytic bound). The truncation index comes from the a-priori rate.
#[allow(clippy::too_many_arguments)]
pub fn neumann_invert(
    a: &LinearMapModel,
    cfg: &GradedMetricConfig,
    radius: f64,
    tol: f64,
    max_terms: usize,
    plan: &ProbePlan,
    rho: Option<f64>,
    exec: Execution,
) -> Result<NeumannInverse> {
    if !(tol > 0.0) {
        return Err(FrechetError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let residual = identity_minus(a);
    let (rho, rho_supplied) = match rho {
        Some(r) => (r, true),
        None => (rbound_estimate(&residual, cfg, radius, plan, exec)?.lower_bound, false),
    };
    if !(rho < 1.0) {
        return Err(FrechetError::ContractionViolation { rho });
    }
    let m = truncation_index(rho, tol);
    let series = |terms| LinearMapModel::NeumannSeries {
        residual: Box::new(residual.clone()),
        terms,
        rho_bound: Some(rho),
    };
    if m + 1 > max_terms {
        return Err(FrechetError::SeriesNonConvergence {
            terms: max_terms,
            partial: Box::new(series(max_terms)),
        });
    }
    Ok(NeumannInverse {
        operator: series(m + 1),
        terms: m + 1,
        rho,
        rho_supplied,
        truncation_bound: rho.powi(m as i32 + 1) / (1.0 - rho),
        inverse_bound: 1.0 / (1.0 - rho),
    })
}

/// Bounds for `B^{-1}` given `⟨A^{-1}⟩ ≤ a_inv` and `⟨A − B⟩ ≤ gap`:
/// `(a/(1 − a·g), a²·g/(1 − a·g))`.
pub fn perturbed_invert_bound(a_inv: f64, gap: f64) -> Result<(f64, f64)> {
    if !(a_inv >= 0.0 && gap >= 0.0) {
        return Err(FrechetError::Domain("bounds must be non-negative".into()));
    }
    let p = a_inv * gap;
    if p >= 1.0 {
        return Err(FrechetError::Precondition(format!(
            "⟨A^-1⟩·⟨A−B⟩ = {p} is not below 1"
        )));
    }
    Ok((a_inv / (1.0 - p), a_inv * a_inv * gap / (1.0 - p)))
}
