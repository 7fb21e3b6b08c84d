use frechet_core::calculus::{line_b_differentiable, CompositionOperator, GradedMap, TauSineMap};
use frechet_core::graded::find_nonconvex_witness;
use frechet_core::length::{gromov_length, metric_length, smooth_length};
use frechet_core::minkowski::{minkowski_functional, tame_grade_estimate};
use frechet_core::models::{affine_curve, line_curve, make_fk};
use frechet_core::operators::{
    c0_norm, difference_quotient_probe, neumann_invert, rbound_estimate, unboundedness_probe, LinearMapModel,
    ProbePlan,
};
use frechet_core::solver::{right_inverse_solve, working_radius, FixedPointOptions};
use frechet_core::{
    comparability_check, piecewise_line_metric, Execution, FrechetError, GradedMetricConfig, GradedPoint,
    PeriodicFunction, SeminormLadder, WeightSequence,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{sine_point, ConfigError, CurveChoice, Experiment, ExperimentConfig};
use crate::report::{Certificate, Outcome, Table, Witness};

const EXEC: Execution = Execution::Parallel;
const FP_SLACK: f64 = 1e-12;

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Certificate(String),
    Numeric(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<FrechetError> for RunError {
    fn from(e: FrechetError) -> Self {
        use FrechetError::*;
        match e {
            Domain(_) | Shape(_) | Precondition(_) | DegenerateBall { .. } => Self::Config(e.to_string()),
            ContractionViolation { .. } | CertificateViolation { .. } | NoCertificate(_) | NonConvergence { .. } => {
                Self::Certificate(e.to_string())
            }
            _ => Self::Numeric(e.to_string()),
        }
    }
}

type Run = Result<Outcome, RunError>;

pub fn run(cfg: &ExperimentConfig) -> Run {
    match cfg.experiment {
        Experiment::MetricsCompare => metrics_compare(cfg),
        Experiment::ShiftBound => shift_bound(cfg),
        Experiment::FkWitness => fk_witness(cfg),
        Experiment::CompositionProbe => composition_probe(cfg),
        Experiment::NeumannInvert => neumann(cfg),
        Experiment::IftSolve => ift_solve(cfg),
        Experiment::MinkowskiTame => minkowski_tame(cfg),
        Experiment::Lengths => lengths(cfg),
        Experiment::BallGeometry => ball_geometry(cfg),
    }
}

fn random_coords(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            if rng.random_bool(0.25) {
                0.0
            } else {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * 10f64.powf(rng.random_range(-3.0..2.0))
            }
        })
        .collect()
}

fn nan_max(xs: &[f64]) -> f64 {
    xs.iter().filter(|x| !x.is_nan()).fold(f64::NEG_INFINITY, |m, x| m.max(*x))
}

fn metrics_compare(cfg: &ExperimentConfig) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rs = vec![0.2, 0.5, 0.8];
    if let Some(r) = cfg.weights.ratio() {
        if !rs.contains(&r) {
            rs.push(r);
            rs.sort_by(f64::total_cmp);
        }
    }
    let ladders = (0..cfg.samples)
        .map(|_| {
            let inc: Vec<f64> = (0..cfg.depth).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
            SeminormLadder::from_increments(&inc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new("ladders", &["ladder", "r", "standard_squared", "supremum", "standard", "ordered"]);
    let mut per_r = Vec::new();
    let mut witnesses = Vec::new();
    for &r in &rs {
        let mut unordered = 0;
        let mut worst: Option<(usize, f64)> = None;
        for (i, l) in ladders.iter().enumerate() {
            let c = comparability_check(l, r)?;
            table.push([i.to_string(), r.to_string(), c.standard_squared.to_string(), c.supremum.to_string(), c.standard.to_string(), c.ordered.to_string()]);
            if !c.ordered {
                unordered += 1;
                let q = c.standard_squared / c.supremum;
                if worst.is_none_or(|(_, w)| q > w) {
                    worst = Some((i, q));
                }
            }
        }
        if let Some((i, q)) = worst {
            witnesses.push(Witness::new(
                "comparability-failure",
                json!({"r": r, "ladder": i, "increments": ladders[i].increments(), "standard_squared_over_supremum": q}),
            ));
        }
        per_r.push(json!({"r": r, "ladders": ladders.len(), "unordered": unordered, "worst_ratio": worst.map(|w| w.1)}));
    }
    let std = cfg.standard();
    let sup = cfg.supremum();
    let mut sup_le_std = true;
    for l in &ladders {
        let mut v = l.values().to_vec();
        let last = v.last().copied().unwrap_or(0.0);
        v.resize(std.truncation.max(v.len()), last);
        let l = SeminormLadder::new(v)?;
        sup_le_std &= sup.evaluate(&l)? <= std.evaluate(&l)? + FP_SLACK;
    }
    Ok(Outcome {
        results: json!({"comparability": per_r, "configured_weights": {"supremum_below_standard": sup_le_std}}),
        certificates: vec![Certificate::new("supremum-below-standard", sup_le_std, json!({"ladders": ladders.len()}))],
        witnesses,
        tables: vec![table],
    })
}

fn shift_bound(cfg: &ExperimentConfig) -> Run {
    let metric = cfg.standard();
    let plan = ProbePlan::sequences(cfg.depth, cfg.seed, cfg.samples);
    let up = rbound_estimate(&LinearMapModel::UpShift, &metric, f64::INFINITY, &plan, EXEC)?;
    let down = rbound_estimate(&LinearMapModel::DownShift, &metric, f64::INFINITY, &plan, EXEC)?;
    let is_e2 = |p: &GradedPoint| {
        p.as_sequence()
            .is_some_and(|c| c.iter().enumerate().all(|(i, x)| (i == 1) == (*x != 0.0)))
    };
    let e2 = plan
        .points()
        .iter()
        .enumerate()
        .zip(&up.ratios)
        .filter(|((_, p), r)| is_e2(p) && !r.is_nan())
        .fold(None::<(usize, f64)>, |best, ((i, _), r)| match best {
            Some((_, b)) if b >= *r => best,
            _ => Some((i, *r)),
        });
    let (up_max, down_max) = (nan_max(&up.ratios), nan_max(&down.ratios));
    let mut table = Table::new("probes", &["probe", "group", "norm", "up_ratio", "down_ratio"]);
    for (i, p) in plan.points().iter().enumerate() {
        table.push([i.to_string(), plan.groups()[i].to_string(), metric.norm(p).to_string(), up.ratios[i].to_string(), down.ratios[i].to_string()]);
    }
    // top-level term of the up-shift on a metric with finitely many levels
    let w = metric.weights.values();
    let tail = w[w.len() - 1] / w[cfg.depth.min(w.len()) - 1..].iter().sum::<f64>();
    let mut certificates = Vec::new();
    let mut results = json!({"probes": plan.len()});
    for (name, est, max, extra) in [("up-shift", &up, up_max, tail), ("down-shift", &down, down_max, 0.0)] {
        let analytic = est.analytic_upper;
        let bound = analytic.map(|a| a + extra);
        let holds = bound.is_some_and(|b| max <= b + FP_SLACK);
        certificates.push(Certificate::new(
            &format!("{name}-analytic-bound"),
            holds,
            json!({"analytic": analytic, "truncation_term": extra, "probe_max": max}),
        ));
        results[name] = json!({"analytic_bound": analytic, "truncation_term": extra, "probe_max": max, "witness_index": est.witness_index});
    }
    results["up-shift"]["e2_ratio"] = json!(e2.map(|e| e.1));
    let mut witnesses = vec![Witness::new(
        "up-shift-argmax",
        json!({"probe": up.witness_index, "ratio": up.lower_bound, "point": up.witness.to_vec()}),
    )];
    if let Some((i, r)) = e2 {
        witnesses.push(Witness::new("up-shift-e2", json!({"probe": i, "ratio": r, "point": plan.points()[i].to_vec()})));
    }
    Ok(Outcome { results, certificates, witnesses, tables: vec![table] })
}

fn fk_witness(cfg: &ExperimentConfig) -> Run {
    let ks: Vec<usize> = (1..=6).collect();
    let bandwidth = cfg.bandwidth.max(36);
    let fks = ks
        .iter()
        .map(|&k| make_fk(k, bandwidth).map(GradedPoint::function))
        .collect::<Result<Vec<_>, _>>()?;
    let d = LinearMapModel::Derivative;
    let metric = cfg.standard();
    let c0 = unboundedness_probe(|p| d.apply(p), &fks, c0_norm)?;
    let graded = unboundedness_probe(|p| d.apply(p), &fks, |p| metric.norm(p))?;
    let analytic = d.analytic_bound(&metric);
    let mut table = Table::new("witnesses", &["k", "c0_ratio", "expected", "graded_ratio"]);
    let mut max_rel: f64 = 0.0;
    for (i, &k) in ks.iter().enumerate() {
        let want = (k * k) as f64;
        max_rel = max_rel.max((c0.ratios[i] - want).abs() / want);
        table.push([k.to_string(), c0.ratios[i].to_string(), want.to_string(), graded.ratios[i].to_string()]);
    }
    let graded_max = nan_max(&graded.ratios);
    let bounded = analytic.is_some_and(|a| graded_max <= a + 1e-9);
    Ok(Outcome {
        results: json!({
            "bandwidth": bandwidth,
            "c0": {"ratios": c0.ratios, "monotone_growth": c0.monotone_growth, "growth_factor": c0.growth_factor, "max_relative_error": max_rel},
            "graded": {"ratios": graded.ratios, "analytic_bound": analytic},
        }),
        certificates: vec![Certificate::new("graded-derivative-bound", bounded, json!({"analytic": analytic, "probe_max": graded_max}))],
        witnesses: vec![Witness::new("c0-unbounded", json!({"k": ks.last(), "ratio": c0.ratios.last()}))],
        tables: vec![table],
    })
}

fn composition_probe(cfg: &ExperimentConfig) -> Run {
    const FREQUENCY: f64 = 8.0;
    const STEP: f64 = 1e-6;
    const AMPLITUDE: f64 = 1.5;
    let g = CompositionOperator::new(FREQUENCY);
    let metric = cfg.standard();
    let base = (cfg.bandwidth / 2).max(4);
    let bandwidths: Vec<usize> = (0..4).map(|j| base << j).collect();
    let mut bases = Vec::new();
    let mut dirs = Vec::new();
    for &bw in &bandwidths {
        bases.push(GradedPoint::function(PeriodicFunction::sin(bw, bw / 4)?.scaled(AMPLITUDE)));
        dirs.push(GradedPoint::function(PeriodicFunction::mode(bw, 0, 1.0, 0.0)?));
    }
    let graded = difference_quotient_probe(|p| g.eval(p), &bases, &dirs, STEP, |p| metric.norm(p))?;
    let c0 = difference_quotient_probe(|p| g.eval(p), &bases, &dirs, STEP, c0_norm)?;
    let mut table = Table::new("probes", &["bandwidth", "sharpness", "graded_ratio", "c0_ratio"]);
    for (i, &bw) in bandwidths.iter().enumerate() {
        table.push([bw.to_string(), (bw / 4).to_string(), graded.ratios[i].to_string(), c0.ratios[i].to_string()]);
    }
    Ok(Outcome {
        results: json!({
            "map": g.name(),
            "step": STEP,
            "amplitude": AMPLITUDE,
            "bandwidths": bandwidths,
            "graded": {"ratios": graded.ratios, "monotone_growth": graded.monotone_growth, "growth_factor": graded.growth_factor},
            "c0": {"ratios": c0.ratios, "monotone_growth": c0.monotone_growth, "growth_factor": c0.growth_factor},
        }),
        certificates: Vec::new(),
        witnesses: vec![Witness::new(
            "sharpest-probe",
            json!({"bandwidth": bandwidths.last(), "sharpness": bandwidths.last().map(|b| b / 4), "graded_ratio": graded.ratios.last()}),
        )],
        tables: vec![table],
    })
}

fn neumann(cfg: &ExperimentConfig) -> Run {
    const HALF: f64 = 0.5;
    let n = cfg.depth;
    let metric = cfg.standard();
    let plan = ProbePlan::sequences(n, cfg.seed, cfg.samples);
    let a = LinearMapModel::identity_plus(-HALF, LinearMapModel::DownShift);
    let inv = neumann_invert(&a, &metric, f64::INFINITY, cfg.tol, 10_000, &plan, None, EXEC)?;
    let mut residual: f64 = 0.0;
    for k in 1..=n {
        let e = GradedPoint::basis(n, k);
        let r = a.apply(&inv.operator.apply(&e)?)?.sub(&e)?;
        residual = residual.max(r.max_abs());
    }
    let template = GradedPoint::sequence(vec![0.0; n]);
    let exact = LinearMapModel::Dense(inv.operator.to_dense(&template)?);
    let mut table = Table::new("truncations", &["m", "bound", "estimate"]);
    let mut bound_ok = true;
    for m in 0..=20usize {
        let partial = LinearMapModel::NeumannSeries {
            residual: Box::new(LinearMapModel::scaled(HALF, LinearMapModel::DownShift)),
            terms: m + 1,
            rho_bound: None,
        };
        let gap = LinearMapModel::Combination(vec![(1.0, partial), (-1.0, exact.clone())]);
        let est = rbound_estimate(&gap, &metric, f64::INFINITY, &plan, EXEC)?;
        let bound = inv.rho.powi(m as i32 + 1) / (1.0 - inv.rho);
        bound_ok &= est.lower_bound <= bound + inv.truncation_bound + FP_SLACK;
        table.push([m.to_string(), bound.to_string(), est.lower_bound.to_string()]);
    }
    let up = LinearMapModel::identity_plus(-1.0, LinearMapModel::UpShift);
    let rejection = match neumann_invert(&up, &metric, f64::INFINITY, cfg.tol, 10_000, &plan, None, EXEC) {
        Err(FrechetError::ContractionViolation { rho }) => Some(rho),
        _ => None,
    };
    Ok(Outcome {
        results: json!({
            "operator": "I - 0.5 tau",
            "inverse": inv,
            "max_entry_residual": residual,
            "up_shift_rejected": rejection.is_some(),
            "up_shift_rho": rejection,
        }),
        certificates: vec![
            Certificate::new("truncation-bounds", bound_ok, json!({"truncations": 21})),
            Certificate::new("inverse-residual", residual <= cfg.tol.max(FP_SLACK), json!({"max_entry_residual": residual})),
            Certificate::new("up-shift-rejected", rejection.is_some(), json!({"rho": rejection})),
        ],
        witnesses: Vec::new(),
        tables: vec![table],
    })
}

fn ift_solve(cfg: &ExperimentConfig) -> Run {
    const RHO: f64 = 0.5;
    let choice = cfg.map.as_ref().expect("resolved");
    let target = cfg.target.as_ref().expect("resolved").point(cfg.depth)?;
    let metric = cfg.standard();
    let f = TauSineMap::new(choice.eps);
    let x0 = GradedPoint::sequence(vec![0.0; cfg.depth]);
    let plan = ProbePlan::sequences(cfg.depth, cfg.seed, cfg.samples.min(40));
    let df0 = f.linearization(&x0)?;
    let r0 = neumann_invert(&df0, &metric, f64::INFINITY, 1e-15, 10_000, &plan, Some(f.defect_bound(&metric)), EXEC)?.operator;
    let (radius, rho_est) = working_radius(&f, &r0, &x0, &metric, RHO, &plan, 8, cfg.seed, EXEC)?;
    let sol = right_inverse_solve(&f, &r0, &target, &x0, &metric, RHO, radius, cfg.tol, &FixedPointOptions::default())?;
    let mut iterates = Table::new("iterates", &["n", "distance_to_solution", "bound"]);
    for it in &sol.trace.iterates {
        iterates.push([it.index.to_string(), metric.distance(&it.point, &sol.x)?.to_string(), it.bound.to_string()]);
    }
    let mut steps = Table::new("steps", &["n", "step", "ratio", "residual"]);
    for (i, s) in sol.trace.steps.iter().enumerate() {
        let ratio = sol.trace.ratios.get(i).copied().unwrap_or(f64::NAN);
        let res = sol.trace.residuals.get(i).copied().unwrap_or(f64::NAN);
        steps.push([i.to_string(), s.to_string(), ratio.to_string(), res.to_string()]);
    }
    let converged = sol.residual < cfg.tol;
    Ok(Outcome {
        results: json!({
            "map": f.name(),
            "target": target.to_vec(),
            "solution": sol.x.to_vec(),
            "residual": sol.residual,
            "iterations": sol.trace.iterations,
            "converged": converged,
            "rho_estimate": rho_est,
            "warnings": sol.trace.warnings,
        }),
        certificates: vec![
            Certificate::new("target-in-certified-ball", !sol.certificate.void, json!(sol.certificate)),
            Certificate::new("residual-below-tolerance", converged, json!({"residual": sol.residual, "tol": cfg.tol})),
        ],
        witnesses: Vec::new(),
        tables: vec![iterates, steps],
    })
}

fn minkowski_tame(cfg: &ExperimentConfig) -> Run {
    const GAUGE_TOL: f64 = 1e-12;
    let depth = cfg.depth;
    let values = cfg.weight_sequence().values().iter().copied().take(depth).collect();
    let metric = GradedMetricConfig::supremum(WeightSequence::new(values)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut homog, mut subadd) = (0.0f64, f64::NEG_INFINITY);
    let mut table = Table::new("pairs", &["pair", "grade_index", "m_u", "m_v", "m_sum", "excess"]);
    for j in 0..cfg.samples {
        let u = GradedPoint::sequence(random_coords(&mut rng, depth));
        let v = GradedPoint::sequence(random_coords(&mut rng, depth));
        let i = 1usize << rng.random_range(2..10);
        let lam = rng.random_range(0.1..10.0);
        let mu = minkowski_functional(&metric, i, &u, GAUGE_TOL)?;
        let mlu = minkowski_functional(&metric, i, &u.scaled(lam), GAUGE_TOL)?;
        homog = homog.max((mlu - lam * mu).abs() / (lam * mu).max(1.0));
        let mv = minkowski_functional(&metric, i, &v, GAUGE_TOL)?;
        let muv = minkowski_functional(&metric, i, &u.add(&v)?, GAUGE_TOL)?;
        let excess = (muv - mu - mv) / (mu + mv).max(1.0);
        subadd = subadd.max(excess);
        table.push([j.to_string(), i.to_string(), mu.to_string(), mv.to_string(), muv.to_string(), excess.to_string()]);
    }
    let m4 = minkowski_functional(&metric, 4, &GradedPoint::basis(depth, 1), GAUGE_TOL)?;
    let plan = ProbePlan::sequences(depth, cfg.seed, 31);
    let ladder = |p: &GradedPoint| p.ladder(depth).values().to_vec();
    let gauges = |p: &GradedPoint| {
        (0..depth)
            .map(|n| minkowski_functional(&metric, 1 << (n + 2), p, GAUGE_TOL).unwrap_or(f64::NAN))
            .collect::<Vec<f64>>()
    };
    let tame = tame_grade_estimate(ladder, gauges, &plan, 4, EXEC);
    let witnesses = match &tame.verdict {
        frechet_core::minkowski::TameVerdict::Falsified { probe, .. } => {
            vec![Witness::new("tame-falsifier", json!({"probe": probe, "point": plan.points()[*probe].to_vec()}))]
        }
        _ => Vec::new(),
    };
    Ok(Outcome {
        results: json!({
            "pairs": cfg.samples,
            "homogeneity_error": homog,
            "subadditivity_excess": subadd,
            "m4_e1": m4,
            "tame": tame,
        }),
        certificates: vec![
            Certificate::new("homogeneity", homog <= 1e-9, json!({"error": homog})),
            Certificate::new("subadditivity", subadd <= 1e-9, json!({"excess": subadd})),
            Certificate::new("tame-grade", tame.is_satisfied(), json!({"base": tame.base, "grade": tame.grade})),
        ],
        witnesses,
        tables: vec![table],
    })
}

fn lengths(cfg: &ExperimentConfig) -> Run {
    const NODES: usize = 32;
    let choice = cfg.curve.as_ref().expect("resolved");
    let metric = cfg.standard();
    let basis = |k: usize| {
        if k > cfg.depth {
            Err(RunError::Config(format!("basis index {k} exceeds depth {}", cfg.depth)))
        } else {
            Ok(GradedPoint::basis(cfg.depth, k))
        }
    };
    let (curve, direction) = match choice {
        CurveChoice::LineBasis { k } => {
            let v = basis(*k)?;
            (line_curve(v.clone()), Some(v))
        }
        CurveChoice::LineSine { k } => {
            let v = sine_point(cfg.bandwidth, *k)?;
            (line_curve(v.clone()), Some(v))
        }
        CurveChoice::LinePower { q } => {
            let v = GradedPoint::sequence((0..cfg.depth).map(|i| q.powi(i as i32)).collect());
            (line_curve(v.clone()), Some(v))
        }
        CurveChoice::AffineBasis { from, to } => (affine_curve(basis(*from)?, basis(*to)?)?, None),
    };
    let gromov = gromov_length(&curve, &metric, cfg.tol, 62)?;
    let smooth = smooth_length(&curve, &metric, NODES)?;
    let metric_l = metric_length(&curve, &metric, NODES)?;
    let ordered = metric_l.value <= smooth.value + 1e-9;
    let mut table = Table::new("gromov", &["level", "partition_sum"]);
    for (i, h) in gromov.history.iter().enumerate() {
        table.push([i.to_string(), h.to_string()]);
    }
    let bounded = direction.as_ref().map(|v| line_b_differentiable(v, cfg.depth.min(metric.truncation)));
    Ok(Outcome {
        results: json!({
            "gromov": {"value": gromov.value, "verdict": gromov.verdict, "level": gromov.level},
            "smooth": smooth.value,
            "metric": metric_l.value,
            "metric_le_smooth": ordered,
            "line_b_differentiable": bounded,
        }),
        certificates: vec![Certificate::new(
            "metric-length-below-smooth-length",
            ordered,
            json!({"metric": metric_l.value, "smooth": smooth.value}),
        )],
        witnesses: Vec::new(),
        tables: vec![table],
    })
}

fn ball_geometry(cfg: &ExperimentConfig) -> Run {
    let dim = cfg.depth;
    let sup = cfg.supremum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut table = Table::new("pairs", &["pair", "d_u", "d_v", "d_mid", "convex"]);
    let mut failures = 0;
    for j in 0..cfg.samples {
        let u = GradedPoint::sequence(random_coords(&mut rng, dim));
        let v = GradedPoint::sequence(random_coords(&mut rng, dim));
        let mid = u.add(&v)?.scaled(0.5);
        let (du, dv, dm) = (sup.norm(&u), sup.norm(&v), sup.norm(&mid));
        let convex = dm <= du.max(dv);
        failures += usize::from(!convex);
        table.push([j.to_string(), du.to_string(), dv.to_string(), dm.to_string(), convex.to_string()]);
    }
    let witness = find_nonconvex_witness(&cfg.standard(), dim, cfg.seed, 20_000);
    let line = json!({"psi_1": piecewise_line_metric(1.0, 0.0), "psi_2": piecewise_line_metric(2.0, 0.0), "psi_3": piecewise_line_metric(3.0, 0.0)});
    let mut witnesses = vec![Witness::new("disconnected-line-ball", line.clone())];
    if let Some(w) = &witness {
        witnesses.push(Witness::new("standard-nonconvex", json!(w)));
    }
    Ok(Outcome {
        results: json!({
            "supremum_midpoint_failures": failures,
            "pairs": cfg.samples,
            "standard_nonconvex_found": witness.is_some(),
            "line_metric": line,
        }),
        certificates: vec![Certificate::new("supremum-midpoint-convexity", failures == 0, json!({"failures": failures}))],
        witnesses,
        tables: vec![table],
    })
}
