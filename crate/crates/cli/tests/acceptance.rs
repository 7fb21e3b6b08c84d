use std::sync::Arc;

use frechet_core::calculus::{line_b_differentiable, TauSineMap};
use frechet_core::graded::find_nonconvex_witness;
use frechet_core::length::{
    affine_minimality_probe, gromov_length, metric_length, smooth_length, LengthVerdict,
};
use frechet_core::minkowski::{minkowski_functional, tame_grade_estimate};
use frechet_core::models::{affine_curve, line_curve, make_fk, CurveSpec};
use frechet_core::operators::{
    c0_norm, neumann_invert, rbound_estimate, unboundedness_probe, LinearMapModel, ProbePlan,
};
use frechet_core::solver::{
    banach_fixed_point, inverse_derivative_check, left_inverse_certificate, right_inverse_solve,
    sample_in_ball, working_radius, FixedPointOptions,
};
use frechet_core::{
    comparability_check, piecewise_line_metric, Execution, Flavor, GradedMetricConfig,
    GradedPoint, PeriodicFunction, SeminormLadder, WeightSequence,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id:>2} {name}: {}", detail.as_ref());
}

fn phi(x: f64) -> f64 {
    x / (1.0 + x)
}

fn oracle_ladder(coords: &[f64], levels: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..levels)
        .map(|i| {
            acc += coords.get(i).map_or(0.0, |c| c.abs());
            acc
        })
        .collect()
}

fn oracle_metric(weights: &[f64], ladder: &[f64], flavor: Flavor) -> f64 {
    let terms = weights.iter().zip(ladder).map(|(a, d)| a * phi(*d));
    match flavor {
        Flavor::StandardSum => terms.sum(),
        Flavor::Supremum => terms.fold(0.0, f64::max),
    }
}

fn random_coords(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let mag = 10f64.powf(rng.random_range(-3.0..2.0));
            if rng.random_bool(0.25) {
                0.0
            } else {
                mag * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            }
        })
        .collect()
}

fn seq(v: Vec<f64>) -> GradedPoint {
    GradedPoint::sequence(v)
}

#[test]
fn criterion_01_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let dim = 12;
    let mut failures = Vec::new();
    for flavor in [Flavor::StandardSum, Flavor::Supremum] {
        let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(dim)).with_flavor(flavor);
        let w = cfg.weights.values().to_vec();
        for _ in 0..1000 {
            let (a, b, c) = (
                random_coords(&mut rng, dim),
                random_coords(&mut rng, dim),
                random_coords(&mut rng, dim),
            );
            let (pa, pb, pc) = (seq(a.clone()), seq(b.clone()), seq(c.clone()));
            let dab = cfg.distance(&pa, &pb).unwrap();
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let oracle = oracle_metric(&w, &oracle_ladder(&diff, dim), flavor);
            if (dab - oracle).abs() > 1e-14 {
                failures.push(format!("{flavor:?}: oracle mismatch {dab} vs {oracle}"));
            }
            if dab != cfg.distance(&pb, &pa).unwrap() {
                failures.push(format!("{flavor:?}: asymmetric"));
            }
            if cfg.distance(&pa, &pa).unwrap() != 0.0 {
                failures.push(format!("{flavor:?}: d(a, a) != 0"));
            }
            let (dbc, dac) = (cfg.distance(&pb, &pc).unwrap(), cfg.distance(&pa, &pc).unwrap());
            if dac > dab + dbc + 1e-12 {
                failures.push(format!("{flavor:?}: triangle {dac} > {dab} + {dbc}"));
            }
            for rho in [1.0, 2.0, 10.0] {
                let v = pa.sub(&pb).unwrap();
                if cfg.norm(&v.scaled(rho)) > rho * cfg.norm(&v) + 1e-12 {
                    failures.push(format!("{flavor:?}: scalar bound at rho {rho}"));
                }
            }
        }
    }
    report(1, "metric axioms", failures.is_empty(), format!("{} violations", failures.len()));
    assert!(failures.is_empty(), "{:?}", &failures[..failures.len().min(5)]);
}

#[test]
fn criterion_02_ball_geometry() {
    let dim = 10;
    let cfg = GradedMetricConfig::supremum(WeightSequence::dyadic(dim));
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut convex_fail = 0;
    for _ in 0..1000 {
        let (u, v) = (seq(random_coords(&mut rng, dim)), seq(random_coords(&mut rng, dim)));
        let mid = u.add(&v).unwrap().scaled(0.5);
        if cfg.norm(&mid) > cfg.norm(&u).max(cfg.norm(&v)) {
            convex_fail += 1;
        }
    }
    let std_cfg = cfg.with_flavor(Flavor::StandardSum);
    let witness = find_nonconvex_witness(&std_cfg, dim, 7, 20_000);
    let witness_ok = witness.as_ref().is_some_and(|w| {
        let (u, v) = (seq(w.u.clone()), seq(w.v.clone()));
        let mid = u.add(&v).unwrap().scaled(0.5);
        std_cfg.norm(&u) <= w.radius && std_cfg.norm(&v) <= w.radius && std_cfg.norm(&mid) > w.radius
    });
    let line_ok = piecewise_line_metric(2.0, 0.0) == 0.5 && piecewise_line_metric(1.0, 0.0) == 1.0;
    let pass = convex_fail == 0 && witness_ok && line_ok;
    report(
        2,
        "ball geometry",
        pass,
        format!("midpoint failures {convex_fail}, standard witness {witness_ok}, line witness {line_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_comparability() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let depth = 16;
    let ladders: Vec<SeminormLadder> = (0..500)
        .map(|_| {
            let inc: Vec<f64> = (0..depth).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
            SeminormLadder::from_increments(&inc).unwrap()
        })
        .collect();
    let mut summary = Vec::new();
    let mut pass = true;
    for r in [0.2, 0.5, 0.8] {
        let mut bad = 0;
        let mut worst: f64 = 0.0;
        for l in &ladders {
            let c = comparability_check(l, r).unwrap();
            if !c.ordered {
                bad += 1;
                worst = worst.max(c.standard_squared / c.supremum);
            }
        }
        pass &= bad == 0;
        summary.push(format!("r={r}: {bad}/500 unordered (worst D/d {worst:.3})"));
    }
    report(3, "comparability", pass, summary.join("; "));
    assert!(pass, "{summary:?}");
}

#[test]
fn criterion_04_shift_bounds() {
    let dim = 16;
    let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(64));
    let plan = ProbePlan::sequences(dim, 404, 200);
    let up = rbound_estimate(&LinearMapModel::UpShift, &cfg, f64::INFINITY, &plan, Execution::Parallel).unwrap();
    let analytic = up.analytic_upper.unwrap();
    let max_ratio = up.ratios.iter().filter(|r| !r.is_nan()).fold(0.0f64, |m, r| m.max(*r));
    let is_e2 = |p: &GradedPoint| {
        p.as_sequence()
            .unwrap()
            .iter()
            .enumerate()
            .all(|(i, x)| (i == 1) == (*x != 0.0))
    };
    let e2_ratio = plan
        .points()
        .iter()
        .zip(&up.ratios)
        .filter(|(p, _)| is_e2(p))
        .fold(0.0f64, |m, (_, r)| m.max(*r));
    let witness_is_e2 = e2_ratio >= 2.0 - 1e-9;
    let w = cfg.weights.values();
    let tail = w[w.len() - 1] / w[dim - 1..].iter().sum::<f64>();
    let down = rbound_estimate(&LinearMapModel::DownShift, &cfg, f64::INFINITY, &plan, Execution::Parallel).unwrap();
    let pass = analytic == 2.0
        && max_ratio <= analytic + 1e-12
        && witness_is_e2
        && down.lower_bound <= 0.5 + 1e-12;
    report(
        4,
        "shift bounds",
        pass,
        format!(
            "sigma: analytic {analytic}, probe max - 2 = {:.3e} (top-level truncation term {tail:.3e}), best ratio along e_2 {e2_ratio:.12}; tau: probe max {:.12}",
            max_ratio - 2.0, down.lower_bound
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_derivative_operator() {
    let bandwidth = 16;
    let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(16));
    let plan = ProbePlan::functions(bandwidth, 505, 40);
    let d = rbound_estimate(&LinearMapModel::Derivative, &cfg, f64::INFINITY, &plan, Execution::Parallel).unwrap();
    let fks: Vec<GradedPoint> = (1..=6)
        .map(|k| GradedPoint::function(make_fk(k, 36).unwrap()))
        .collect();
    let fk = unboundedness_probe(|p| LinearMapModel::Derivative.apply(p), &fks, c0_norm).unwrap();
    let fk_exact = fk
        .ratios
        .iter()
        .enumerate()
        .all(|(i, r)| (r - ((i + 1) * (i + 1)) as f64).abs() <= 1e-12 * r);
    let pass = d.lower_bound <= 2.0 + 1e-9 && fk_exact && fk.monotone_growth;
    report(
        5,
        "derivative operator",
        pass,
        format!("probe max {:.12}; f_K ratios {:?}", d.lower_bound, fk.ratios),
    );
    assert!(pass);
}

fn shift_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
}

#[test]
fn criterion_06_neumann_inversion() {
    let n = 16;
    let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(64));
    let plan = ProbePlan::sequences(n, 606, 100);
    let a = LinearMapModel::identity_plus(-0.5, LinearMapModel::DownShift);
    let template = GradedPoint::sequence(vec![0.0; n]);
    let oracle = (DMatrix::identity(n, n) - shift_matrix(n) * 0.5).try_inverse().unwrap();
    let inv = neumann_invert(&a, &cfg, f64::INFINITY, 1e-13, 200, &plan, None, Execution::Parallel).unwrap();
    let entry_err = (inv.operator.to_dense(&template).unwrap() - &oracle).abs().max();
    let exact = LinearMapModel::Dense(oracle.clone());
    let mut bound_ok = true;
    let mut worst_slack = f64::INFINITY;
    for m in 0..=20usize {
        let partial = LinearMapModel::NeumannSeries {
            residual: Box::new(LinearMapModel::scaled(0.5, LinearMapModel::DownShift)),
            terms: m + 1,
            rho_bound: None,
        };
        let gap = LinearMapModel::Combination(vec![(1.0, partial), (-1.0, exact.clone())]);
        let est = rbound_estimate(&gap, &cfg, f64::INFINITY, &plan, Execution::Parallel).unwrap();
        let bound = inv.rho.powi(m as i32 + 1) / (1.0 - inv.rho);
        worst_slack = worst_slack.min(bound - est.lower_bound);
        bound_ok &= est.lower_bound <= bound + 1e-12;
    }
    let rejected = neumann_invert(
        &LinearMapModel::identity_plus(-1.0, LinearMapModel::UpShift),
        &cfg,
        f64::INFINITY,
        1e-10,
        200,
        &plan,
        None,
        Execution::Parallel,
    )
    .is_err();
    let pass = entry_err <= 1e-10 && bound_ok && rejected;
    report(
        6,
        "von Neumann inversion",
        pass,
        format!(
            "rho {:.6}, {} terms, entrywise error {entry_err:.2e}, min bound slack {worst_slack:.2e}, I - sigma rejected {rejected}",
            inv.rho, inv.terms
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_banach_rate() {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut violations = 0;
    let mut worst_slack = f64::INFINITY;
    let mut runs = 0;
    for rho in [0.3, 0.5, 0.8] {
        let cfg = GradedMetricConfig::standard(WeightSequence::geometric(rho, 64).unwrap());
        let count = if rho == 0.8 { 16 } else { 17 };
        for _ in 0..count {
            runs += 1;
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let linear = LinearMapModel::Compose(vec![LinearMapModel::Diagonal(d.clone()), LinearMapModel::DownShift]);
            let t = frechet_core::calculus::AffineMap {
                linear,
                offset: seq(b.clone()),
            };
            // (I − D τ) x = b
            let m = DMatrix::identity(n, n) - DMatrix::from_diagonal(&DVector::from_vec(d)) * shift_matrix(n);
            let xs = m.lu().solve(&DVector::from_vec(b)).unwrap();
            let xs = seq(xs.as_slice().to_vec());
            let (_, trace) = banach_fixed_point(&t, &seq(x0), &cfg, rho, 1e-12, &FixedPointOptions::default()).unwrap();
            for it in &trace.iterates {
                let err = cfg.distance(&it.point, &xs).unwrap();
                worst_slack = worst_slack.min(it.bound + 1e-9 - err);
                if err > it.bound + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    let pass = violations == 0 && runs == 50;
    report(
        7,
        "Banach rate certificate",
        pass,
        format!("{runs} contractions, {violations} violations, min slack {worst_slack:.2e}"),
    );
    assert!(pass);
}

fn newton_oracle(eps: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let residual = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| x[i] + if i > 0 { eps * x[i - 1].sin() } else { 0.0 } - y[i])
            .collect()
    };
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    for _ in 0..100 {
        let r = residual(&x);
        if norm(&r) < 1e-15 {
            break;
        }
        let j = DMatrix::from_fn(n, n, |i, k| {
            if i == k {
                1.0
            } else if i == k + 1 {
                eps * x[k].cos()
            } else {
                0.0
            }
        });
        let dx = j.lu().solve(&DVector::from_vec(r.clone())).unwrap();
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - step * d).collect();
            if norm(&residual(&trial)) < norm(&r) || step < 1e-8 {
                x = trial;
                break;
            }
            step *= 0.5;
        }
    }
    x
}

#[test]
fn criterion_08_inverse_function_solvers() {
    let n = 16;
    let eps = 0.1;
    let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(64));
    let f = TauSineMap::new(eps);
    let x0 = seq(vec![0.0; n]);
    let plan = ProbePlan::sequences(n, 808, 20);
    let df0 = f.linearization(&x0).unwrap();
    let r0 = neumann_invert(&df0, &cfg, f64::INFINITY, 1e-15, 500, &plan, Some(f.defect_bound(&cfg)), Execution::Parallel)
        .unwrap()
        .operator;
    let rho = 0.5;
    let (radius, rho_est) = working_radius(&f, &r0, &x0, &cfg, rho, &plan, 8, 809, Execution::Parallel).unwrap();
    let r0_bound = r0.analytic_bound(&cfg).unwrap();
    let r1 = (1.0 - rho) / r0_bound * radius;

    let mut rng = ChaCha8Rng::seed_from_u64(810);
    let mut max_err: f64 = 0.0;
    let mut max_res: f64 = 0.0;
    let mut void = 0;
    for _ in 0..20 {
        let y = sample_in_ball(&x0, r1, &cfg, &mut rng);
        let sol = right_inverse_solve(&f, &r0, &y, &x0, &cfg, rho, radius, 1e-16, &FixedPointOptions::default()).unwrap();
        void += sol.certificate.void as usize;
        let oracle = newton_oracle(eps, y.as_sequence().unwrap());
        max_err = max_err.max(sol.x.sub(&seq(oracle)).unwrap().max_abs());
        max_res = max_res.max(sol.residual);
    }

    let pairs: Vec<(GradedPoint, GradedPoint)> = (0..500)
        .map(|_| (sample_in_ball(&x0, radius, &cfg, &mut rng), sample_in_ball(&x0, radius, &cfg, &mut rng)))
        .collect();
    let left_plan = ProbePlan::sequences(n, 811, 4);
    let left = left_inverse_certificate(&f, &r0, &x0, radius, &cfg, &pairs, None, &left_plan, Execution::Parallel);
    let left_ok = left.is_ok();

    let b = sample_in_ball(&x0, r1, &cfg, &mut rng);
    let dirs: Vec<GradedPoint> = (0..20)
        .map(|_| seq((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let (fa, r0c, x0c, cfgc) = (Arc::new(f), r0.clone(), x0.clone(), cfg.clone());
    let solve = move |y: &GradedPoint| {
        right_inverse_solve(&f, &r0c, y, &x0c, &cfgc, rho, radius, 1e-17, &FixedPointOptions::default()).map(|s| s.x)
    };
    let deviation = inverse_derivative_check(fa, solve, &b, &dirs, &cfg, &plan, Execution::Parallel).unwrap();

    let pass = max_err <= 1e-9 && max_res < 1e-10 && void == 0 && left_ok && deviation < 1e-6;
    report(
        8,
        "inverse function solvers",
        pass,
        format!(
            "r0 {radius}, rho estimate {rho_est:.3e}, r1 {r1:.4}; max |x - oracle| {max_err:.2e}, max residual {max_res:.2e}, void {void}; left certificate {}; inverse-derivative deviation {deviation:.2e}",
            match &left {
                Ok(c) => format!("ok (rho {:.3e}, c {:.3e})", c.rho, c.lower_lipschitz),
                Err(e) => format!("failed: {e}"),
            }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_minkowski() {
    let dim = 12;
    let cfg = GradedMetricConfig::supremum(WeightSequence::dyadic(dim));
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let tol = 1e-12;
    let mut homog_err: f64 = 0.0;
    let mut subadd_err: f64 = 0.0;
    for _ in 0..500 {
        let (u, v) = (seq(random_coords(&mut rng, dim)), seq(random_coords(&mut rng, dim)));
        let i = 1usize << rng.random_range(2..10);
        let lam = rng.random_range(0.1..10.0);
        let mu = minkowski_functional(&cfg, i, &u, tol).unwrap();
        let mlu = minkowski_functional(&cfg, i, &u.scaled(lam), tol).unwrap();
        homog_err = homog_err.max((mlu - lam * mu).abs() / (lam * mu).max(1.0));
        let mv = minkowski_functional(&cfg, i, &v, tol).unwrap();
        let muv = minkowski_functional(&cfg, i, &u.add(&v).unwrap(), tol).unwrap();
        subadd_err = subadd_err.max((muv - mu - mv) / (mu + mv).max(1.0));
    }
    let e1_cfg = GradedMetricConfig::supremum(WeightSequence::dyadic(30));
    let m4 = minkowski_functional(&e1_cfg, 4, &GradedPoint::basis(30, 1), tol).unwrap();

    let plan = ProbePlan::sequences(dim, 910, 31);
    let ladder = |p: &GradedPoint| p.ladder(dim).values().to_vec();
    let gauges = |p: &GradedPoint| {
        (0..dim)
            .map(|n| minkowski_functional(&cfg, 1 << (n + 2), p, 1e-12).unwrap())
            .collect::<Vec<f64>>()
    };
    let tame = tame_grade_estimate(ladder, gauges, &plan, 4, Execution::Parallel);
    let pass = homog_err <= 1e-9 && subadd_err <= 1e-9 && (m4 - 1.0).abs() <= 1e-9 && tame.is_satisfied();
    report(
        9,
        "Minkowski functionals",
        pass,
        format!(
            "homogeneity {homog_err:.2e}, subadditivity excess {subadd_err:.2e}, m_4(e_1) = {m4:.12}; tame {:?} (b, r) = ({}, {})",
            tame.verdict, tame.base, tame.grade
        ),
    );
    assert!(pass);
}

fn rectifiability_suite(rng: &mut ChaCha8Rng) -> Vec<(String, GradedPoint, bool)> {
    let mut out = Vec::new();
    for k in 2..=6 {
        out.push((format!("sin({k}x)"), GradedPoint::function(PeriodicFunction::sin(8, k).unwrap()), true));
    }
    for q in 2..=6 {
        let v: Vec<f64> = (0..16).map(|i| (q as f64).powi(i)).collect();
        out.push((format!("{q}^n"), seq(v), true));
    }
    for _ in 0..3 {
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        out.push((
            format!("{a:.2} cos x + {b:.2} sin x"),
            GradedPoint::function(PeriodicFunction::mode(8, 1, a, b).unwrap()),
            false,
        ));
    }
    for k in [1, 4, 8, 12, 16] {
        out.push((format!("e_{k}"), GradedPoint::basis(16, k), false));
    }
    for _ in 0..2 {
        let v: Vec<f64> = (0..16).map(|i| rng.random_range(-1.0..1.0) * 0.5f64.powi(i)).collect();
        out.push(("u_i 2^-i".into(), seq(v), false));
    }
    out
}

fn sinusoidal_arc(a: GradedPoint, u: GradedPoint, w: GradedPoint, omega: f64) -> CurveSpec {
    let (u2, w2) = (u.clone(), w.clone());
    CurveSpec::closed(
        move |t| a.axpy((omega * t).sin(), &u).unwrap().axpy(t, &w).unwrap(),
        move |t| w2.axpy(omega * (omega * t).cos(), &u2).unwrap(),
        (0.0, 1.0),
    )
}

#[test]
fn criterion_10_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut notes = Vec::new();

    let cfg30 = GradedMetricConfig::standard(WeightSequence::dyadic(30));
    let g = gromov_length(&line_curve(GradedPoint::basis(30, 1)), &cfg30, 1e-10, 62).unwrap();
    let gromov_ok = g.is_finite() && (g.value - 1.0).abs() <= 1e-6;
    notes.push(format!("L0(e_1) = {:.9} at level {}", g.value, g.level));

    let dim = 12;
    let cfg = GradedMetricConfig::standard(WeightSequence::dyadic(dim));
    let w = cfg.weights.values().to_vec();
    let mut affine_err: f64 = 0.0;
    for _ in 0..50 {
        let (a, b) = (random_coords(&mut rng, dim), random_coords(&mut rng, dim));
        let l = smooth_length(&affine_curve(seq(a.clone()), seq(b.clone())).unwrap(), &cfg, 8).unwrap();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        affine_err = affine_err.max((l.value - oracle_metric(&w, &oracle_ladder(&diff, dim), Flavor::StandardSum)).abs());
    }
    notes.push(format!("|L(affine) - d| <= {affine_err:.2e}"));

    let mut order_excess = f64::NEG_INFINITY;
    for k in 0..200 {
        let mut p = || seq((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
        let c = match k % 3 {
            0 => line_curve(seq(random_coords(&mut rng, dim))),
            1 => affine_curve(seq(random_coords(&mut rng, dim)), seq(random_coords(&mut rng, dim))).unwrap(),
            _ => {
                let (a, u, w) = (p(), p(), p());
                sinusoidal_arc(a, u, w, rng.random_range(1.0..6.0))
            }
        };
        let l = metric_length(&c, &cfg, 32).unwrap().value;
        let big_l = smooth_length(&c, &cfg, 32).unwrap().value;
        order_excess = order_excess.max(l - big_l);
    }
    notes.push(format!("max l - L = {order_excess:.2e}"));

    let suite = rectifiability_suite(&mut rng);
    let cfg16 = GradedMetricConfig::standard(WeightSequence::dyadic(16));
    let mut dichotomy_fail = Vec::new();
    for (name, v, growing) in &suite {
        let res = gromov_length(&line_curve(v.clone()), &cfg16, 1e-9, 62).unwrap();
        let divergent = res.verdict == LengthVerdict::Divergent;
        let unbounded = !line_b_differentiable(v, 16).is_bounded();
        let finite = res.verdict == LengthVerdict::Finite;
        if divergent != *growing || unbounded != *growing || (!growing && !finite) {
            dichotomy_fail.push(format!("{name}: {:?} at level {}", res.verdict, res.level));
        }
    }
    notes.push(format!("dichotomy mismatches {dichotomy_fail:?}"));

    let (a, b) = (seq(random_coords(&mut rng, dim)), seq(random_coords(&mut rng, dim)));
    let mini = affine_minimality_probe(&a, &b, &cfg, 1011, 50, 0.1, 32).unwrap();
    notes.push(format!("min affine margin {:.2e}", mini.min_margin));

    let pass = gromov_ok
        && affine_err <= 1e-10
        && order_excess <= 1e-9
        && dichotomy_fail.is_empty()
        && mini.min_margin >= -1e-9;
    report(10, "lengths", pass, notes.join("; "));
    assert!(pass);
}

const EXPERIMENTS: [&str; 9] = [
    "metrics-compare",
    "shift-bound",
    "fk-witness",
    "composition-probe",
    "neumann-invert",
    "ift-solve",
    "minkowski-tame",
    "lengths",
    "ball-geometry",
];

fn run_into(experiment: &str, dir: &std::path::Path) -> (i32, serde_json::Value, Vec<(String, Vec<u8>)>) {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_frechet"))
        .args(["run", experiment, "--seed", "11", "--format", "both", "--out"])
        .arg(dir)
        .output()
        .expect("binary runs");
    let json = std::fs::read_to_string(dir.join(format!("{experiment}.json"))).expect("json report");
    let mut value: serde_json::Value = serde_json::from_str(&json).expect("valid json");
    value["header"]
        .as_object_mut()
        .expect("header object")
        .remove("timestamp");
    let mut csvs: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    csvs.sort();
    (status.status.code().unwrap_or(-1), value, csvs)
}

#[test]
fn criterion_11_cli_determinism() {
    let mut mismatches = Vec::new();
    for exp in EXPERIMENTS {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (code_a, json_a, csv_a) = run_into(exp, a.path());
        let (code_b, json_b, csv_b) = run_into(exp, b.path());
        if code_a != code_b || json_a != json_b || csv_a != csv_b || csv_a.is_empty() {
            mismatches.push(exp);
        }
    }
    let pass = mismatches.is_empty();
    report(
        11,
        "CLI determinism",
        pass,
        format!("{} experiments run twice, mismatches {mismatches:?}", EXPERIMENTS.len()),
    );
    assert!(pass);
}
