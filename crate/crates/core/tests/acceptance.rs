//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use neohook_core::cantor::{area_fraction, cantor_measure, generation, CantorConfig, CantorMap};
use neohook_core::energy::{
    distortion_bound_check, energy_analytic, energy_pl, gradient_inequality_jacobian, gradient_inequality_matrix,
    hopf_residual, pointwise_lower_bound, EnergyParams, QuadStatus, QuadratureSpec, SampleGrid,
};
use neohook_core::geometry::{make_rect_mesh, Mat2, PLMap, Point2, Rect};
use neohook_core::maps::{feasible_params, mobius_sequence, q_threshold, AnalyticMap, PinchParams};
use neohook_core::minimizer::{init_minimizer, minimize_with, Initial, MinimizerConfig};
use neohook_core::verify::{
    branch_area_report, injectivity_count, modulus_profile, threshold_sweep, PLLocator, PlanarMap, DEFAULT_CELLS,
    DEFAULT_SAMPLES,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IDENTITY_TOL: f64 = 1e-12;
const IDENTITY_TIME: Duration = Duration::from_secs(1);
const CONVERGED_CHANGE: f64 = 0.005;
const DIVERGENT_GROWTH: f64 = 10.0;
const SHARPNESS_TIME: Duration = Duration::from_secs(60);
const SIDE_TOL: f64 = 1e-12;
const MEASURE_FLOOR: f64 = 0.47;
const CANTOR_TIME: Duration = Duration::from_secs(10);
const MIN_ENERGY_SLACK: f64 = 1e-9;
const MAX_ENERGY: f64 = 3.02;
const MAX_DEVIATION: f64 = 0.02;
const MINIMIZER_TIME: Duration = Duration::from_secs(60);
const INEQUALITY_CASES: usize = 100_000;
const RESIDUAL_FLOOR: f64 = -1e-12;
const INEQUALITY_TIME: Duration = Duration::from_secs(10);
const HOPF_TOL: f64 = 1e-14;
const MOBIUS_TOL: f64 = 1e-4;
const N1_FLOOR: f64 = 0.99;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(results: &mut Vec<bool>, id: u32, name: &str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let out = f();
    let tag = if out.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id}. {name}: {} ({:.2?})", out.detail, t.elapsed());
    results.push(out.pass);
}

fn timed(limit: Duration, t: Instant, pass: bool) -> bool {
    pass && t.elapsed() < limit
}

fn identity_energy_check() -> Outcome {
    let t = Instant::now();
    let id = PLMap::identity(make_rect_mesh(Rect::unit_square(), 8, 8).unwrap());
    let e2 = energy_pl(&id, &EnergyParams::new(2.0, 1.0).unwrap()).unwrap().total;
    let e4 = energy_pl(&id, &EnergyParams::new(4.0, 1.0).unwrap()).unwrap().total;
    let pass = (e2 - 3.0).abs() <= IDENTITY_TOL && (e4 - 5.0).abs() <= IDENTITY_TOL;
    Outcome { pass: timed(IDENTITY_TIME, t, pass), detail: format!("p=2 → {e2}, p=4 → {e4}") }
}

fn sharpness_check() -> Outcome {
    let t = Instant::now();
    let spec = QuadratureSpec::default();
    let ep = EnergyParams::new(3.0, 2.0).unwrap();
    let witness = feasible_params(3.0, 2.0).unwrap().unwrap();
    let w = energy_analytic(&AnalyticMap::Pinch(witness), &ep, &spec).unwrap();
    let change = w.levels.windows(2).last().map_or(f64::INFINITY, |l| ((l[1].total - l[0].total) / l[0].total).abs());
    let probe = PinchParams::probe(witness.a, 0.5 + 0.05 - witness.a, 3.0, 2.0).unwrap();
    let d = energy_analytic(&AnalyticMap::Pinch(probe), &ep, &spec).unwrap();
    let growth = d.levels.windows(2).last().map_or(0.0, |l| l[1].total / l[0].total);
    let diverged = d.status == QuadStatus::Divergent && (growth >= DIVERGENT_GROWTH || !d.total.is_finite());
    let ps: Vec<f64> = (0..20).map(|i| 2.05 + 0.5 * i as f64).collect();
    let qs: Vec<f64> = (0..20).map(|j| 0.2 + 0.45 * j as f64).collect();
    let table = threshold_sweep(&ps, &qs, None).unwrap();
    let mismatches = table.rows.iter().filter(|r| r.feasible != (r.q < q_threshold(r.p))).count();
    let pass = w.status == QuadStatus::Converged && change < CONVERGED_CHANGE && diverged && mismatches == 0;
    Outcome {
        pass: timed(SHARPNESS_TIME, t, pass),
        detail: format!(
            "witness ({:.4}, {:.4}) {} with last change {:.2e}; probe a+b={:.3} {} with growth {:.1}x; {} predicate mismatches on 20x20",
            witness.a,
            witness.b,
            w.status.as_str(),
            change,
            probe.a + probe.b,
            d.status.as_str(),
            growth,
            mismatches
        ),
    }
}

fn cantor_check() -> Outcome {
    let t = Instant::now();
    let cfg = CantorConfig { max_depth: 20, ..CantorConfig::default() };
    let mut side_err = 0.0f64;
    for n in 0..=8 {
        let fam = generation(n, &cfg).unwrap();
        let expected = 0.5f64.powi(n as i32) * (1..=n).map(|k| 1.0 - cfg.eps.eps(k)).product::<f64>();
        for q in &fam.squares {
            side_err = side_err.max((q.side() - expected).abs());
        }
    }
    let measure = cantor_measure(&cfg, 1e-15).unwrap();
    let depth20 = area_fraction(20, &cfg.eps);
    let params = PinchParams::new(-0.3, 0.75, 3.0, 2.0).unwrap();
    let r5 = branch_area_report(&cfg, 5, params, 11, None).unwrap();
    let r20 = branch_area_report(&cfg, 20, params, 12, None).unwrap();
    let witnesses_ok = [&r5, &r20].iter().all(|r| r.witnesses.len() == 1 && r.witnesses[0].x1 != r.witnesses[0].x2);
    let pass = side_err <= SIDE_TOL
        && measure.value > MEASURE_FLOOR
        && (measure.value - depth20).abs() < 1e-3
        && r5.fixed_point_failures == 0
        && r20.fixed_point_failures == 0
        && witnesses_ok;
    Outcome {
        pass: timed(CANTOR_TIME, t, pass),
        detail: format!(
            "side error {side_err:.1e}; measure {:.10} after {} factors (depth 20: {depth20:.6}); fixed-point failures {}/{} at depth 5, {}/{} at depth 20; witnesses {}",
            measure.value,
            measure.terms,
            r5.fixed_point_failures,
            r5.fixed_points_checked,
            r20.fixed_point_failures,
            r20.fixed_points_checked,
            r5.witnesses.len()
        ),
    }
}

fn minimizer_check() -> Outcome {
    let t = Instant::now();
    let params = EnergyParams::new(2.0, 1.0).unwrap();
    let mesh = make_rect_mesh(Rect::unit_square(), 16, 16).unwrap();
    let mut state = init_minimizer(mesh.clone(), Rect::unit_square(), Initial::Perturb { sigma: 0.05, seed: 7 }, &params).unwrap();
    let start = state.energy();
    let mut min_det = f64::INFINITY;
    let mut monotone = true;
    let mut last = start;
    let report = minimize_with(&mut state, &MinimizerConfig::new(params), |_, rec| {
        min_det = min_det.min(rec.min_det);
        monotone &= rec.energy < last;
        last = rec.energy;
    })
    .unwrap();
    let deviation = state.map().target().iter().zip(mesh.vertices()).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
    let e = report.final_energy;
    let pass = min_det > 0.0 && monotone && e >= 3.0 - MIN_ENERGY_SLACK && e <= MAX_ENERGY && deviation <= MAX_DEVIATION;
    Outcome {
        pass: timed(MINIMIZER_TIME, t, pass),
        detail: format!(
            "energy {start:.6} → {e:.15} in {} iterations; min det {min_det:.3}; monotone {monotone}; max deviation {deviation:.2e}",
            report.iterations
        ),
    }
}

fn random_positive(rng: &mut ChaCha8Rng) -> Mat2 {
    loop {
        let m = Mat2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        if m.det() > 0.05 {
            return m;
        }
    }
}

fn inequality_check() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [f64::INFINITY; 4];
    for _ in 0..INEQUALITY_CASES {
        let (a, b) = (random_positive(&mut rng), random_positive(&mut rng));
        let p = rng.gen_range(2.0..=6.0);
        let q = rng.gen_range(0.1..4.0);
        worst[0] = worst[0].min(gradient_inequality_matrix(&a, &b, p).unwrap());
        worst[1] = worst[1].min(gradient_inequality_jacobian(a.det(), b.det(), q).unwrap());
        worst[2] = worst[2].min(pointwise_lower_bound(&a, p).unwrap());
        // the distortion bound is checked on the regime 2/p + 1/q ≤ 1
        let p2 = rng.gen_range(2.5..6.0);
        let q2 = p2 / (p2 - 2.0) + rng.gen_range(0.0..4.0);
        let ep = EnergyParams::new(p2, q2).unwrap();
        worst[3] = worst[3].min(distortion_bound_check(&a, &ep).unwrap());
    }
    let pass = worst.iter().all(|w| *w >= RESIDUAL_FLOOR);
    Outcome {
        pass: timed(INEQUALITY_TIME, t, pass),
        detail: format!(
            "{INEQUALITY_CASES} cases each; min residuals: matrix {:.2e}, Jacobian {:.2e}, lower bound {:.2e}, distortion {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

fn sample(map: &dyn PlanarMap, r: Rect, n: usize) -> SampleGrid {
    let h = r.width() / (n - 1) as f64;
    let ny = (r.height() / h).round() as usize + 1;
    SampleGrid::sample(Point2::new(r.xmin, r.ymin), n, ny, h, |p| map.apply(p).ok_or("outside")).unwrap()
}

fn hopf_check() -> Outcome {
    let params = EnergyParams::new(2.0, 1.0).unwrap();
    let r = Rect::unit_square();
    // dyadic coefficients make every sample exact; generic ones leave a
    // round-off floor of order ε/h² from the nested differences
    let dyadic = AnalyticMap::Affine { matrix: Mat2::new(1.25, 0.5, -0.25, 0.75), offset: Point2::new(0.125, 0.25), domain: r };
    let generic = AnalyticMap::Affine { matrix: Mat2::new(1.3, 0.4, -0.2, 0.9), offset: Point2::new(0.1, 0.2), domain: r };
    let worst = |m: &AnalyticMap| {
        let mut w = 0.0f64;
        for p in [2.0, 3.0, 4.5] {
            let f = hopf_residual(&sample(m, r, 33), &EnergyParams::new(p, 1.0).unwrap()).unwrap();
            w = w.max(f.residual.max_norm()).max(f.residual_conj.max_norm());
        }
        w
    };
    let zero = worst(&AnalyticMap::Identity(r)).max(worst(&dyadic));
    let floor = worst(&generic);
    // minimizer output for the stretch of the unit square onto a 2 × 1 rectangle
    let target = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let mut report = Vec::new();
    for n in [8, 16, 32] {
        let mesh = make_rect_mesh(r, n, n).unwrap();
        let mut state = init_minimizer(mesh, target, Initial::Perturb { sigma: 0.2 / n as f64, seed: 3 }, &params).unwrap();
        let _ = minimize_with(&mut state, &MinimizerConfig::new(params), |_, _| {});
        let loc = PLLocator::new(state.map().clone());
        let f = hopf_residual(&sample(&loc, r, 4 * n + 1), &params).unwrap();
        report.push(format!("n={n}: L2 {:.3e} / {:.3e}", f.residual_l2, f.residual_conj_l2));
    }
    Outcome {
        pass: zero <= HOPF_TOL,
        detail: format!(
            "identity/affine max residual {zero:.1e} (generic affine round-off {floor:.1e} at h = 1/32); minimizer outputs {}",
            report.join(", ")
        ),
    }
}

fn mobius_check() -> Outcome {
    let spec = QuadratureSpec::default();
    let e2 = EnergyParams::new(2.0, 1.0).unwrap();
    let dirichlet = |ak: f64| {
        let m = AnalyticMap::mobius(ak).unwrap();
        let d = energy_analytic(&m, &e2, &spec).unwrap().gradient_term;
        (m, d)
    };
    let mut err = 0.0f64;
    for ak in [0.1, 0.5, 0.9] {
        err = err.max((dirichlet(ak).1 - 2.0 * std::f64::consts::PI).abs());
    }
    let mut cs = Vec::new();
    for k in 1..=6 {
        let (m, d) = dirichlet(mobius_sequence(k));
        cs.push(modulus_profile(&m, d, 20_000, 10, 9).unwrap().fitted_c);
    }
    let increasing = cs.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = cs.iter().map(|c| format!("{c:.3}")).collect();
    Outcome {
        pass: err <= MOBIUS_TOL && increasing,
        detail: format!("max |Dirichlet - 2π| {err:.1e}; C along a_k = 1 - 2^-k: {}", shown.join(", ")),
    }
}

fn histogram_check() -> Outcome {
    let params = PinchParams::new(-0.3, 0.75, 3.0, 2.0).unwrap();
    let id = AnalyticMap::Identity(Rect::unit_square());
    let pinch = AnalyticMap::Pinch(params);
    let cantor = CantorMap::new(CantorConfig::default(), params, 3).unwrap();
    let f_id = injectivity_count(&id, DEFAULT_SAMPLES, DEFAULT_CELLS).unwrap().fraction_n1;
    let mut pass = f_id == 1.0;
    let mut parts = vec![format!("identity {f_id}")];
    for (name, map) in [("pinch", &pinch as &dyn PlanarMap), ("cantor", &cantor)] {
        let coarse = injectivity_count(map, DEFAULT_SAMPLES / 2, DEFAULT_CELLS / 2).unwrap();
        let fine = injectivity_count(map, DEFAULT_SAMPLES, DEFAULT_CELLS).unwrap();
        pass &= fine.fraction_n1 >= N1_FLOOR && fine.fraction_n1 >= coarse.fraction_n1;
        parts.push(format!(
            "{name} {:.5} → {:.5} (collapsed cells {}, max preimage ratio {:.2})",
            coarse.fraction_n1, fine.fraction_n1, fine.collapse_cells, fine.max_preimage_ratio
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    check(&mut results, 1, "identity energy", identity_energy_check);
    check(&mut results, 2, "pinch sharpness", sharpness_check);
    check(&mut results, 3, "cantor construction", cantor_check);
    check(&mut results, 4, "minimizer on X = Y", minimizer_check);
    check(&mut results, 5, "inequality suites", inequality_check);
    check(&mut results, 6, "hopf residual", hopf_check);
    check(&mut results, 7, "mobius energy", mobius_check);
    check(&mut results, 8, "injectivity histogram", histogram_check);
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
