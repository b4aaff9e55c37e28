//! One function per subcommand. Each writes its files into the output
//! directory and returns the invariant failures it found.

use anyhow::{Context, Result};
use neohook_core::cantor::{area_fraction, cantor_measure, centersquares_up_to, generation, CantorConfig, CantorError, CantorMap};
use neohook_core::energy::{energy_analytic, EnergyError, EnergyParams, EnergyReport, QuadStatus, QuadratureSpec};
use neohook_core::geometry::{make_rect_mesh, PLMap, Point2, Rect};
use neohook_core::maps::{pinch_eval, q_threshold, AnalyticMap, MapError, PinchParams};
use neohook_core::minimizer::{init_minimizer, minimize_with, Initial, MinimizerConfig, MinimizerError};
use neohook_core::verify::{
    branch_area_report, injectivity_count, modulus_profile, threshold_sweep, PlanarMap, ThresholdRow, VerifyError,
};

use crate::config::{Check, Command, ConfigError, InitSpec, RunConfig};
use crate::output::{num, Csv, OutDir, Svg};

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError::Constraint(e.to_string()).into()
}

/// Parameter errors from the library are usage errors; anything else is a run failure.
fn classify_map(e: MapError) -> anyhow::Error {
    match e {
        MapError::Infeasible(_) | MapError::InvalidParameter(_) | MapError::UnknownMap(_) => usage(e),
        e => e.into(),
    }
}

fn classify_energy(e: EnergyError) -> anyhow::Error {
    match e {
        EnergyError::InvalidParams(_) | EnergyError::BadSetting(_) | EnergyError::Regime(_) => usage(e),
        EnergyError::Map(m) => classify_map(m),
        e => e.into(),
    }
}

fn classify_cantor(e: CantorError) -> anyhow::Error {
    match e {
        CantorError::BadEpsilon(_) | CantorError::DepthExceeded { .. } | CantorError::BadRule(_) | CantorError::BadTolerance(_) => usage(e),
        CantorError::Map(m) => classify_map(m),
        e => e.into(),
    }
}

fn classify_verify(e: VerifyError) -> anyhow::Error {
    match e {
        VerifyError::Resolution { .. } | VerifyError::BadSetting(_) | VerifyError::PTooSmall(_) => usage(e),
        VerifyError::Map(m) => classify_map(m),
        VerifyError::Cantor(c) => classify_cantor(c),
        VerifyError::Energy(x) => classify_energy(x),
        e => e.into(),
    }
}

pub fn run(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    match cfg.command {
        Command::Energy => energy(cfg, out),
        Command::Minimize => minimize(cfg, out),
        Command::Cantor => cantor(cfg, out),
        Command::Verify => match cfg.check {
            Check::Nh => verify_nh(cfg, out),
            Check::Modulus => verify_modulus(cfg, out),
            Check::Threshold => verify_threshold(cfg, out),
            Check::Branch => verify_branch(cfg, out),
        },
        Command::Sweep => sweep(cfg, out),
        Command::Pinch => pinch(cfg, out),
    }
}

fn quadrature(cfg: &RunConfig) -> QuadratureSpec {
    QuadratureSpec { cells: cfg.cells, grading: cfg.grading, order: cfg.order, levels: cfg.levels }
}

fn energy_params(cfg: &RunConfig) -> Result<EnergyParams> {
    EnergyParams::new(cfg.single("p")?, cfg.single("q")?).map_err(classify_energy)
}

fn pinch_params(cfg: &RunConfig) -> Result<PinchParams> {
    let (p, q) = (cfg.single("p")?, cfg.single("q")?);
    match (cfg.a, cfg.b) {
        (Some(a), Some(b)) => PinchParams::new(a, b, p, q).map_err(classify_map),
        (None, None) => PinchParams::default_for(p, q).map_err(classify_map),
        _ => Err(usage("give both a and b, or neither")),
    }
}

fn analytic_map(cfg: &RunConfig) -> Result<AnalyticMap> {
    let (p, q) = (cfg.single("p")?, cfg.single("q")?);
    match cfg.area {
        Some(area) if cfg.map == "identity" => Ok(AnalyticMap::Identity(Rect::new(0.0, area, 0.0, 1.0).map_err(usage)?)),
        Some(_) => Err(usage("area applies to map = identity only")),
        None => AnalyticMap::parse(&cfg.map, p, q).map_err(classify_map),
    }
}

fn cantor_config(cfg: &RunConfig, max_depth: usize) -> Result<CantorConfig> {
    CantorConfig::new(cfg.eps_rule(), Rect::unit_square(), max_depth).map_err(classify_cantor)
}

fn status_str(s: Option<QuadStatus>) -> String {
    s.map_or("", |s| s.as_str()).to_string()
}

fn energy(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let params = energy_params(cfg)?;
    let map = analytic_map(cfg)?;
    let report = energy_analytic(&map, &params, &quadrature(cfg)).map_err(classify_energy)?;
    let mut csv = Csv::new(&["map", "p", "q", "gradient_term", "barrier_term", "total", "converged", "status"]);
    let name = match cfg.area {
        Some(a) => format!("identity:w={a:?},h=1.0"),
        None => cfg.map.clone(),
    };
    csv.row(&[
        name,
        num(params.p),
        num(params.q),
        num(report.gradient_term),
        num(report.barrier_term),
        num(report.total),
        report.converged().to_string(),
        report.status.as_str().into(),
    ]);
    out.csv("energy.csv", csv)?;
    if cfg.per_level {
        write_levels(out, "levels.csv", &report)?;
    }
    Ok(Vec::new())
}

fn write_levels(out: &OutDir, name: &str, report: &EnergyReport) -> Result<()> {
    let mut csv = Csv::new(&["level", "cells", "gradient_term", "barrier_term", "total"]);
    for l in &report.levels {
        csv.row(&[l.level.to_string(), l.cells.to_string(), num(l.gradient_term), num(l.barrier_term), num(l.total)]);
    }
    out.csv(name, csv)?;
    Ok(())
}

fn mesh_svg(map: &PLMap, target: Rect) -> String {
    let pad = 0.05 * target.width().max(target.height());
    let view = Rect::new(target.xmin - pad, target.xmax + pad, target.ymin - pad, target.ymax + pad).expect("padded target");
    let mut svg = Svg::new(view);
    svg.rect(&target, "none", "#999999");
    svg.mesh(map, "#1f4e9c");
    svg.finish()
}

fn minimize(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let params = energy_params(cfg)?;
    let source = Rect::unit_square();
    let target = Rect::new(0.0, cfg.target.0, 0.0, cfg.target.1).map_err(usage)?;
    let mesh = make_rect_mesh(source, cfg.nx, cfg.ny).map_err(usage)?;
    let initial = match cfg.init {
        InitSpec::Identity => Initial::Identity,
        InitSpec::Bilinear => Initial::Bilinear,
        InitSpec::Perturb { sigma, seed } => Initial::Perturb { sigma, seed },
    };
    let mut state = init_minimizer(mesh, target, initial, &params).map_err(|e| match e {
        MinimizerError::IdentityNeedsSameRect | MinimizerError::BadConfig(_) | MinimizerError::Perturbation(_) => usage(e),
        e => e.into(),
    })?;
    let mut mcfg = MinimizerConfig::new(params);
    mcfg.max_iters = cfg.max_iters;
    mcfg.grad_tol = cfg.tol;
    out.write("snapshots/iter_000000.svg", &mesh_svg(state.map(), target))?;

    let mut csv = Csv::new(&["iter", "energy", "min_det", "grad_norm", "step"]);
    let mut snaps = Vec::new();
    let mut failures = Vec::new();
    let mut last = state.energy();
    let every = cfg.snapshot_every;
    let result = minimize_with(&mut state, &mcfg, |s, rec| {
        csv.row(&[rec.iter.to_string(), num(rec.energy), num(rec.min_det), num(rec.grad_norm), num(rec.step)]);
        if !(rec.energy < last) {
            failures.push(format!("energy did not decrease at iteration {}", rec.iter));
        }
        if !(rec.min_det > 0.0) {
            failures.push(format!("nonpositive Jacobian at iteration {}", rec.iter));
        }
        last = rec.energy;
        if every > 0 && rec.iter % every == 0 {
            snaps.push((rec.iter, mesh_svg(s.map(), target)));
        }
    });
    let (status, report) = match result {
        Ok(r) => (if r.converged { "converged" } else { "max_iters" }, Some(r)),
        Err(MinimizerError::Stall { .. }) => ("stalled", None),
        Err(MinimizerError::BadConfig(m)) => return Err(usage(m)),
        Err(e) => {
            failures.push(e.to_string());
            ("failed", None)
        }
    };
    out.csv("iterations.csv", csv)?;
    for (it, svg) in snaps {
        out.write(&format!("snapshots/iter_{it:06}.svg"), &svg)?;
    }
    out.write("final.svg", &mesh_svg(state.map(), target))?;
    let mut mesh_text = Vec::new();
    state.map().write_deformed(&mut mesh_text)?;
    out.write("deformed.mesh", &String::from_utf8(mesh_text).expect("ascii"))?;

    let lower = (source == target).then(|| neohook_core::energy::identity_energy(target.area(), &params));
    if let Some(lb) = lower {
        if state.energy() < lb - 1e-9 {
            failures.push(format!("final energy {} is below the lower bound {lb}", state.energy()));
        }
    }
    let mut summary = Csv::new(&["status", "iterations", "final_energy", "lower_bound", "min_det", "grad_norm"]);
    let (min_det, gnorm) = report.as_ref().map_or((f64::NAN, f64::NAN), |r| (r.min_det, r.grad_norm));
    summary.row(&[
        status.into(),
        state.iteration().to_string(),
        num(state.energy()),
        lower.map(num).unwrap_or_default(),
        num(min_det),
        num(gnorm),
    ]);
    out.csv("summary.csv", summary)?;
    Ok(failures)
}

fn cantor(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let svg_depth = cfg.svg_depth.min(cfg.depth);
    if svg_depth > 7 {
        return Err(usage("svg_depth above 7 draws more than 16384 squares"));
    }
    let ccfg = cantor_config(cfg, cfg.depth)?;
    let eps = &ccfg.eps;
    let mut csv = Csv::new(&["n", "count", "side", "area"]);
    let mut side = 1.0;
    for n in 0..=cfg.depth {
        if n > 0 {
            side *= 0.5 * (1.0 - eps.eps(n));
        }
        let count = 4u128.checked_pow(n as u32).map_or_else(|| format!("4^{n}"), |c| c.to_string());
        csv.row(&[n.to_string(), count, num(side), num(area_fraction(n, eps))]);
    }
    out.csv("generations.csv", csv)?;

    let mut m = Csv::new(&["rule", "value", "terms", "summable"]);
    match cantor_measure(&ccfg, 1e-15) {
        Ok(e) => m.row(&[cfg.eps.clone(), num(e.value), e.terms.to_string(), "true".into()]),
        Err(CantorError::NonSummable { partial, terms }) => m.row(&[cfg.eps.clone(), num(partial), terms.to_string(), "false".into()]),
        Err(e) => return Err(classify_cantor(e)),
    }
    out.csv("measure.csv", m)?;

    let fam = generation(svg_depth, &ccfg).map_err(classify_cantor)?;
    let centers = centersquares_up_to(svg_depth, &ccfg).map_err(classify_cantor)?;
    let mut svg = Svg::new(ccfg.base);
    svg.rect(&ccfg.base, "none", "#000000");
    for q in &fam.squares {
        svg.rect(&q.bounds, "#c9d7ee", "#1f4e9c");
    }
    for q in &centers {
        svg.rect(&q.bounds, "#f2b8b0", "#b22b1c");
    }
    out.write("cantor.svg", &svg.finish())?;

    let mut sq = Csv::new(&["generation", "index", "xmin", "ymin", "side"]);
    for q in &centers {
        sq.row(&[(q.depth() + 1).to_string(), q.index_string(), num(q.bounds.xmin), num(q.bounds.ymin), num(q.side())]);
    }
    out.csv("centersquares.csv", sq)?;
    Ok(Vec::new())
}

enum Target {
    Analytic(AnalyticMap),
    Cantor(CantorMap),
}

impl Target {
    fn planar(&self) -> &dyn PlanarMap {
        match self {
            Target::Analytic(m) => m,
            Target::Cantor(m) => m,
        }
    }
}

fn verify_target(cfg: &RunConfig) -> Result<Target> {
    if cfg.map == "cantor" {
        let ccfg = cantor_config(cfg, cfg.depth)?;
        Ok(Target::Cantor(CantorMap::new(ccfg, pinch_params(cfg)?, cfg.depth).map_err(classify_cantor)?))
    } else {
        Ok(Target::Analytic(analytic_map(cfg)?))
    }
}

fn verify_nh(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let target = verify_target(cfg)?;
    let h = injectivity_count(target.planar(), cfg.samples, cfg.target_cells).map_err(classify_verify)?;
    let mut csv = Csv::new(&["n", "cells"]);
    for (n, c) in &h.counts {
        csv.row(&[n.to_string(), c.to_string()]);
    }
    out.csv("histogram.csv", csv)?;
    let mut s = Csv::new(&["map", "samples", "cells", "fraction_n1", "collapse_cells", "max_preimage_ratio"]);
    s.row(&[
        cfg.map.clone(),
        h.samples_per_axis.to_string(),
        h.cells_per_axis.to_string(),
        num(h.fraction_n1),
        h.collapse_cells.to_string(),
        num(h.max_preimage_ratio),
    ]);
    out.csv("nh.csv", s)?;
    let mut failures = Vec::new();
    if h.total_cells() != h.cells_per_axis * h.cells_per_axis {
        failures.push(format!("histogram covers {} of {} cells", h.total_cells(), h.cells_per_axis * h.cells_per_axis));
    }
    if h.fraction_n1 < cfg.min_fraction {
        failures.push(format!("fraction_N1 = {} is below {}", h.fraction_n1, cfg.min_fraction));
    }
    Ok(failures)
}

fn verify_modulus(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let map = match verify_target(cfg)? {
        Target::Analytic(m) => m,
        Target::Cantor(_) => return Err(usage("the modulus check needs a closed-form map (its Dirichlet energy is integrated)")),
    };
    let dirichlet = energy_analytic(&map, &EnergyParams::new(2.0, cfg.single("q")?).map_err(classify_energy)?, &quadrature(cfg))
        .map_err(classify_energy)?
        .gradient_term;
    let r = modulus_profile(&map, dirichlet, cfg.pairs, cfg.bins, cfg.seed).map_err(classify_verify)?;
    let mut csv = Csv::new(&["delta", "omega", "count"]);
    for row in &r.rows {
        csv.row(&[num(row.delta), num(row.omega), row.count.to_string()]);
    }
    out.csv("modulus.csv", csv)?;
    let mut s = Csv::new(&["map", "pairs", "dirichlet", "fitted_c"]);
    s.row(&[cfg.map.clone(), r.pairs.to_string(), num(r.dirichlet), num(r.fitted_c)]);
    out.csv("modulus_fit.csv", s)?;
    let mut failures = Vec::new();
    if !r.rows.windows(2).all(|w| w[0].omega <= w[1].omega) {
        failures.push("ω(δ) is not nondecreasing".into());
    }
    if !(r.fitted_c >= 0.0) || !r.fitted_c.is_finite() {
        failures.push(format!("fitted constant {} is not finite and nonnegative", r.fitted_c));
    }
    Ok(failures)
}

fn threshold_csv(rows: &[ThresholdRow], totals: Option<&[(Option<f64>, f64)]>) -> Csv {
    let mut header = vec!["p", "q", "q_threshold", "feasible", "witness_a", "witness_b", "witness_status", "probe_a", "probe_b", "probe_status"];
    if totals.is_some() {
        header.extend(["witness_total", "probe_total"]);
    }
    let mut csv = Csv::new(&header);
    for (i, r) in rows.iter().enumerate() {
        let mut f = vec![
            num(r.p),
            num(r.q),
            num(r.q_threshold),
            r.feasible.to_string(),
            r.witness.map(|w| num(w.a)).unwrap_or_default(),
            r.witness.map(|w| num(w.b)).unwrap_or_default(),
            status_str(r.witness_status),
            num(r.probe.a),
            num(r.probe.b),
            status_str(r.probe_status),
        ];
        if let Some(t) = totals {
            f.push(t[i].0.map(num).unwrap_or_default());
            f.push(num(t[i].1));
        }
        csv.row(&f);
    }
    csv
}

fn mismatches(rows: &[ThresholdRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| r.feasible != (r.q < q_threshold(r.p)))
        .map(|r| format!("feasibility mismatch at p = {}, q = {}", r.p, r.q))
        .collect()
}

fn verify_threshold(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let spec = quadrature(cfg);
    let t = threshold_sweep(&cfg.p, &cfg.q, cfg.with_energy.then_some(&spec)).map_err(classify_verify)?;
    out.csv("threshold.csv", threshold_csv(&t.rows, None))?;
    Ok(mismatches(&t.rows))
}

fn sweep(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let spec = quadrature(cfg);
    let t = threshold_sweep(&cfg.p, &cfg.q, None).map_err(classify_verify)?;
    let mut rows = t.rows;
    let mut totals = Vec::with_capacity(rows.len());
    for r in &mut rows {
        let ep = EnergyParams::new(r.p, r.q).map_err(classify_energy)?;
        let run = |pp: PinchParams| energy_analytic(&AnalyticMap::Pinch(pp), &ep, &spec).map_err(classify_energy);
        let w = r.witness.map(run).transpose()?;
        let pr = run(r.probe)?;
        r.witness_status = w.as_ref().map(|x| x.status);
        r.probe_status = Some(pr.status);
        totals.push((w.map(|x| x.total), pr.total));
    }
    out.csv("sweep.csv", threshold_csv(&rows, Some(&totals)))?;
    Ok(mismatches(&rows))
}

fn verify_branch(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let ccfg = cantor_config(cfg, cfg.depth)?;
    let params = pinch_params(cfg)?;
    let model = if cfg.with_energy {
        let ep = EnergyParams::new(params.p, params.q).map_err(classify_energy)?;
        Some(energy_analytic(&AnalyticMap::ModelPhi(params), &ep, &quadrature(cfg)).map_err(classify_energy)?.total)
    } else {
        None
    };
    let r = branch_area_report(&ccfg, cfg.depth, params, cfg.seed, model).map_err(classify_verify)?;
    let mut s = Csv::new(&["depth", "lower_bound", "centersquare_area", "fixed_points_checked", "fixed_point_failures", "witnesses", "energy"]);
    s.row(&[
        r.depth.to_string(),
        num(r.lower_bound),
        num(r.centersquare_area),
        r.fixed_points_checked.to_string(),
        r.fixed_point_failures.to_string(),
        r.witnesses.len().to_string(),
        r.energy.map(num).unwrap_or_default(),
    ]);
    out.csv("branch.csv", s)?;
    let mut w = Csv::new(&["x1", "y1", "x2", "y2", "image_x", "image_y"]);
    for x in &r.witnesses {
        w.row(&[num(x.x1.x), num(x.x1.y), num(x.x2.x), num(x.x2.y), num(x.image.x), num(x.image.y)]);
    }
    out.csv("witnesses.csv", w)?;
    let mut failures = Vec::new();
    if r.fixed_point_failures > 0 {
        failures.push(format!("{} sampled points of the remainder moved", r.fixed_point_failures));
    }
    if r.depth >= 1 && r.witnesses.is_empty() {
        failures.push("no non-injectivity witness in the generation-1 centersquare".into());
    }
    if !(r.lower_bound > 0.0) {
        failures.push("the area lower bound is not positive".into());
    }
    Ok(failures)
}

fn pinch(cfg: &RunConfig, out: &OutDir) -> Result<Vec<String>> {
    let params = pinch_params(cfg)?;
    let ep = EnergyParams::new(params.p, params.q).map_err(classify_energy)?;
    let report = energy_analytic(&AnalyticMap::Pinch(params), &ep, &quadrature(cfg)).map_err(classify_energy)?;
    let y1 = pinch_eval(Point2::new(0.0, -0.5), &params).context("pinch map")?;
    let y2 = pinch_eval(Point2::new(0.0, 0.5), &params).context("pinch map")?;
    let mut csv = Csv::new(&[
        "a", "b", "p", "q", "q_threshold", "gradient_term", "barrier_term", "total", "status", "segment_collapsed",
    ]);
    csv.row(&[
        num(params.a),
        num(params.b),
        num(params.p),
        num(params.q),
        num(q_threshold(params.p)),
        num(report.gradient_term),
        num(report.barrier_term),
        num(report.total),
        report.status.as_str().into(),
        (y1 == y2).to_string(),
    ]);
    out.csv("pinch.csv", csv)?;
    if cfg.per_level {
        write_levels(out, "levels.csv", &report)?;
    }

    // images of the grid lines x = const and y = const
    let view = Rect::new(-1.1, 1.1, -2.1, 2.1).expect("fixed view");
    let mut svg = Svg::new(view);
    let steps = 200;
    for k in 0..=16 {
        let x = -1.0 + 2.0 * k as f64 / 16.0;
        let pts: Vec<Point2> = (0..=steps)
            .map(|i| pinch_eval(Point2::new(x, -2.0 + 4.0 * i as f64 / steps as f64), &params))
            .collect::<Result<_, _>>()?;
        svg.polyline(&pts, "#1f4e9c");
    }
    for k in 0..=32 {
        let y = -2.0 + 4.0 * k as f64 / 32.0;
        let pts: Vec<Point2> = (0..=steps)
            .map(|i| pinch_eval(Point2::new(-1.0 + 2.0 * i as f64 / steps as f64, y), &params))
            .collect::<Result<_, _>>()?;
        svg.polyline(&pts, "#b22b1c");
    }
    out.write("pinch.svg", &svg.finish())?;
    let mut failures = Vec::new();
    if y1 != y2 {
        failures.push("the segment {0} x [-1, 1] is not collapsed".into());
    }
    Ok(failures)
}
